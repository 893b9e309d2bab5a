#include "unoranic/seed.hpp"

#include <cmath>
#include <numbers>

namespace unoranic {

std::uint64_t CounterRng::below(std::uint64_t n) noexcept {
  // Lemire's multiply-shift; the residual bias is < n / 2^64.
  const auto wide = static_cast<unsigned __int128>(next_u64()) * n;
  return static_cast<std::uint64_t>(wide >> 64);
}

double CounterRng::normal() noexcept {
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t CounterRng::poisson(double lambda) noexcept {
  if (lambda <= 0.0) return 0;
  const double limit = std::exp(-lambda);
  std::uint64_t k = 0;
  double prod = uniform();
  while (prod > limit) {
    ++k;
    prod *= uniform();
  }
  return k;
}

}  // namespace unoranic
