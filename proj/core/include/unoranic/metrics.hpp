#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "unoranic/dataio.hpp"

namespace unoranic::eval {

inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

// 10 log10(peak^2 / MSE); +inf when the inputs are identical.
double psnr(std::span<const float> reference, std::span<const float> candidate, double peak = 1.0);
double psnr(std::span<const double> reference, std::span<const double> candidate, double peak = 1.0);
double psnr(const data::ImageSample& reference, const data::ImageSample& candidate, double peak = 1.0);

// Mean over finite values; infinite ones are only counted. The mean of an
// all-infinite list is +inf.
struct PsnrSummary {
  double mean = 0;
  std::size_t finite_count = 0;
  std::size_t infinite_count = 0;
};
PsnrSummary summarize_psnr(std::span<const double> values);

// P(score+ > score-) + 0.5 P(tie). Labels are 0/1; throws
// UndefinedMetricError unless both occur.
double roc_auc(std::span<const double> scores, std::span<const std::int64_t> labels);

// Unweighted one-vs-rest macro average. `scores` is row-major [n, class_count].
// Classes without positives in `labels` are skipped; fewer than two usable
// classes is an UndefinedMetricError.
double roc_auc_ovr(std::span<const double> scores, std::span<const std::int64_t> labels,
                   int class_count);

double accuracy(std::span<const std::int64_t> predicted, std::span<const std::int64_t> truth);

}  // namespace unoranic::eval
