#include "unoranic/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "unoranic/errors.hpp"

namespace unoranic::eval {
namespace {

template <class T>
double psnr_impl(std::span<const T> a, std::span<const T> b, double peak) {
  if (a.size() != b.size()) throw ShapeError("psnr: inputs differ in size");
  if (a.empty()) throw ShapeError("psnr: empty input");
  if (!(peak > 0)) throw ConfigError("psnr: peak must be positive");
  double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(a.size());
  if (mse == 0) return kInfinitePsnr;
  return 10.0 * std::log10(peak * peak / mse);
}

}  // namespace

double psnr(std::span<const float> reference, std::span<const float> candidate, double peak) {
  return psnr_impl(reference, candidate, peak);
}

double psnr(std::span<const double> reference, std::span<const double> candidate, double peak) {
  return psnr_impl(reference, candidate, peak);
}

double psnr(const data::ImageSample& reference, const data::ImageSample& candidate, double peak) {
  if (!(reference.shape == candidate.shape)) throw ShapeError("psnr: image shapes differ");
  return psnr(std::span<const float>(reference.pixels), std::span<const float>(candidate.pixels), peak);
}

PsnrSummary summarize_psnr(std::span<const double> values) {
  PsnrSummary s;
  double sum = 0;
  for (double v : values) {
    if (std::isinf(v)) {
      ++s.infinite_count;
    } else {
      sum += v;
      ++s.finite_count;
    }
  }
  s.mean = s.finite_count > 0 ? sum / static_cast<double>(s.finite_count) : kInfinitePsnr;
  return s;
}

double roc_auc(std::span<const double> scores, std::span<const std::int64_t> labels) {
  if (scores.size() != labels.size()) throw ShapeError("roc_auc: scores and labels differ in length");
  std::size_t pos = 0;
  for (auto l : labels) {
    if (l != 0 && l != 1) throw ConfigError("roc_auc: labels must be 0 or 1");
    pos += static_cast<std::size_t>(l);
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw UndefinedMetricError("roc_auc: both classes must be present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return scores[i] < scores[j]; });
  // Sum of midranks of the positives (ranks 1-based, ties share the mean rank).
  double rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) rank_sum += midrank;
    i = j + 1;
  }
  const double p = static_cast<double>(pos);
  const double u = rank_sum - p * (p + 1) / 2;
  return u / (p * static_cast<double>(neg));
}

double roc_auc_ovr(std::span<const double> scores, std::span<const std::int64_t> labels,
                   int class_count) {
  if (class_count < 2) throw ConfigError("roc_auc_ovr: class_count must be >= 2");
  const auto n = labels.size();
  if (scores.size() != n * static_cast<std::size_t>(class_count))
    throw ShapeError("roc_auc_ovr: scores must be [n, class_count]");
  std::vector<double> column(n);
  std::vector<std::int64_t> binary(n);
  double sum = 0;
  int used = 0;
  for (int c = 0; c < class_count; ++c) {
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n; ++i) {
      column[i] = scores[i * class_count + c];
      binary[i] = labels[i] == c ? 1 : 0;
      positives += binary[i];
    }
    if (positives == 0 || positives == n) continue;
    sum += roc_auc(column, binary);
    ++used;
  }
  if (used < 2) throw UndefinedMetricError("roc_auc_ovr: fewer than two classes present");
  return sum / used;
}

double accuracy(std::span<const std::int64_t> predicted, std::span<const std::int64_t> truth) {
  if (predicted.size() != truth.size()) throw ShapeError("accuracy: lengths differ");
  if (truth.empty()) throw UndefinedMetricError("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace unoranic::eval
