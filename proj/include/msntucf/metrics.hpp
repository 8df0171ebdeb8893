#pragma once

#include <cstddef>
#include <span>

namespace msntucf {

struct Prediction {
  double truth = 0.0;
  double predicted = 0.0;
};

/// Truths at or below this are left out of MRE.
inline constexpr double kMreZeroThreshold = 1e-12;

double mae(std::span<const Prediction> pairs);
double rmse(std::span<const Prediction> pairs);

struct MreResult {
  double value = 0.0;
  std::size_t excluded = 0;
};

/// Mean of |y - y_hat| / y over pairs with y > kMreZeroThreshold.
MreResult mre(std::span<const Prediction> pairs);

struct MetricsReport {
  double mae = 0.0;
  double mre = 0.0;
  double rmse = 0.0;
  std::size_t n_entries = 0;
  std::size_t n_mre_excluded = 0;

  bool operator==(const MetricsReport&) const = default;
};

MetricsReport compute_metrics(std::span<const Prediction> pairs);

}  // namespace msntucf
