#include "msntucf/metrics.hpp"

#include <cmath>

#include "msntucf/error.hpp"

namespace msntucf {

namespace {

void require_nonempty(std::span<const Prediction> pairs, const char* metric) {
  if (pairs.empty()) fail(ErrorKind::Usage, std::string(metric) + " of an empty set");
}

}  // namespace

double mae(std::span<const Prediction> pairs) {
  require_nonempty(pairs, "MAE");
  double total = 0.0;
  for (const auto& p : pairs) total += std::abs(p.truth - p.predicted);
  return total / static_cast<double>(pairs.size());
}

double rmse(std::span<const Prediction> pairs) {
  require_nonempty(pairs, "RMSE");
  double total = 0.0;
  for (const auto& p : pairs) total += (p.truth - p.predicted) * (p.truth - p.predicted);
  return std::sqrt(total / static_cast<double>(pairs.size()));
}

MreResult mre(std::span<const Prediction> pairs) {
  require_nonempty(pairs, "MRE");
  MreResult out;
  double total = 0.0;
  std::size_t used = 0;
  for (const auto& p : pairs) {
    if (p.truth <= kMreZeroThreshold) {
      ++out.excluded;
      continue;
    }
    total += std::abs(p.truth - p.predicted) / p.truth;
    ++used;
  }
  if (used == 0) fail(ErrorKind::Numerical, "MRE undefined: every truth is zero");
  out.value = total / static_cast<double>(used);
  return out;
}

MetricsReport compute_metrics(std::span<const Prediction> pairs) {
  MetricsReport r;
  r.mae = mae(pairs);
  r.rmse = rmse(pairs);
  r.n_entries = pairs.size();
  const MreResult m = mre(pairs);
  r.mre = m.value;
  r.n_mre_excluded = m.excluded;
  return r;
}

}  // namespace msntucf
