#include "msntucf/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "msntucf/error.hpp"

namespace msntucf {

namespace {

double to_z(double v, const NormalizationParams& p) { return p.log_applied ? std::log1p(v) : v; }

}  // namespace

NormalizationParams fit_normalization(const SparseTensor& train) {
  if (train.empty()) fail(ErrorKind::Data, "cannot fit normalization on an empty training set");
  NormalizationParams p;
  p.z_min = p.z_max = to_z(train.entries().front().value, p);
  for (const Entry& e : train.entries()) {
    const double z = to_z(e.value, p);
    p.z_min = std::min(p.z_min, z);
    p.z_max = std::max(p.z_max, z);
  }
  return p;
}

double transform(double v, const NormalizationParams& p) {
  if (!(v >= 0.0)) fail(ErrorKind::Data, "transform: negative input " + std::to_string(v));
  if (p.degenerate()) return 0.5;
  const double u = (to_z(v, p) - p.z_min) / (p.z_max - p.z_min);
  return std::clamp(u, 0.0, 1.0);
}

double inverse_transform(double u, const NormalizationParams& p) {
  if (!(u >= 0.0 && u <= 1.0)) {
    fail(ErrorKind::Data, "inverse_transform: input " + std::to_string(u) + " outside [0, 1]");
  }
  const double z = p.degenerate() ? p.z_min : u * (p.z_max - p.z_min) + p.z_min;
  return p.log_applied ? std::expm1(z) : z;
}

}  // namespace msntucf
