#pragma once

#include "msntucf/sparse_tensor.hpp"

namespace msntucf {

/// Log + min-max scaling fitted on training entries:
///   z = ln(1 + v),  u = (z - z_min) / (z_max - z_min)
struct NormalizationParams {
  bool log_applied = true;
  double z_min = 0.0;
  double z_max = 1.0;

  /// All training values mapped to the same z. transform() then returns 0.5.
  bool degenerate() const { return !(z_max > z_min); }
  bool operator==(const NormalizationParams&) const = default;
};

/// Fits on the training tensor only. Throws on an empty tensor.
NormalizationParams fit_normalization(const SparseTensor& train);

/// Maps v >= 0 into [0, 1], clamping values outside the training range.
double transform(double v, const NormalizationParams& p);

/// Inverse of transform on [0, 1].
double inverse_transform(double u, const NormalizationParams& p);

}  // namespace msntucf
