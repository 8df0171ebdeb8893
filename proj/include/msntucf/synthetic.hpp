#pragma once

#include <cstdint>

#include "msntucf/dense_tensor.hpp"
#include "msntucf/sparse_tensor.hpp"

namespace msntucf {

struct SyntheticSpec {
  TensorShape shape{20, 20, 10};
  std::size_t rank_p = 3;
  std::size_t rank_q = 3;
  std::size_t rank_r = 3;
  /// Standard deviation of additive Gaussian noise on the (0, 1) scale.
  double noise = 0.0;
  double density = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SyntheticData {
  /// Complete ground truth, (I, J, K), values in [0.05, 0.95] before noise.
  DenseTensor truth;
  SparseTensor observed;
};

/// Full Tucker tensor sum_pqr g_pqr a_p o b_q o c_r from uniform random
/// factors and core, min-max mapped to [0.05, 0.95], optionally perturbed and
/// clamped to [0, 1], then sampled at round(density * I*J*K) random cells.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace msntucf
