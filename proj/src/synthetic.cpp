#include "msntucf/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "msntucf/error.hpp"
#include "msntucf/rng.hpp"

namespace msntucf {

void SyntheticSpec::validate() const {
  if (shape.users == 0 || shape.services == 0 || shape.time_slices == 0) {
    fail(ErrorKind::Config, "synthetic shape must be positive in every mode");
  }
  if (rank_p == 0 || rank_q == 0 || rank_r == 0) fail(ErrorKind::Config, "synthetic ranks must be positive");
  if (!(noise >= 0.0)) fail(ErrorKind::Config, "synthetic noise must be non-negative");
  if (!(density > 0.0 && density <= 1.0)) fail(ErrorKind::Config, "synthetic density must lie in (0, 1]");
}

namespace {

DenseTensor uniform_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  DenseTensor m({rows, cols});
  for (double& v : m.data()) v = rng.uniform(-1.0, 1.0);
  return m;
}

double gaussian(Rng& rng) {
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const TensorShape& s = spec.shape;
  Rng rng(spec.seed, 0x5E7);
  const DenseTensor a = uniform_matrix(s.users, spec.rank_p, rng);
  const DenseTensor b = uniform_matrix(s.services, spec.rank_q, rng);
  const DenseTensor c = uniform_matrix(s.time_slices, spec.rank_r, rng);
  DenseTensor core({spec.rank_p, spec.rank_q, spec.rank_r});
  for (double& v : core.data()) v = rng.uniform(-1.0, 1.0);

  DenseTensor truth({s.users, s.services, s.time_slices});
  for (std::size_t i = 0; i < s.users; ++i)
    for (std::size_t j = 0; j < s.services; ++j)
      for (std::size_t k = 0; k < s.time_slices; ++k) {
        double y = 0.0;
        for (std::size_t p = 0; p < spec.rank_p; ++p)
          for (std::size_t q = 0; q < spec.rank_q; ++q)
            for (std::size_t r = 0; r < spec.rank_r; ++r)
              y += core.at(p, q, r) * a.at(i, p) * b.at(j, q) * c.at(k, r);
        truth.at(i, j, k) = y;
      }
  const auto [lo, hi] = std::minmax_element(truth.data().begin(), truth.data().end());
  const double min = *lo, range = *hi - *lo;
  for (double& v : truth.data()) v = range > 0.0 ? 0.05 + 0.9 * (v - min) / range : 0.5;

  const std::size_t volume = s.volume();
  const auto count = static_cast<std::size_t>(std::llround(spec.density * static_cast<double>(volume)));
  if (count == 0) fail(ErrorKind::Data, "synthetic density too low: no cell would be observed");
  std::vector<std::size_t> cells(volume);
  std::iota(cells.begin(), cells.end(), std::size_t{0});
  shuffle(std::span<std::size_t>(cells), rng);
  cells.resize(count);
  std::sort(cells.begin(), cells.end());

  std::vector<Entry> entries;
  entries.reserve(count);
  for (std::size_t cell : cells) {
    const auto k = static_cast<std::uint32_t>(cell % s.time_slices);
    const auto j = static_cast<std::uint32_t>((cell / s.time_slices) % s.services);
    const auto i = static_cast<std::uint32_t>(cell / s.time_slices / s.services);
    double v = truth[cell];
    if (spec.noise > 0.0) v = std::clamp(v + spec.noise * gaussian(rng), 0.0, 1.0);
    entries.push_back({i, j, k, v});
  }
  return {std::move(truth), SparseTensor(s, std::move(entries))};
}

}  // namespace msntucf
