#include "msntucf/preprocess.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "msntucf/rng.hpp"
#include "test_errors.hpp"

namespace msntucf {
namespace {

using testing::error_kind_of;

SparseTensor values(std::initializer_list<double> vs) {
  std::vector<Entry> entries;
  std::uint32_t n = 0;
  for (double v : vs) entries.push_back({n++, 0, 0, v});
  return SparseTensor({static_cast<std::size_t>(entries.size()), 1, 1}, entries);
}

TEST(Normalization, FitExamples) {
  const NormalizationParams a = fit_normalization(values({0.0, std::exp(1.0) - 1.0, std::exp(2.0) - 1.0}));
  EXPECT_TRUE(a.log_applied);
  EXPECT_EQ(a.z_min, 0.0);
  EXPECT_NEAR(a.z_max, 2.0, 1e-15);

  const NormalizationParams b = fit_normalization(values({2.0, 1.5}));
  EXPECT_NEAR(b.z_min, std::log(2.5), 1e-15);
  EXPECT_NEAR(b.z_max, std::log(3.0), 1e-15);
  EXPECT_FALSE(b.degenerate());
}

TEST(Normalization, EmptyTrainRejected) {
  EXPECT_EQ(error_kind_of([] { fit_normalization(SparseTensor({1, 1, 1}, {})); }), ErrorKind::Data);
}

TEST(Normalization, DegenerateRangeMapsToHalf) {
  const NormalizationParams p = fit_normalization(values({3.0, 3.0, 3.0}));
  EXPECT_TRUE(p.degenerate());
  EXPECT_EQ(transform(3.0, p), 0.5);
  EXPECT_EQ(transform(100.0, p), 0.5);
  EXPECT_NEAR(inverse_transform(0.5, p), 3.0, 1e-12);
}

TEST(Normalization, TransformBoundaries) {
  const NormalizationParams p{true, std::log(2.0), std::log(5.0)};
  EXPECT_EQ(transform(1.0, p), 0.0);
  EXPECT_EQ(transform(4.0, p), 1.0);
  const double mid = std::exp(0.5 * (p.z_min + p.z_max)) - 1.0;
  EXPECT_NEAR(transform(mid, p), 0.5, 1e-15);
}

TEST(Normalization, ClampsOutOfRange) {
  const NormalizationParams p{true, std::log(2.0), std::log(5.0)};
  EXPECT_EQ(transform(0.0, p), 0.0);
  EXPECT_EQ(transform(50.0, p), 1.0);
}

TEST(Normalization, DomainErrors) {
  const NormalizationParams p{true, 0.0, 1.0};
  EXPECT_EQ(error_kind_of([&] { transform(-0.1, p); }), ErrorKind::Data);
  EXPECT_EQ(error_kind_of([&] { inverse_transform(1.0001, p); }), ErrorKind::Data);
  EXPECT_EQ(error_kind_of([&] { inverse_transform(-1e-9, p); }), ErrorKind::Data);
  EXPECT_EQ(error_kind_of([&] { inverse_transform(NAN, p); }), ErrorKind::Data);
}

TEST(Normalization, InverseEndpoints) {
  const NormalizationParams p{true, 0.3, 2.9};
  EXPECT_NEAR(inverse_transform(0.0, p), std::exp(0.3) - 1.0, 1e-15);
  EXPECT_NEAR(inverse_transform(1.0, p), std::exp(2.9) - 1.0, 1e-13);
}

TEST(Normalization, RoundTrip) {
  const NormalizationParams p = fit_normalization(values({0.0, 20.0}));
  for (double v : {0.01, 1.0, 19.9}) {
    EXPECT_NEAR(inverse_transform(transform(v, p), p), v, 1e-9 * v) << v;
  }
}

TEST(Normalization, Monotone) {
  const NormalizationParams p = fit_normalization(values({0.2, 7.0}));
  Rng rng(8);
  for (int n = 0; n < 1000; ++n) {
    const double a = rng.uniform(0.0, 10.0);
    const double b = rng.uniform(0.0, 10.0);
    if (a <= b) EXPECT_LE(transform(a, p), transform(b, p));
    else EXPECT_GE(transform(a, p), transform(b, p));
  }
}

}  // namespace
}  // namespace msntucf
