#include <gtest/gtest.h>

#include <cmath>

#include "msntucf/autodiff.hpp"
#include "msntucf/error.hpp"
#include "test_support.hpp"

using namespace msntucf;
using namespace msntucf::testing;

namespace {

constexpr double kGradTol = 1e-6;

}  // namespace

TEST(EmbeddingLookup, ReturnsRow) {
  Parameter table("t", DenseTensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  Tape tape;
  const Var row = embedding_lookup(tape, table, 1);
  EXPECT_EQ(row.value(), DenseTensor::vector({0, 1, 0}));
}

TEST(EmbeddingLookup, ScattersIntoSingleRow) {
  Rng rng(3);
  Parameter table("t", random_tensor({4, 3}, rng));
  Tape tape;
  tape.backward(sum(embedding_lookup(tape, table, 2)));
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(table.grad.at(r, c), r == 2 ? 1.0 : 0.0);
}

TEST(EmbeddingLookup, OutOfRangeThrows) {
  Parameter table("t", DenseTensor({2, 2}));
  Tape tape;
  EXPECT_THROW(embedding_lookup(tape, table, 2), Error);
}

TEST(EmbeddingLookup, MatchesFiniteDifferences) {
  Rng rng(11);
  Parameter table("t", random_tensor({4, 3}, rng));
  const DenseTensor w = random_tensor({3}, rng);
  const ScalarGraph g = [&](Tape& t) {
    return weighted_sum(sigmoid(embedding_lookup(t, table, 3)), w);
  };
  EXPECT_LT(gradient_check(g, {&table}), kGradTol);
}

TEST(Outer3, BasisVectors) {
  Tape tape;
  const Var out = outer3(tape.constant(DenseTensor::vector({1, 0})), tape.constant(DenseTensor::vector({0, 1})),
                         tape.constant(DenseTensor::vector({1, 0})));
  ASSERT_EQ(out.shape(), (Shape{2, 2, 2}));
  for (std::size_t p = 0; p < 2; ++p)
    for (std::size_t q = 0; q < 2; ++q)
      for (std::size_t r = 0; r < 2; ++r)
        EXPECT_EQ(out.value().at(p, q, r), (p == 0 && q == 1 && r == 0) ? 1.0 : 0.0);
}

TEST(Outer3, ZeroVectorGivesZeroTensor) {
  Rng rng(1);
  Tape tape;
  const Var out = outer3(tape.constant(random_tensor({3}, rng)), tape.constant(DenseTensor({2})),
                         tape.constant(random_tensor({4}, rng)));
  for (double v : out.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(Outer3, MatchesTripleLoop) {
  Rng rng(5);
  const DenseTensor a = random_tensor({3}, rng), b = random_tensor({2}, rng), c = random_tensor({4}, rng);
  Tape tape;
  const DenseTensor& out = outer3(tape.constant(a), tape.constant(b), tape.constant(c)).value();
  for (std::size_t p = 0; p < 3; ++p)
    for (std::size_t q = 0; q < 2; ++q)
      for (std::size_t r = 0; r < 4; ++r) EXPECT_NEAR(out.at(p, q, r), a[p] * b[q] * c[r], 1e-12);
}

TEST(Outer3, RejectsMatrixInput) {
  Tape tape;
  EXPECT_THROW(outer3(tape.constant(DenseTensor({2, 2})), tape.constant(DenseTensor({2})),
                      tape.constant(DenseTensor({2}))),
               Error);
}

TEST(Outer3, MatchesFiniteDifferences) {
  Rng rng(8);
  Parameter a("a", random_tensor({3}, rng)), b("b", random_tensor({2}, rng)), c("c", random_tensor({4}, rng));
  const DenseTensor w = random_tensor({24}, rng);
  const ScalarGraph g = [&](Tape& t) {
    return weighted_sum(outer3(t.parameter(a), t.parameter(b), t.parameter(c)), w);
  };
  EXPECT_LT(gradient_check(g, {&a, &b, &c}), kGradTol);
}

TEST(Flatten, RowMajorOrder) {
  DenseTensor t({2, 2, 2});
  for (std::size_t p = 0; p < 2; ++p)
    for (std::size_t q = 0; q < 2; ++q)
      for (std::size_t r = 0; r < 2; ++r) t.at(p, q, r) = static_cast<double>(4 * p + 2 * q + r);
  Tape tape;
  const Var flat = flatten(tape.constant(t));
  EXPECT_EQ(flat.value(), DenseTensor::vector({0, 1, 2, 3, 4, 5, 6, 7}));
  EXPECT_EQ(reshape(flat, {2, 2, 2}).value(), t);
}

TEST(Flatten, SliceOccupiesContiguousBlock) {
  DenseTensor t({5, 5, 5});
  for (std::size_t n = 0; n < t.size(); ++n) t[n] = static_cast<double>(n);
  Tape tape;
  const DenseTensor& flat = flatten(tape.constant(t)).value();
  for (std::size_t p = 0; p < 5; ++p)
    for (std::size_t q = 0; q < 5; ++q)
      for (std::size_t r = 0; r < 5; ++r) EXPECT_EQ(flat[25 * p + 5 * q + r], t.at(p, q, r));
}

TEST(LinearNoBias, IdentityAndZero) {
  Rng rng(2);
  const DenseTensor x = random_tensor({4}, rng);
  DenseTensor eye({4, 4});
  for (std::size_t n = 0; n < 4; ++n) eye.at(n, n) = 1.0;
  Tape tape;
  EXPECT_EQ(linear_nobias(tape.constant(eye), tape.constant(x)).value(), x);
  EXPECT_EQ(linear_nobias(tape.constant(DenseTensor({3, 4})), tape.constant(x)).value(), DenseTensor({3}));
}

TEST(LinearNoBias, ShapeMismatchThrows) {
  Tape tape;
  EXPECT_THROW(linear_nobias(tape.constant(DenseTensor({3, 4})), tape.constant(DenseTensor({5}))), Error);
}

TEST(LinearNoBias, MatchesFiniteDifferences) {
  Rng rng(21);
  Parameter w("w", random_tensor({5, 7}, rng)), x("x", random_tensor({7}, rng));
  const DenseTensor u = random_tensor({5}, rng);
  const ScalarGraph g = [&](Tape& t) { return weighted_sum(linear_nobias(t.parameter(w), t.parameter(x)), u); };
  EXPECT_LT(gradient_check(g, {&w, &x}), kGradTol);
}

TEST(Outer2, OnesAndBasis) {
  Tape tape;
  const Var ones = tape.constant(DenseTensor({3}, 1.0));
  EXPECT_EQ(outer2(ones, ones).value(), DenseTensor({3, 3}, 1.0));
  const Var out = outer2(tape.constant(DenseTensor::vector({1, 0})), tape.constant(DenseTensor::vector({0, 1})));
  EXPECT_EQ(out.value(), DenseTensor({2, 2}, {0, 1, 0, 0}));
}

TEST(Outer2, LengthMismatchThrows) {
  Tape tape;
  EXPECT_THROW(outer2(tape.constant(DenseTensor({3})), tape.constant(DenseTensor({4}))), Error);
}

TEST(Outer2, MatchesFiniteDifferences) {
  Rng rng(4);
  Parameter a("a", random_tensor({4}, rng)), b("b", random_tensor({4}, rng));
  const DenseTensor w = random_tensor({16}, rng);
  const ScalarGraph g = [&](Tape& t) { return weighted_sum(outer2(t.parameter(a), t.parameter(b)), w); };
  EXPECT_LT(gradient_check(g, {&a, &b}), kGradTol);
}

TEST(Softmax, ConstantRowIsUniform) {
  Tape tape;
  const Var s = softmax_rows(tape.constant(DenseTensor({1, 3}, 2.5)));
  for (double v : s.value().data()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
  Tape tape;
  const Var s = softmax_rows(tape.constant(DenseTensor({1, 2}, {1000.0, 0.0})));
  EXPECT_NEAR(s.value()[0], 1.0, 1e-15);
  EXPECT_NEAR(s.value()[1], 0.0, 1e-15);
  EXPECT_TRUE(s.value().all_finite());
}

TEST(Softmax, RowsSumToOne) {
  Rng rng(9);
  Tape tape;
  const DenseTensor& s = softmax_rows(tape.constant(random_tensor({6, 6}, rng, -5, 5))).value();
  for (std::size_t r = 0; r < 6; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < 6; ++c) {
      total += s.at(r, c);
      EXPECT_GT(s.at(r, c), 0.0);
      EXPECT_LT(s.at(r, c), 1.0);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Softmax, ColumnAndGlobalAxes) {
  Rng rng(10);
  Tape tape;
  const Var m = tape.constant(random_tensor({4, 4}, rng, -3, 3));
  const DenseTensor& cols = softmax(m, SoftmaxAxis::Columns).value();
  for (std::size_t c = 0; c < 4; ++c) {
    double total = 0.0;
    for (std::size_t r = 0; r < 4; ++r) total += cols.at(r, c);
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
  double total = 0.0;
  for (double v : softmax(m, SoftmaxAxis::Global).value().data()) total += v;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Softmax, MatchesFiniteDifferencesOnEveryAxis) {
  for (SoftmaxAxis axis : {SoftmaxAxis::Rows, SoftmaxAxis::Columns, SoftmaxAxis::Global}) {
    Rng rng(12);
    Parameter m("m", random_tensor({5, 5}, rng, -2, 2));
    const DenseTensor w = random_tensor({25}, rng);
    const ScalarGraph g = [&](Tape& t) { return weighted_sum(softmax(t.parameter(m), axis), w); };
    EXPECT_LT(gradient_check(g, {&m}), kGradTol) << "axis " << static_cast<int>(axis);
  }
}

TEST(LayerNorm, ConstantInputGivesZeros) {
  Tape tape;
  const Var x = tape.constant(DenseTensor({4}, 3.0));
  const Var out = layer_norm(x, tape.constant(DenseTensor({4}, 1.0)), tape.constant(DenseTensor({4})), 1e-5);
  for (double v : out.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, UnitGainOutputIsStandardized) {
  Rng rng(13);
  Tape tape;
  // Output variance is var / (var + eps), so inputs need variance well above
  // 10 for a 1e-6 match.
  const DenseTensor& y = layer_norm(tape.constant(random_tensor({8}, rng, -10, 10)), tape.constant(DenseTensor({8}, 1.0)),
                                    tape.constant(DenseTensor({8})), 1e-5)
                             .value();
  double mean = 0.0, var = 0.0;
  for (double v : y.data()) mean += v;
  mean /= 8.0;
  for (double v : y.data()) var += (v - mean) * (v - mean);
  var /= 8.0;
  EXPECT_NEAR(mean, 0.0, 1e-12);
  EXPECT_NEAR(var, 1.0, 1e-6);
}

TEST(LayerNorm, MatchesFiniteDifferences) {
  Rng rng(14);
  Parameter x("x", random_tensor({5}, rng)), gain("g", random_tensor({5}, rng, 0.5, 1.5)),
      bias("b", random_tensor({5}, rng));
  const DenseTensor w = random_tensor({5}, rng);
  const ScalarGraph g = [&](Tape& t) {
    return weighted_sum(layer_norm(t.parameter(x), t.parameter(gain), t.parameter(bias), 1e-5), w);
  };
  EXPECT_LT(gradient_check(g, {&x, &gain, &bias}), 1e-5);
}

TEST(Sigmoid, ValuesAndSymmetry) {
  Rng rng(15);
  Tape tape;
  EXPECT_EQ(sigmoid(tape.constant(DenseTensor::scalar(0.0))).value()[0], 0.5);
  const DenseTensor x = random_tensor({50}, rng, -30, 30);
  DenseTensor neg = x;
  for (double& v : neg.data()) v = -v;
  const DenseTensor& s = sigmoid(tape.constant(x)).value();
  const DenseTensor& sn = sigmoid(tape.constant(neg)).value();
  for (std::size_t n = 0; n < x.size(); ++n) EXPECT_NEAR(sn[n], 1.0 - s[n], 1e-15);
}

TEST(Sigmoid, MatchesFiniteDifferences) {
  Rng rng(16);
  Parameter x("x", random_tensor({6}, rng, -3, 3));
  const DenseTensor w = random_tensor({6}, rng);
  const ScalarGraph g = [&](Tape& t) { return weighted_sum(sigmoid(t.parameter(x)), w); };
  EXPECT_LT(gradient_check(g, {&x}), 1e-8);
}

TEST(Dropout, ZeroRateAndEvaluationAreIdentity) {
  Rng data(17), rng(1);
  const DenseTensor x = random_tensor({100}, data);
  Tape tape;
  const Var v = tape.constant(x);
  EXPECT_EQ(dropout(v, 0.0, true, rng).value(), x);
  EXPECT_EQ(dropout(v, 0.0, false, rng).value(), x);
  EXPECT_EQ(dropout(v, 0.7, false, rng).value(), x);
  EXPECT_EQ(rng.draws(), 0u);
}

TEST(Dropout, InvalidRateThrows) {
  Rng rng(1);
  Tape tape;
  const Var v = tape.constant(DenseTensor({3}, 1.0));
  EXPECT_THROW(dropout(v, 1.0, true, rng), Error);
  EXPECT_THROW(dropout(v, -0.1, false, rng), Error);
}

TEST(Dropout, MonteCarloRateAndMean) {
  Rng data(18), rng(19);
  const DenseTensor x = random_tensor({100000}, data, 0.5, 1.5);
  Tape tape;
  const DenseTensor& y = dropout(tape.constant(x), 0.3, true, rng).value();
  std::size_t zeros = 0;
  double in_mean = 0.0, out_mean = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    zeros += y[n] == 0.0;
    in_mean += x[n];
    out_mean += y[n];
  }
  EXPECT_NEAR(static_cast<double>(zeros) / 1e5, 0.3, 0.01);
  EXPECT_NEAR(out_mean / in_mean, 1.0, 0.02);
}

TEST(Dropout, BackwardUsesSavedMask) {
  Rng rng(20);
  Parameter x("x", DenseTensor({1000}, 1.0));
  Tape tape;
  const Var y = dropout(tape.parameter(x), 0.5, true, rng);
  tape.backward(sum(y));
  for (std::size_t n = 0; n < 1000; ++n) EXPECT_EQ(x.grad[n], y.value()[n]);
}

TEST(Backward, SumGivesOnes) {
  Rng rng(22);
  Parameter x("x", random_tensor({7}, rng));
  Tape tape;
  tape.backward(sum(tape.parameter(x)));
  EXPECT_EQ(x.grad, DenseTensor({7}, 1.0));
}

TEST(Backward, FanOutAccumulates) {
  Parameter x("x", DenseTensor::vector({1.5}));
  Tape tape;
  const Var v = tape.parameter(x);
  tape.backward(sum(add(v, v)));
  EXPECT_EQ(x.grad[0], 2.0);
}

TEST(Backward, CompositeSigmoidOfLinear) {
  Rng rng(23);
  Parameter w("w", random_tensor({4, 6}, rng)), x("x", random_tensor({6}, rng));
  const ScalarGraph g = [&](Tape& t) { return sum(sigmoid(linear_nobias(t.parameter(w), t.parameter(x)))); };
  EXPECT_LT(gradient_check(g, {&w, &x}), kGradTol);
}

TEST(Backward, NonScalarThrows) {
  Tape tape;
  const Var v = tape.constant(DenseTensor({3}, 1.0));
  EXPECT_THROW(tape.backward(v), Error);
}

TEST(Backward, RequiresRecording) {
  Parameter x("x", DenseTensor::vector({1.0}));
  Tape tape(false);
  const Var s = sum(tape.parameter(x));
  EXPECT_THROW(tape.backward(s), Error);
}

TEST(Backward, ReplayIsBitIdentical) {
  Rng data(24);
  Parameter w("w", random_tensor({6, 6}, data)), x("x", random_tensor({6}, data));
  auto run = [&] {
    Rng rng(99);
    w.zero_grad();
    x.zero_grad();
    Tape tape;
    const Var h = dropout(softmax_rows(outer2(linear_nobias(tape.parameter(w), tape.parameter(x)), tape.parameter(x))),
                          0.2, true, rng);
    const Var out = sum(matvec(h, tape.parameter(x)));
    tape.backward(out);
    return std::make_tuple(out.value(), w.grad, x.grad);
  };
  EXPECT_EQ(run(), run());
}

TEST(Ops, SliceConcatAndHalfSquaredError) {
  Rng rng(25);
  Parameter x("x", random_tensor({6}, rng));
  const DenseTensor w = random_tensor({6}, rng);
  const ScalarGraph g = [&](Tape& t) {
    const Var v = t.parameter(x);
    const Var parts[] = {slice(v, 3, 3), scale(slice(v, 0, 3), -2.0)};
    return add(half_squared_error(sigmoid(sum(concat(parts))), 0.25), weighted_sum(v, w));
  };
  EXPECT_LT(gradient_check(g, {&x}), kGradTol);

  Tape tape;
  EXPECT_EQ(half_squared_error(tape.constant(DenseTensor::scalar(0.5)), 1.0).value()[0], 0.125);
  EXPECT_THROW(slice(tape.parameter(x), 4, 3), Error);
}
