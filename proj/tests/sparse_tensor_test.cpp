#include "msntucf/sparse_tensor.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <tuple>

#include <gtest/gtest.h>

#include "msntucf/error.hpp"
#include "msntucf/rng.hpp"
#include "test_errors.hpp"

namespace msntucf {
namespace {

namespace fs = std::filesystem;
using testing::error_kind_of;

class TempFile {
 public:
  explicit TempFile(const std::string& contents) {
    path_ = fs::temp_directory_path() /
            ("msntucf_sparse_" + std::to_string(counter_++) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name() + ".txt");
    std::ofstream(path_) << contents;
  }
  ~TempFile() { fs::remove(path_); }
  const fs::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

using Triple = std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>;

std::multiset<Triple> triples(const SparseTensor& t) {
  std::multiset<Triple> out;
  for (const Entry& e : t.entries()) out.insert({e.i, e.j, e.k});
  return out;
}

SparseTensor random_tensor(TensorShape shape, std::size_t n, std::uint64_t seed) {
  std::vector<Entry> cells;
  for (std::uint32_t i = 0; i < shape.users; ++i) {
    for (std::uint32_t j = 0; j < shape.services; ++j) {
      for (std::uint32_t k = 0; k < shape.time_slices; ++k) cells.push_back({i, j, k, 0.0});
    }
  }
  Rng rng(seed);
  shuffle(std::span<Entry>(cells), rng);
  cells.resize(n);
  for (Entry& e : cells) e.value = rng.uniform(0.0, 20.0);
  return SparseTensor(shape, cells);
}

TEST(SparseTensor, SkipsNegativeSentinel) {
  TempFile f("0 0 0 1.5\n0 1 0 -1\n1 0 0 2.0\n");
  const SparseTensor t = load_wsdream(f.path(), {2, 2, 1});
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.entries()[0], (Entry{0, 0, 0, 1.5}));
  EXPECT_EQ(t.entries()[1], (Entry{1, 0, 0, 2.0}));
  EXPECT_DOUBLE_EQ(density(t), 0.5);
}

TEST(SparseTensor, EmptyFile) {
  TempFile f("");
  const SparseTensor t = load_wsdream(f.path(), {3, 3, 3});
  EXPECT_TRUE(t.empty());
  EXPECT_EQ(density(t), 0.0);
}

TEST(SparseTensor, CommentsBlankLinesAndZeroValues) {
  TempFile f("# user service time value\n\n0 0 0 0\n  1 1 0 3.25  \n");
  const SparseTensor t = load_wsdream(f.path(), {2, 2, 1});
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.entries()[0].value, 0.0);
}

TEST(SparseTensor, OneBasedIndices) {
  TempFile f("1 1 1 0.5\n2 2 1 0.25\n");
  const SparseTensor t = load_wsdream(f.path(), {2, 2, 1}, {.index_base = 1});
  EXPECT_EQ(t.entries()[1], (Entry{1, 1, 0, 0.25}));
  EXPECT_EQ(error_kind_of([&] { load_wsdream(f.path(), {2, 2, 1}, {.index_base = 2}); }), ErrorKind::Config);
}

TEST(SparseTensor, MalformedLinesReportLineNumber) {
  for (const std::string bad : {"0 0 0\n", "0 0 x 1.0\n", "0 0 0 1.0 7\n", "0 0 0 abc\n"}) {
    TempFile f("0 1 0 1.0\n" + bad);
    try {
      load_wsdream(f.path(), {2, 2, 1});
      ADD_FAILURE() << "accepted: " << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Data);
      EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
    }
  }
}

TEST(SparseTensor, OutOfBoundsAndDuplicates) {
  TempFile oob("0 0 0 1.0\n2 0 0 1.0\n");
  EXPECT_EQ(error_kind_of([&] { load_wsdream(oob.path(), {2, 2, 1}); }), ErrorKind::Data);
  TempFile dup("0 0 0 1.0\n0 0 0 2.0\n");
  EXPECT_EQ(error_kind_of([&] { load_wsdream(dup.path(), {2, 2, 1}); }), ErrorKind::Data);
  EXPECT_EQ(error_kind_of([] { load_wsdream("/nonexistent/file.txt", {1, 1, 1}); }), ErrorKind::Data);
}

TEST(SparseTensor, ConstructorValidates) {
  EXPECT_EQ(error_kind_of([] { SparseTensor({0, 1, 1}, {}); }), ErrorKind::Config);
  EXPECT_EQ(error_kind_of([] { SparseTensor({1, 1, 1}, {{0, 0, 0, -0.5}}); }), ErrorKind::Data);
  EXPECT_EQ(error_kind_of([] { SparseTensor({1, 1, 1}, {{0, 0, 0, NAN}}); }), ErrorKind::Data);
  EXPECT_EQ(error_kind_of([] { SparseTensor({1, 1, 1}, {{0, 0, 1, 1.0}}); }), ErrorKind::Data);
}

TEST(SparseTensor, LoadIsIdempotentAndSaveRoundTrips) {
  const SparseTensor t = random_tensor({5, 4, 3}, 30, 9);
  const fs::path path = fs::temp_directory_path() / "msntucf_sparse_roundtrip.txt";
  save_entries(path, t);
  const SparseTensor a = load_wsdream(path, t.shape());
  const SparseTensor b = load_wsdream(path, t.shape());
  fs::remove(path);
  EXPECT_EQ(a.entries(), b.entries());
  EXPECT_EQ(a.entries(), t.entries());
}

TEST(SplitCounts, FullScaleArithmetic) {
  // floor(0.05 * 30287611) = floor(1514380.55)
  const SplitCounts c = split_counts(30'287'611, {0.05, 0.15, 0.80});
  EXPECT_EQ(c.train, 1'514'380u);
  EXPECT_EQ(c.valid, 4'543'141u);
  EXPECT_EQ(c.test, 24'230'090u);
}

TEST(SplitCounts, RejectsBadRatios) {
  EXPECT_EQ(error_kind_of([] { split_counts(10, {0.5, 0.5, 0.5}); }), ErrorKind::Config);
  EXPECT_EQ(error_kind_of([] { split_counts(10, {1.2, -0.2, 0.0}); }), ErrorKind::Config);
  EXPECT_NO_THROW(split_counts(10, {0.7, 0.2, 0.1 + 1e-10}));
}

TEST(Split, DegenerateAllTrain) {
  const SparseTensor t = random_tensor({4, 4, 4}, 20, 3);
  const DataSplit s = split(t, {1.0, 0.0, 0.0}, 5);
  EXPECT_EQ(s.train.size(), 20u);
  EXPECT_TRUE(s.valid.empty());
  EXPECT_TRUE(s.test.empty());
  EXPECT_EQ(triples(s.train), triples(t));
}

TEST(Split, Deterministic) {
  const SparseTensor t = random_tensor({6, 5, 4}, 80, 4);
  const DataSplit a = split(t, {0.5, 0.2, 0.3}, 11);
  const DataSplit b = split(t, {0.5, 0.2, 0.3}, 11);
  EXPECT_EQ(a.train.entries(), b.train.entries());
  EXPECT_EQ(a.valid.entries(), b.valid.entries());
  EXPECT_EQ(a.test.entries(), b.test.entries());
  const DataSplit c = split(t, {0.5, 0.2, 0.3}, 12);
  EXPECT_NE(a.train.entries(), c.train.entries());
}

TEST(Split, PartitionProperty) {
  Rng gen(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const TensorShape shape{1 + gen.below(6), 1 + gen.below(6), 1 + gen.below(6)};
    const std::size_t n = gen.below(shape.volume() + 1);
    const SparseTensor t = random_tensor(shape, n, gen.next_u64());
    const double a = gen.uniform();
    const double b = gen.uniform() * (1.0 - a);
    const SplitRatios ratios{a, b, 1.0 - a - b};
    const DataSplit s = split(t, ratios, gen.next_u64());

    EXPECT_EQ(s.train.size() + s.valid.size() + s.test.size(), n);
    EXPECT_EQ(s.train.size(), split_counts(n, ratios).train);
    EXPECT_EQ(s.valid.size(), split_counts(n, ratios).valid);
    std::multiset<Triple> all = triples(s.train);
    for (const SparseTensor* part : {&s.valid, &s.test}) {
      const auto ts = triples(*part);
      all.insert(ts.begin(), ts.end());
      EXPECT_EQ(part->shape(), shape);
    }
    // Union equals the source and, being a multiset comparison, rules out overlap.
    EXPECT_EQ(all, triples(t));
  }
}

TEST(Density, Examples) {
  const SparseTensor full = random_tensor({3, 4, 5}, 60, 1);
  EXPECT_EQ(density(full), 1.0);
  EXPECT_EQ(density(SparseTensor({3, 4, 5}, {})), 0.0);
}

TEST(Density, FullScaleTrainSplitArithmetic) {
  // 2% of the 30,287,611 QoS-RT records over 142 * 4500 * 64 cells.
  const TensorShape shape{142, 4500, 64};
  const std::size_t n_train = split_counts(30'287'611, {0.02, 0.06, 0.92}).train;
  EXPECT_EQ(n_train, 605'752u);
  const std::size_t n_cells = 543'508;
  std::vector<Entry> entries;
  entries.reserve(n_cells);
  for (std::size_t n = 0; n < n_cells; ++n) {
    entries.push_back({static_cast<std::uint32_t>(n / (4500 * 64)),
                       static_cast<std::uint32_t>((n / 64) % 4500), static_cast<std::uint32_t>(n % 64), 1.0});
  }
  // A tensor holding the published train density.
  EXPECT_NEAR(density(SparseTensor(shape, std::move(entries))), 0.01329, 1e-7);
  EXPECT_NEAR(static_cast<double>(n_train) / static_cast<double>(shape.volume()), 0.014812, 1e-6);
}

}  // namespace
}  // namespace msntucf
