#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace msntucf {

/// Mode sizes of a 3-mode tensor: users x services x time slices.
struct TensorShape {
  std::size_t users = 0;
  std::size_t services = 0;
  std::size_t time_slices = 0;

  std::size_t volume() const { return users * services * time_slices; }
  bool operator==(const TensorShape&) const = default;
};

/// One observed cell, value in original dataset units.
struct Entry {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  std::uint32_t k = 0;
  double value = 0.0;

  bool operator==(const Entry&) const = default;
};

/// Immutable list of observed entries of a 3-mode tensor.
///
/// Construction validates index bounds, value domain and uniqueness of the
/// (i, j, k) triples.
class SparseTensor {
 public:
  SparseTensor() = default;
  SparseTensor(TensorShape shape, std::vector<Entry> entries);

  const TensorShape& shape() const noexcept { return shape_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

 private:
  TensorShape shape_;
  std::vector<Entry> entries_;
};

/// Fraction of cells observed: |entries| / (I * J * K).
double density(const SparseTensor& t);

struct LoadOptions {
  /// Subtracted from every index read from the file (0 or 1).
  std::size_t index_base = 0;
};

/// Reads a whitespace separated `user service time value` file. Lines starting
/// with '#' are comments; negative values mark missing data and are skipped.
SparseTensor load_wsdream(const std::filesystem::path& path, const TensorShape& shape,
                          const LoadOptions& options = {});

/// Writes entries in the format load_wsdream reads (0-based, round-trip exact).
void save_entries(const std::filesystem::path& path, const SparseTensor& t);

struct SplitRatios {
  double train = 0.0;
  double valid = 0.0;
  double test = 0.0;
};

struct DataSplit {
  SparseTensor train;
  SparseTensor valid;
  SparseTensor test;
  std::uint64_t seed = 0;
  SplitRatios ratios;
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t test = 0;
};

/// Partition sizes for n entries: train and valid are floored, test takes
/// the remainder. Throws a config error unless the ratios are non-negative
/// and sum to 1 within 1e-9.
SplitCounts split_counts(std::size_t n, const SplitRatios& ratios);

/// Seeded shuffle, then partition: train gets floor(train * n), valid gets
/// floor(valid * n), test takes the rest.
DataSplit split(const SparseTensor& t, const SplitRatios& ratios, std::uint64_t seed);

}  // namespace msntucf
