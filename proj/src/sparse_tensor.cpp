#include "msntucf/sparse_tensor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>

#include "msntucf/error.hpp"
#include "msntucf/rng.hpp"

namespace msntucf {

namespace {

std::uint64_t cell_key(const Entry& e, const TensorShape& s) {
  return (static_cast<std::uint64_t>(e.i) * s.services + e.j) * s.time_slices + e.k;
}

std::string entry_string(const Entry& e) {
  return "(" + std::to_string(e.i) + "," + std::to_string(e.j) + "," + std::to_string(e.k) + ")";
}

}  // namespace

SparseTensor::SparseTensor(TensorShape shape, std::vector<Entry> entries)
    : shape_(shape), entries_(std::move(entries)) {
  if (shape_.users == 0 || shape_.services == 0 || shape_.time_slices == 0) {
    fail(ErrorKind::Config, "tensor shape must be positive in every mode");
  }
  std::vector<std::uint64_t> keys;
  keys.reserve(entries_.size());
  for (const Entry& e : entries_) {
    if (e.i >= shape_.users || e.j >= shape_.services || e.k >= shape_.time_slices) {
      fail(ErrorKind::Data, "entry " + entry_string(e) + " is out of bounds");
    }
    if (!std::isfinite(e.value) || e.value < 0.0) {
      fail(ErrorKind::Data, "entry " + entry_string(e) + " has invalid value");
    }
    keys.push_back(cell_key(e, shape_));
  }
  std::sort(keys.begin(), keys.end());
  const auto dup = std::adjacent_find(keys.begin(), keys.end());
  if (dup != keys.end()) {
    const std::uint64_t key = *dup;
    const std::uint64_t k = key % shape_.time_slices;
    const std::uint64_t j = (key / shape_.time_slices) % shape_.services;
    const std::uint64_t i = key / shape_.time_slices / shape_.services;
    fail(ErrorKind::Data, "duplicate entry (" + std::to_string(i) + "," + std::to_string(j) +
                              "," + std::to_string(k) + ")");
  }
}

double density(const SparseTensor& t) {
  return static_cast<double>(t.size()) / static_cast<double>(t.shape().volume());
}

namespace {

std::string_view next_field(std::string_view& line) {
  const auto start = line.find_first_not_of(" \t\r");
  if (start == std::string_view::npos) {
    line = {};
    return {};
  }
  line.remove_prefix(start);
  const auto end = line.find_first_of(" \t\r");
  std::string_view field = line.substr(0, end);
  line.remove_prefix(end == std::string_view::npos ? line.size() : end);
  return field;
}

[[noreturn]] void parse_error(const std::filesystem::path& path, std::size_t line_no,
                              const std::string& msg) {
  fail(ErrorKind::Data, path.string() + ":" + std::to_string(line_no) + ": " + msg);
}

long long parse_index(std::string_view field, const std::filesystem::path& path, std::size_t line_no) {
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    parse_error(path, line_no, "non-numeric index '" + std::string(field) + "'");
  }
  return value;
}

double parse_value(std::string_view field, const std::filesystem::path& path, std::size_t line_no) {
  // strtod rather than from_chars: libstdc++ 11 lacks floating from_chars on
  // some targets, and strtod accepts hex floats written by save_entries.
  const std::string text(field);
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || text.empty()) {
    parse_error(path, line_no, "non-numeric value '" + text + "'");
  }
  if (!std::isfinite(value)) parse_error(path, line_no, "non-finite value '" + text + "'");
  return value;
}

}  // namespace

SparseTensor load_wsdream(const std::filesystem::path& path, const TensorShape& shape,
                          const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Data, "cannot open data file " + path.string());
  if (options.index_base > 1) fail(ErrorKind::Config, "index base must be 0 or 1");

  std::vector<Entry> entries;
  std::string raw;
  std::size_t line_no = 0;
  const auto base = static_cast<long long>(options.index_base);
  const std::array<std::size_t, 3> dims{shape.users, shape.services, shape.time_slices};
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line(raw);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string_view::npos || line[first] == '#') continue;

    std::array<std::string_view, 4> fields;
    for (auto& f : fields) {
      f = next_field(line);
      if (f.empty()) parse_error(path, line_no, "expected 4 fields");
    }
    if (!next_field(line).empty()) parse_error(path, line_no, "expected 4 fields");

    std::array<std::uint32_t, 3> idx{};
    for (std::size_t m = 0; m < 3; ++m) {
      const long long v = parse_index(fields[m], path, line_no) - base;
      if (v < 0 || static_cast<unsigned long long>(v) >= dims[m]) {
        fail(ErrorKind::Data, path.string() + ":" + std::to_string(line_no) + ": index " +
                                  std::string(fields[m]) + " out of bounds for mode " +
                                  std::to_string(m + 1) + " of size " + std::to_string(dims[m]));
      }
      idx[m] = static_cast<std::uint32_t>(v);
    }
    const double value = parse_value(fields[3], path, line_no);
    if (value < 0.0) continue;
    entries.push_back({idx[0], idx[1], idx[2], value});
  }
  return SparseTensor(shape, std::move(entries));
}

void save_entries(const std::filesystem::path& path, const SparseTensor& t) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Data, "cannot write " + path.string());
  out << "# user service time value (0-based) shape " << t.shape().users << ','
      << t.shape().services << ',' << t.shape().time_slices << '\n';
  out << std::setprecision(17);
  for (const Entry& e : t.entries()) {
    out << e.i << ' ' << e.j << ' ' << e.k << ' ' << e.value << '\n';
  }
  if (!out) fail(ErrorKind::Data, "failed writing " + path.string());
}

SplitCounts split_counts(std::size_t n, const SplitRatios& ratios) {
  const double total = ratios.train + ratios.valid + ratios.test;
  if (ratios.train < 0.0 || ratios.valid < 0.0 || ratios.test < 0.0 || std::abs(total - 1.0) > 1e-9) {
    fail(ErrorKind::Config, "split ratios must be non-negative and sum to 1");
  }
  SplitCounts c;
  c.train = std::min(n, static_cast<std::size_t>(std::floor(ratios.train * static_cast<double>(n))));
  c.valid = std::min(n - c.train,
                     static_cast<std::size_t>(std::floor(ratios.valid * static_cast<double>(n))));
  c.test = n - c.train - c.valid;
  return c;
}

DataSplit split(const SparseTensor& t, const SplitRatios& ratios, std::uint64_t seed) {
  const SplitCounts counts = split_counts(t.size(), ratios);
  std::vector<Entry> shuffled = t.entries();
  Rng rng(seed, 0x5B117);
  shuffle(std::span<Entry>(shuffled), rng);

  const std::size_t n_train = counts.train;
  const std::size_t n_valid = counts.valid;
  const auto begin = shuffled.begin();
  const auto train_end = begin + static_cast<std::ptrdiff_t>(n_train);
  const auto valid_end = train_end + static_cast<std::ptrdiff_t>(n_valid);

  DataSplit out;
  out.train = SparseTensor(t.shape(), std::vector<Entry>(begin, train_end));
  out.valid = SparseTensor(t.shape(), std::vector<Entry>(train_end, valid_end));
  out.test = SparseTensor(t.shape(), std::vector<Entry>(valid_end, shuffled.end()));
  out.seed = seed;
  out.ratios = ratios;
  return out;
}

}  // namespace msntucf
