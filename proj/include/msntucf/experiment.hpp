#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "msntucf/metrics.hpp"
#include "msntucf/model.hpp"
#include "msntucf/sparse_tensor.hpp"
#include "msntucf/synthetic.hpp"
#include "msntucf/training.hpp"

namespace msntucf {

/// Everything needed to reproduce one training run. Settings use the same
/// keys in config files, on the command line (as --key) and in reports.
struct RunConfig {
  std::filesystem::path data;
  TensorShape shape;
  std::size_t index_base = 0;
  SplitRatios ratios{0.05, 0.15, 0.80};
  /// Seeds model initialization, batch order and dropout.
  std::uint64_t seed = 1;
  /// Seeds the train/valid/test partition; defaults to `seed`.
  std::optional<std::uint64_t> split_seed;
  ModelKind model = ModelKind::Msntucf;
  ModelConfig model_config;
  TrainConfig train_config;
  std::filesystem::path out_dir;

  std::uint64_t effective_split_seed() const { return split_seed.value_or(seed); }

  /// Checks every module invariant; runs before any data is touched.
  void validate() const;
};

/// Applies one `key=value` setting. Unknown keys and malformed values are
/// config errors.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Reads a flat `key = value` file ('#' comments) into a settings map.
std::vector<std::pair<std::string, std::string>> read_settings_file(const std::filesystem::path& path);

/// Settings that reproduce `config` when applied to a default RunConfig.
std::vector<std::pair<std::string, std::string>> config_settings(const RunConfig& config);

struct RunReport {
  RunConfig config;
  NormalizationParams norm;
  TrainTrace trace;
  MetricsReport test;
  MetricsReport baseline;
  std::size_t n_train = 0;
  std::size_t n_valid = 0;
  std::size_t n_test = 0;
  double train_density = 0.0;
  double wall_seconds = 0.0;
  std::size_t repetition = 0;
};

/// Key-value serialization of a report (config echo first).
std::string format_report(const RunReport& report);
void write_report(const std::filesystem::path& path, const RunReport& report);
/// Parses a report written by write_report back into key/value pairs.
std::map<std::string, std::string> read_report(const std::filesystem::path& path);

/// Load, split, fit normalization, train, evaluate the best checkpoint on the
/// test split. When config.out_dir is set, writes report.txt, trace.csv,
/// timing.csv and checkpoint.txt there.
RunReport cmd_train(const RunConfig& config);

/// Same as cmd_train on an in-memory tensor (config.data is ignored).
RunReport run_training(const RunConfig& config, const SparseTensor& data, std::size_t repetition = 0);

enum class EvalSubset { Train, Valid, Test, All };
EvalSubset parse_eval_subset(const std::string& text);

struct EvalRequest {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  /// When set, must match the checkpoint's shape.
  std::optional<TensorShape> shape;
  std::size_t index_base = 0;
  SplitRatios ratios{0.05, 0.15, 0.80};
  std::uint64_t split_seed = 1;
  EvalSubset subset = EvalSubset::Test;
  /// Evaluation never uses dropout; a positive value is rejected.
  double dropout = 0.0;
};

MetricsReport cmd_eval(const EvalRequest& request);

enum class SweepAxis { Heads, Loops };
SweepAxis parse_sweep_axis(const std::string& text);
const char* to_string(SweepAxis axis);

struct SweepRow {
  std::size_t value = 0;
  std::size_t runs = 0;
  double mae_mean = 0.0, mae_std = 0.0;
  double mre_mean = 0.0, mre_std = 0.0;
  double rmse_mean = 0.0, rmse_std = 0.0;
  std::vector<RunReport> reports;
};

struct SweepReport {
  SweepAxis axis = SweepAxis::Heads;
  std::vector<SweepRow> rows;
};

/// Trains `repetitions` runs per axis value with seeds seed + r and a fixed
/// split. Every value is validated before training starts. Writes sweep.csv
/// (and per-run reports in subdirectories) when base.out_dir is set.
SweepReport cmd_sweep(const RunConfig& base, SweepAxis axis, const std::vector<std::size_t>& values,
                      std::size_t repetitions);

/// Same sweep on an in-memory tensor.
SweepReport run_sweep(const RunConfig& base, const SparseTensor& data, SweepAxis axis,
                      const std::vector<std::size_t>& values, std::size_t repetitions);

void write_sweep_csv(const std::filesystem::path& path, const SweepReport& report);

struct SyntheticReport {
  SyntheticSpec spec;
  MetricsReport baseline;
  std::vector<RunReport> runs;  // one per requested model, identical splits
};

/// Generates a Tucker tensor, then trains each requested model kind on the
/// same split. `base.model` is ignored. Writes data.txt, synthetic.csv and
/// per-model reports when base.out_dir is set.
SyntheticReport cmd_synthetic(const SyntheticSpec& spec, const RunConfig& base,
                              const std::vector<ModelKind>& models);

}  // namespace msntucf
