#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "msntucf/metrics.hpp"
#include "msntucf/model.hpp"
#include "msntucf/preprocess.hpp"
#include "msntucf/sparse_tensor.hpp"

namespace msntucf {

enum class OptimizerKind { Adam, Sgd };

const char* to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& text);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 100;
  /// Epochs without a validation RMSE improvement before stopping.
  std::size_t patience = 10;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Divide batch gradients by the batch size. The default sums, matching the
  /// half squared error summed over observed entries.
  bool mean_reduction = false;
  /// L2 penalty 0.5 * lambda * |theta|^2 on the summed loss, spread over the
  /// batches of an epoch in proportion to their size. Off by default.
  double weight_decay = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct OptimizerState {
  std::uint64_t step = 0;
};

/// Bias-corrected Adam update using the moment slots stored on each
/// Parameter. Gradients are zeroed afterward.
void adam_step(std::span<Parameter* const> params, OptimizerState& state, double lr,
               double beta1, double beta2, double eps);

/// Plain gradient descent; gradients are zeroed afterward.
void sgd_step(std::span<Parameter* const> params, double lr);

/// An observed index with its normalized target in [0, 1].
struct Sample {
  Entry index;
  double target = 0.0;
};

std::vector<Sample> normalize_entries(const SparseTensor& t, const NormalizationParams& norm);

/// 0.5 * sum (y - y_hat)^2 in evaluation mode; no gradients.
double loss(Model& model, std::span<const Sample> batch);

/// Same sum, with gradients of every sample accumulated into the model's
/// Parameter::grad tensors.
double loss_and_backward(Model& model, std::span<const Sample> batch, bool training, Rng& rng);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double val_mae = 0.0;
  double val_mre = 0.0;
  double val_rmse = 0.0;
  double seconds = 0.0;
};

struct TrainTrace {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  /// True when validation fell back to the training entries.
  bool validated_on_train = false;
};

/// Writes epoch,loss,val_mae,val_mre,val_rmse with round-trip precision.
/// Wall time goes to a separate file so the trace itself stays reproducible.
void write_trace_csv(const std::filesystem::path& path, const TrainTrace& trace);
void write_timing_csv(const std::filesystem::path& path, const TrainTrace& trace);

/// Predicts every entry, maps predictions back to the original scale and
/// scores them against the raw values.
MetricsReport evaluate(Model& model, const SparseTensor& entries, const NormalizationParams& norm);

/// Metrics of predicting the mean training value for every test entry.
MetricsReport mean_baseline(const SparseTensor& train, const SparseTensor& test);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch training with early stopping on validation RMSE. On return the
/// model holds the parameters of the best validation epoch.
TrainTrace fit(Model& model, const DataSplit& data, const NormalizationParams& norm,
               const TrainConfig& config, const EpochCallback& on_epoch = {});

struct TrainResult {
  std::unique_ptr<Model> model;
  NormalizationParams norm;
  TrainTrace trace;
};

/// Fits normalization on data.train, builds and trains a fresh model.
TrainResult train_model(ModelKind kind, const DataSplit& data, const ModelConfig& model_config,
                        const TrainConfig& train_config, const EpochCallback& on_epoch = {});

}  // namespace msntucf
