#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "msntucf/autodiff.hpp"
#include "msntucf/preprocess.hpp"
#include "msntucf/sparse_tensor.hpp"

namespace msntucf {

enum class ModelKind { Msntucf, Neutucf };

const char* to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

const char* to_string(SoftmaxAxis axis);
SoftmaxAxis parse_softmax_axis(const std::string& text);

/// Architecture hyperparameters shared by both models. NeuTucF reads only the
/// ranks and the seed.
struct ModelConfig {
  std::size_t rank_p = 5;
  std::size_t rank_q = 5;
  std::size_t rank_r = 5;
  std::size_t heads = 25;
  std::size_t loops = 4;
  double dropout = 0.0;
  std::uint64_t seed = 1;

  SoftmaxAxis softmax_axis = SoftmaxAxis::Rows;
  /// Apply dropout to the scaled scores before the softmax instead of after.
  bool dropout_before_softmax = false;
  /// One attention block reused for all loops.
  bool share_loop_weights = false;
  /// Head l projects only from its own contiguous chunk of the input.
  bool chunked_heads = false;
  double layer_norm_eps = 1e-5;

  std::size_t d_model() const { return rank_p * rank_q * rank_r; }
  std::size_t d_k() const { return heads == 0 ? 0 : d_model() / heads; }

  /// Throws a config error naming the valid head counts when L does not
  /// divide d_model.
  void validate() const;
};

/// Positive divisors of n in increasing order.
std::vector<std::size_t> divisors(std::size_t n);

struct HeadParams {
  Parameter query;
  Parameter key;
  Parameter value;
};

struct AttentionBlockParams {
  std::vector<HeadParams> heads;
  Parameter fusion_weight;  // (d_model, d_model)
  Parameter fusion_bias;    // (d_model)
  Parameter norm_gain;
  Parameter norm_bias;
};

struct MsntucfParams {
  Parameter user_embedding;     // (I, P)
  Parameter service_embedding;  // (J, Q)
  Parameter time_embedding;     // (K, R)
  std::vector<AttentionBlockParams> blocks;  // N entries, or 1 when shared
  Parameter output_weight;      // (1, d_model)

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
};

struct NeutucfParams {
  Parameter user_embedding;
  Parameter service_embedding;
  Parameter time_embedding;
  Parameter core;  // (P, Q, R)

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
};

/// Optional sink for intermediate attention values, used by tests and
/// diagnostics.
struct AttentionTrace {
  std::vector<Var> scores;  // one (d_k, d_k) matrix per head per loop
};

/// One multi-head self-attending block: per-head Q/K/V maps without bias,
/// softmax(q k^T / sqrt(d_k)) v per head, a biased fusion linear over the
/// concatenated heads, then layer_norm(e_prev + r).
Var attention_block(Var e_prev, AttentionBlockParams& block, const ModelConfig& config,
                    bool training, Rng& rng, AttentionTrace* trace = nullptr);

/// Flattened interaction vector vec(a_i o b_j o c_k).
Var interaction(Tape& tape, Parameter& users, Parameter& services, Parameter& times,
                const Entry& index);

/// sigmoid(W_out . e_N) with e_0 the flattened interaction vector.
Var msntucf_forward(Tape& tape, MsntucfParams& params, const ModelConfig& config,
                    const Entry& index, bool training, Rng& rng,
                    AttentionTrace* trace = nullptr);

/// sigmoid(sum_pqr g_pqr a_ip b_jq c_kr)
Var neutucf_forward(Tape& tape, NeutucfParams& params, const Entry& index);

/// Contiguous range of the interaction vector associated with one head, and
/// what that range is in the (P, Q, R) interaction tensor.
struct HeadSpan {
  std::size_t head = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string description;
};

std::vector<HeadSpan> head_partition_map(const ModelConfig& config);

MsntucfParams init_msntucf(const ModelConfig& config, const TensorShape& shape, std::uint64_t seed);
NeutucfParams init_neutucf(const ModelConfig& config, const TensorShape& shape, std::uint64_t seed);

/// Common interface over the two model kinds for the training loop.
class Model {
 public:
  virtual ~Model() = default;

  virtual ModelKind kind() const = 0;
  virtual Var forward(Tape& tape, const Entry& index, bool training, Rng& rng) = 0;
  virtual std::vector<Parameter*> parameters() = 0;
  virtual std::vector<const Parameter*> parameters() const = 0;

  const ModelConfig& config() const { return config_; }
  const TensorShape& shape() const { return shape_; }

  /// Evaluation-mode prediction in (0, 1); no gradient bookkeeping.
  double predict(const Entry& index);

  std::vector<DenseTensor> snapshot() const;
  void restore(const std::vector<DenseTensor>& values);
  void zero_grad();

 protected:
  Model(ModelConfig config, TensorShape shape) : config_(config), shape_(shape) {}

 private:
  ModelConfig config_;
  TensorShape shape_;
};

class MsntucfModel final : public Model {
 public:
  MsntucfModel(const ModelConfig& config, const TensorShape& shape);

  ModelKind kind() const override { return ModelKind::Msntucf; }
  Var forward(Tape& tape, const Entry& index, bool training, Rng& rng) override;
  std::vector<Parameter*> parameters() override { return params_.all(); }
  std::vector<const Parameter*> parameters() const override { return params_.all(); }

  MsntucfParams& params() { return params_; }

 private:
  MsntucfParams params_;
};

class NeutucfModel final : public Model {
 public:
  NeutucfModel(const ModelConfig& config, const TensorShape& shape);

  ModelKind kind() const override { return ModelKind::Neutucf; }
  Var forward(Tape& tape, const Entry& index, bool training, Rng& rng) override;
  std::vector<Parameter*> parameters() override { return params_.all(); }
  std::vector<const Parameter*> parameters() const override { return params_.all(); }

  NeutucfParams& params() { return params_; }

 private:
  NeutucfParams params_;
};

std::unique_ptr<Model> make_model(ModelKind kind, const ModelConfig& config, const TensorShape& shape);

/// Text checkpoint: config header followed by every named parameter array in
/// hex-float notation, so a reload reproduces predictions bit for bit.
void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const NormalizationParams& norm);

struct Checkpoint {
  std::unique_ptr<Model> model;
  NormalizationParams norm;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace msntucf
