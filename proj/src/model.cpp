#include "msntucf/model.hpp"

#include <cmath>
#include <sstream>

#include "msntucf/error.hpp"

namespace msntucf {

const char* to_string(ModelKind kind) {
  return kind == ModelKind::Msntucf ? "msntucf" : "neutucf";
}

ModelKind parse_model_kind(const std::string& text) {
  if (text == "msntucf") return ModelKind::Msntucf;
  if (text == "neutucf") return ModelKind::Neutucf;
  fail(ErrorKind::Config, "unknown model '" + text + "' (expected msntucf or neutucf)");
}

const char* to_string(SoftmaxAxis axis) {
  switch (axis) {
    case SoftmaxAxis::Rows: return "rows";
    case SoftmaxAxis::Columns: return "columns";
    case SoftmaxAxis::Global: return "global";
  }
  return "rows";
}

SoftmaxAxis parse_softmax_axis(const std::string& text) {
  if (text == "rows") return SoftmaxAxis::Rows;
  if (text == "columns") return SoftmaxAxis::Columns;
  if (text == "global") return SoftmaxAxis::Global;
  fail(ErrorKind::Config, "unknown softmax axis '" + text + "' (expected rows, columns or global)");
}

std::vector<std::size_t> divisors(std::size_t n) {
  std::vector<std::size_t> out;
  for (std::size_t d = 1; d <= n; ++d)
    if (n % d == 0) out.push_back(d);
  return out;
}

void ModelConfig::validate() const {
  if (rank_p == 0 || rank_q == 0 || rank_r == 0) fail(ErrorKind::Config, "ranks must be positive");
  if (loops == 0) fail(ErrorKind::Config, "loop count must be at least 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail(ErrorKind::Config, "dropout rate must lie in [0, 1)");
  if (!(layer_norm_eps > 0.0)) fail(ErrorKind::Config, "layer norm eps must be positive");
  if (heads == 0 || d_model() % heads != 0) {
    std::ostringstream msg;
    msg << "head count " << heads << " does not divide d_model = " << d_model() << "; valid head counts:";
    for (std::size_t d : divisors(d_model())) msg << ' ' << d;
    fail(ErrorKind::Config, msg.str());
  }
}

std::vector<Parameter*> MsntucfParams::all() {
  std::vector<Parameter*> out{&user_embedding, &service_embedding, &time_embedding};
  for (auto& block : blocks) {
    for (auto& head : block.heads) {
      out.push_back(&head.query);
      out.push_back(&head.key);
      out.push_back(&head.value);
    }
    out.push_back(&block.fusion_weight);
    out.push_back(&block.fusion_bias);
    out.push_back(&block.norm_gain);
    out.push_back(&block.norm_bias);
  }
  out.push_back(&output_weight);
  return out;
}

std::vector<const Parameter*> MsntucfParams::all() const {
  auto mut = const_cast<MsntucfParams*>(this)->all();
  return {mut.begin(), mut.end()};
}

std::vector<Parameter*> NeutucfParams::all() {
  return {&user_embedding, &service_embedding, &time_embedding, &core};
}

std::vector<const Parameter*> NeutucfParams::all() const {
  return {&user_embedding, &service_embedding, &time_embedding, &core};
}

Var attention_block(Var e_prev, AttentionBlockParams& block, const ModelConfig& config,
                    bool training, Rng& rng, AttentionTrace* trace) {
  const std::size_t d_model = config.d_model();
  const std::size_t d_k = config.d_k();
  if (e_prev.value().rank() != 1 || e_prev.value().size() != d_model) {
    fail(ErrorKind::Shape, "attention_block: input " + shape_string(e_prev.shape()) +
                               " does not match d_model " + std::to_string(d_model));
  }
  if (block.heads.size() != config.heads) {
    fail(ErrorKind::Shape, "attention_block: parameter set has " + std::to_string(block.heads.size()) +
                               " heads, config expects " + std::to_string(config.heads));
  }
  Tape& tape = e_prev.tape();
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(d_k));

  std::vector<Var> head_outputs;
  head_outputs.reserve(config.heads);
  for (std::size_t l = 0; l < config.heads; ++l) {
    HeadParams& head = block.heads[l];
    const Var source = config.chunked_heads ? slice(e_prev, l * d_k, d_k) : e_prev;
    const Var q = linear_nobias(tape.parameter(head.query), source);
    const Var k = linear_nobias(tape.parameter(head.key), source);
    const Var v = linear_nobias(tape.parameter(head.value), source);

    Var logits = scale(outer2(q, k), inv_sqrt_dk);
    if (config.dropout_before_softmax) logits = dropout(logits, config.dropout, training, rng);
    Var scores = softmax(logits, config.softmax_axis);
    if (trace) trace->scores.push_back(scores);
    if (!config.dropout_before_softmax) scores = dropout(scores, config.dropout, training, rng);
    head_outputs.push_back(matvec(scores, v));
  }
  const Var fused = linear(tape.parameter(block.fusion_weight), tape.parameter(block.fusion_bias),
                           concat(head_outputs));
  return layer_norm(add(e_prev, fused), tape.parameter(block.norm_gain),
                    tape.parameter(block.norm_bias), config.layer_norm_eps);
}

Var interaction(Tape& tape, Parameter& users, Parameter& services, Parameter& times,
                const Entry& index) {
  const Var a = embedding_lookup(tape, users, index.i);
  const Var b = embedding_lookup(tape, services, index.j);
  const Var c = embedding_lookup(tape, times, index.k);
  return flatten(outer3(a, b, c));
}

Var msntucf_forward(Tape& tape, MsntucfParams& params, const ModelConfig& config,
                    const Entry& index, bool training, Rng& rng, AttentionTrace* trace) {
  Var e = interaction(tape, params.user_embedding, params.service_embedding, params.time_embedding, index);
  for (std::size_t n = 0; n < config.loops; ++n) {
    AttentionBlockParams& block = params.blocks[config.share_loop_weights ? 0 : n];
    e = attention_block(e, block, config, training, rng, trace);
  }
  return sigmoid(matvec(tape.parameter(params.output_weight), e));
}

Var neutucf_forward(Tape& tape, NeutucfParams& params, const Entry& index) {
  const Var t = interaction(tape, params.user_embedding, params.service_embedding, params.time_embedding, index);
  return sigmoid(dot(tape.parameter(params.core), t));
}

std::vector<HeadSpan> head_partition_map(const ModelConfig& config) {
  config.validate();
  const std::size_t d_k = config.d_k();
  const std::size_t Q = config.rank_q, R = config.rank_r;
  std::vector<HeadSpan> out;
  for (std::size_t l = 0; l < config.heads; ++l) {
    HeadSpan span{l, l * d_k, (l + 1) * d_k, {}};
    std::ostringstream desc;
    if (config.heads == 1) {
      desc << "whole tensor";
    } else if (d_k == Q * R) {
      desc << "slice p=" << l;
    } else if (d_k == R) {
      desc << "fiber (p=" << l / Q << ",q=" << l % Q << ")";
    } else if (d_k == 1) {
      desc << "cell (p=" << l / (Q * R) << ",q=" << (l / R) % Q << ",r=" << l % R << ")";
    } else {
      desc << "positions [" << span.begin << "," << span.end << ")";
    }
    span.description = desc.str();
    out.push_back(std::move(span));
  }
  return out;
}

namespace {

DenseTensor glorot(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  DenseTensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(-s, s);
  return t;
}

// An embedding row is what a one-hot input selects, so the effective fan-in
// of a lookup is one.
Parameter embedding(const std::string& name, std::size_t rows, std::size_t width, Rng& rng) {
  Parameter p(name, glorot({rows, width}, 1, width, rng));
  return p;
}

Parameter matrix(const std::string& name, std::size_t out, std::size_t in, Rng& rng) {
  return Parameter(name, glorot({out, in}, in, out, rng));
}

void check_shape(const TensorShape& shape) {
  if (shape.users == 0 || shape.services == 0 || shape.time_slices == 0) {
    fail(ErrorKind::Config, "tensor shape must be positive in every mode");
  }
}

}  // namespace

MsntucfParams init_msntucf(const ModelConfig& config, const TensorShape& shape, std::uint64_t seed) {
  config.validate();
  check_shape(shape);
  Rng rng(seed, 0x1417);
  const std::size_t d_model = config.d_model();
  const std::size_t d_k = config.d_k();
  const std::size_t source_len = config.chunked_heads ? d_k : d_model;

  MsntucfParams p;
  p.user_embedding = embedding("user_embedding", shape.users, config.rank_p, rng);
  p.service_embedding = embedding("service_embedding", shape.services, config.rank_q, rng);
  p.time_embedding = embedding("time_embedding", shape.time_slices, config.rank_r, rng);
  const std::size_t n_blocks = config.share_loop_weights ? 1 : config.loops;
  for (std::size_t n = 0; n < n_blocks; ++n) {
    const std::string prefix = "block" + std::to_string(n) + ".";
    AttentionBlockParams block;
    for (std::size_t l = 0; l < config.heads; ++l) {
      const std::string hp = prefix + "head" + std::to_string(l) + ".";
      HeadParams head;
      head.query = matrix(hp + "query", d_k, source_len, rng);
      head.key = matrix(hp + "key", d_k, source_len, rng);
      head.value = matrix(hp + "value", d_k, source_len, rng);
      block.heads.push_back(std::move(head));
    }
    block.fusion_weight = matrix(prefix + "fusion_weight", d_model, d_model, rng);
    block.fusion_bias = Parameter(prefix + "fusion_bias", DenseTensor({d_model}, 0.0));
    block.norm_gain = Parameter(prefix + "norm_gain", DenseTensor({d_model}, 1.0));
    block.norm_bias = Parameter(prefix + "norm_bias", DenseTensor({d_model}, 0.0));
    p.blocks.push_back(std::move(block));
  }
  p.output_weight = matrix("output_weight", 1, d_model, rng);
  return p;
}

NeutucfParams init_neutucf(const ModelConfig& config, const TensorShape& shape, std::uint64_t seed) {
  if (config.rank_p == 0 || config.rank_q == 0 || config.rank_r == 0) {
    fail(ErrorKind::Config, "ranks must be positive");
  }
  check_shape(shape);
  Rng rng(seed, 0x1417);
  NeutucfParams p;
  p.user_embedding = embedding("user_embedding", shape.users, config.rank_p, rng);
  p.service_embedding = embedding("service_embedding", shape.services, config.rank_q, rng);
  p.time_embedding = embedding("time_embedding", shape.time_slices, config.rank_r, rng);
  const std::size_t d_model = config.d_model();
  p.core = Parameter("core", glorot({config.rank_p, config.rank_q, config.rank_r}, d_model, 1, rng));
  return p;
}

double Model::predict(const Entry& index) {
  Tape tape(false);
  Rng unused(0);
  return forward(tape, index, false, unused).value()[0];
}

std::vector<DenseTensor> Model::snapshot() const {
  std::vector<DenseTensor> out;
  for (const Parameter* p : parameters()) out.push_back(p->value);
  return out;
}

void Model::restore(const std::vector<DenseTensor>& values) {
  auto params = parameters();
  if (values.size() != params.size()) fail(ErrorKind::Usage, "restore: parameter count mismatch");
  for (std::size_t n = 0; n < params.size(); ++n) {
    if (values[n].shape() != params[n]->value.shape()) {
      fail(ErrorKind::Shape, "restore: shape mismatch for " + params[n]->name);
    }
    params[n]->value = values[n];
  }
}

void Model::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

MsntucfModel::MsntucfModel(const ModelConfig& config, const TensorShape& shape)
    : Model(config, shape), params_(init_msntucf(config, shape, config.seed)) {}

Var MsntucfModel::forward(Tape& tape, const Entry& index, bool training, Rng& rng) {
  return msntucf_forward(tape, params_, config(), index, training, rng);
}

NeutucfModel::NeutucfModel(const ModelConfig& config, const TensorShape& shape)
    : Model(config, shape), params_(init_neutucf(config, shape, config.seed)) {}

Var NeutucfModel::forward(Tape& tape, const Entry& index, bool, Rng&) {
  return neutucf_forward(tape, params_, index);
}

std::unique_ptr<Model> make_model(ModelKind kind, const ModelConfig& config, const TensorShape& shape) {
  if (kind == ModelKind::Msntucf) return std::make_unique<MsntucfModel>(config, shape);
  return std::make_unique<NeutucfModel>(config, shape);
}

}  // namespace msntucf
