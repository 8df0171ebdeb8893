#include "msntucf/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "msntucf/error.hpp"

namespace msntucf {

const char* to_string(OptimizerKind kind) { return kind == OptimizerKind::Adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(const std::string& text) {
  if (text == "adam") return OptimizerKind::Adam;
  if (text == "sgd") return OptimizerKind::Sgd;
  fail(ErrorKind::Config, "unknown optimizer '" + text + "' (expected adam or sgd)");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) fail(ErrorKind::Config, "learning rate must be positive");
  if (batch_size == 0) fail(ErrorKind::Config, "batch size must be positive");
  if (max_epochs == 0) fail(ErrorKind::Config, "max epochs must be positive");
  if (patience > max_epochs) fail(ErrorKind::Config, "patience must not exceed max epochs");
  if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) {
    fail(ErrorKind::Config, "adam betas must lie in (0, 1)");
  }
  if (!(adam_eps > 0.0)) fail(ErrorKind::Config, "adam eps must be positive");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    fail(ErrorKind::Config, "weight decay must be a finite non-negative number");
  }
}

void adam_step(std::span<Parameter* const> params, OptimizerState& state, double lr,
               double beta1, double beta2, double eps) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(beta1, t);
  const double correction2 = 1.0 - std::pow(beta2, t);
  for (Parameter* p : params) {
    if (p->first_moment.shape() != p->value.shape()) p->first_moment = DenseTensor(p->value.shape());
    if (p->second_moment.shape() != p->value.shape()) p->second_moment = DenseTensor(p->value.shape());
    if (p->grad.shape() != p->value.shape()) p->grad = DenseTensor(p->value.shape());
    auto value = p->value.data();
    auto grad = p->grad.data();
    auto m = p->first_moment.data();
    auto v = p->second_moment.data();
    for (std::size_t n = 0; n < value.size(); ++n) {
      const double g = grad[n];
      m[n] = beta1 * m[n] + (1.0 - beta1) * g;
      v[n] = beta2 * v[n] + (1.0 - beta2) * g * g;
      const double m_hat = m[n] / correction1;
      const double v_hat = v[n] / correction2;
      value[n] -= lr * m_hat / (std::sqrt(v_hat) + eps);
      grad[n] = 0.0;
    }
  }
}

void sgd_step(std::span<Parameter* const> params, double lr) {
  for (Parameter* p : params) {
    if (p->grad.shape() != p->value.shape()) continue;
    p->value.add_scaled(p->grad, -lr);
    p->zero_grad();
  }
}

std::vector<Sample> normalize_entries(const SparseTensor& t, const NormalizationParams& norm) {
  std::vector<Sample> out;
  out.reserve(t.size());
  for (const Entry& e : t.entries()) out.push_back({e, transform(e.value, norm)});
  return out;
}

double loss(Model& model, std::span<const Sample> batch) {
  if (batch.empty()) fail(ErrorKind::Usage, "loss of an empty batch");
  double total = 0.0;
  for (const Sample& s : batch) {
    const double r = s.target - model.predict(s.index);
    total += 0.5 * r * r;
  }
  return total;
}

double loss_and_backward(Model& model, std::span<const Sample> batch, bool training, Rng& rng) {
  if (batch.empty()) fail(ErrorKind::Usage, "loss of an empty batch");
  double total = 0.0;
  Tape tape;
  for (const Sample& s : batch) {
    tape.clear();
    const Var prediction = model.forward(tape, s.index, training, rng);
    const Var l = half_squared_error(prediction, s.target);
    tape.backward(l);
    total += l.value()[0];
  }
  return total;
}

namespace {

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_trace_csv(const std::filesystem::path& path, const TrainTrace& trace) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Data, "cannot write " + path.string());
  out << "epoch,loss,val_mae,val_mre,val_rmse\n";
  for (const EpochRecord& r : trace.epochs) {
    out << r.epoch << ',' << exact(r.loss) << ',' << exact(r.val_mae) << ',' << exact(r.val_mre) << ','
        << exact(r.val_rmse) << '\n';
  }
}

void write_timing_csv(const std::filesystem::path& path, const TrainTrace& trace) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Data, "cannot write " + path.string());
  out << "epoch,seconds\n";
  for (const EpochRecord& r : trace.epochs) out << r.epoch << ',' << r.seconds << '\n';
}

MetricsReport evaluate(Model& model, const SparseTensor& entries, const NormalizationParams& norm) {
  if (entries.empty()) fail(ErrorKind::Usage, "evaluate on an empty entry set");
  std::vector<Prediction> pairs;
  pairs.reserve(entries.size());
  for (const Entry& e : entries.entries()) {
    pairs.push_back({e.value, inverse_transform(model.predict(e), norm)});
  }
  return compute_metrics(pairs);
}

MetricsReport mean_baseline(const SparseTensor& train, const SparseTensor& test) {
  if (train.empty() || test.empty()) fail(ErrorKind::Usage, "mean baseline needs train and test entries");
  double mean = 0.0;
  for (const Entry& e : train.entries()) mean += e.value;
  mean /= static_cast<double>(train.size());
  std::vector<Prediction> pairs;
  pairs.reserve(test.size());
  for (const Entry& e : test.entries()) pairs.push_back({e.value, mean});
  return compute_metrics(pairs);
}

TrainTrace fit(Model& model, const DataSplit& data, const NormalizationParams& norm,
               const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (data.train.empty()) fail(ErrorKind::Data, "training split is empty");

  std::vector<Sample> samples = normalize_entries(data.train, norm);
  TrainTrace trace;
  trace.validated_on_train = data.valid.empty();
  const SparseTensor& validation = trace.validated_on_train ? data.train : data.valid;

  Rng order_rng(config.seed, 1);
  Rng dropout_rng(config.seed, 2);
  OptimizerState state;
  const auto params = model.parameters();
  model.zero_grad();

  std::vector<DenseTensor> best = model.snapshot();
  double best_rmse = INFINITY;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    shuffle(std::span<Sample>(samples), order_rng);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < samples.size(); begin += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, samples.size() - begin);
      const std::span<const Sample> batch(samples.data() + begin, len);
      epoch_loss += loss_and_backward(model, batch, true, dropout_rng);
      if (config.mean_reduction) {
        for (Parameter* p : params) {
          for (double& g : p->grad.data()) g /= static_cast<double>(len);
        }
      }
      if (config.weight_decay > 0.0) {
        // Each batch carries its share of 0.5 * lambda * |theta|^2, so one
        // epoch adds the full penalty gradient whatever the batch size.
        double share = config.weight_decay * static_cast<double>(len) / static_cast<double>(samples.size());
        if (config.mean_reduction) share /= static_cast<double>(len);
        for (Parameter* p : params) {
          if (p->grad.shape() != p->value.shape()) p->grad = DenseTensor(p->value.shape());
          p->grad.add_scaled(p->value, share);
        }
      }
      if (config.optimizer == OptimizerKind::Adam) {
        adam_step(params, state, config.learning_rate, config.beta1, config.beta2, config.adam_eps);
      } else {
        sgd_step(params, config.learning_rate);
      }
    }
    if (!std::isfinite(epoch_loss)) {
      fail(ErrorKind::Numerical, "training diverged at epoch " + std::to_string(epoch));
    }
    for (const Parameter* p : params) {
      if (!p->value.all_finite()) {
        fail(ErrorKind::Numerical, "parameter '" + p->name + "' became non-finite at epoch " +
                                       std::to_string(epoch));
      }
    }

    const MetricsReport val = evaluate(model, validation, norm);
    EpochRecord record;
    record.epoch = epoch;
    record.loss = epoch_loss;
    record.val_mae = val.mae;
    record.val_mre = val.mre;
    record.val_rmse = val.rmse;
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    trace.epochs.push_back(record);
    if (on_epoch) on_epoch(record);

    if (val.rmse < best_rmse) {
      best_rmse = val.rmse;
      best = model.snapshot();
      trace.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= config.patience) break;
  }
  model.restore(best);
  return trace;
}

TrainResult train_model(ModelKind kind, const DataSplit& data, const ModelConfig& model_config,
                        const TrainConfig& train_config, const EpochCallback& on_epoch) {
  if (kind == ModelKind::Msntucf) model_config.validate();
  train_config.validate();
  TrainResult result;
  result.norm = fit_normalization(data.train);
  result.model = make_model(kind, model_config, data.train.shape());
  result.trace = fit(*result.model, data, result.norm, train_config, on_epoch);
  return result;
}

}  // namespace msntucf
