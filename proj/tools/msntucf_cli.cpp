// Command-line driver: train, eval, sweep and synthetic.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "msntucf/error.hpp"
#include "msntucf/experiment.hpp"

namespace {

using Settings = std::vector<std::pair<std::string, std::string>>;

const char* const kRunFlags[][2] = {
    {"data", "observation file: user service time value per line"},
    {"shape", "tensor shape I,J,K"},
    {"index-base", "0 or 1; index base of the data file"},
    {"split", "train,valid,test ratios (fractions or proportions)"},
    {"seed", "seed for initialization, batch order and dropout"},
    {"split-seed", "seed for the train/valid/test partition (default: --seed)"},
    {"model", "msntucf or neutucf"},
    {"rank", "embedding sizes P,Q,R"},
    {"heads", "attention heads L (must divide P*Q*R)"},
    {"loops", "attention block repetitions N"},
    {"dropout", "dropout rate on attention scores"},
    {"softmax-axis", "rows, columns or global"},
    {"dropout-position", "post or pre (relative to the softmax)"},
    {"share-loops", "reuse one block's weights for every loop (0/1)"},
    {"chunked-heads", "head l projects only its own chunk of the input (0/1)"},
    {"layer-norm-eps", "layer norm epsilon"},
    {"lr", "learning rate"},
    {"batch-size", "mini-batch size"},
    {"epochs", "maximum epochs"},
    {"patience", "early-stopping patience in epochs"},
    {"optimizer", "adam or sgd"},
    {"beta1", "Adam beta1"},
    {"beta2", "Adam beta2"},
    {"adam-eps", "Adam epsilon"},
    {"mean-reduction", "average batch gradients instead of summing (0/1)"},
    {"weight-decay", "L2 penalty lambda on all parameters (default 0)"},
    {"out", "output directory"},
};

struct RunFlags {
  std::string config_file;
  Settings overrides;
};

void add_run_flags(CLI::App* app, RunFlags& flags) {
  app->add_option("--config", flags.config_file, "flat key=value config file; flags override it");
  for (const auto& flag : kRunFlags) {
    const std::string key = flag[0];
    app->add_option_function<std::string>(
        "--" + key, [&flags, key](const std::string& v) { flags.overrides.emplace_back(key, v); }, flag[1]);
  }
}

msntucf::RunConfig build_config(const RunFlags& flags) {
  msntucf::RunConfig config;
  if (!flags.config_file.empty()) {
    for (const auto& [k, v] : msntucf::read_settings_file(flags.config_file)) {
      msntucf::apply_setting(config, k, v);
    }
  }
  for (const auto& [k, v] : flags.overrides) msntucf::apply_setting(config, k, v);
  return config;
}

std::vector<std::size_t> parse_values(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto dash = part.find('-');
    try {
      if (dash != std::string::npos) {
        const std::size_t lo = std::stoul(part.substr(0, dash));
        const std::size_t hi = std::stoul(part.substr(dash + 1));
        for (std::size_t v = lo; v <= hi; ++v) out.push_back(v);
      } else {
        out.push_back(std::stoul(part));
      }
    } catch (const std::exception&) {
      msntucf::fail(msntucf::ErrorKind::Config, "invalid sweep value '" + part + "'");
    }
  }
  return out;
}

void print_metrics(const char* label, const msntucf::MetricsReport& m) {
  std::printf("%s_mae=%.17g\n%s_mre=%.17g\n%s_rmse=%.17g\n%s_n_entries=%zu\n%s_n_mre_excluded=%zu\n", label,
              m.mae, label, m.mre, label, m.rmse, label, m.n_entries, label, m.n_mre_excluded);
}

int exit_code(msntucf::ErrorKind kind) {
  switch (kind) {
    case msntucf::ErrorKind::Config: return 2;
    case msntucf::ErrorKind::Data: return 3;
    case msntucf::ErrorKind::Numerical: return 4;
    default: return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tensor completion with multi-head self-attending neural Tucker factorization"};
  app.require_subcommand(1);

  RunFlags train_flags;
  auto* train = app.add_subcommand("train", "train one model and evaluate it on the test split");
  add_run_flags(train, train_flags);

  RunFlags sweep_flags;
  std::string axis = "heads";
  std::string values;
  std::size_t reps = 1;
  auto* sweep = app.add_subcommand("sweep", "train across head or loop counts");
  add_run_flags(sweep, sweep_flags);
  sweep->add_option("--axis", axis, "heads or loops")->capture_default_str();
  sweep->add_option("--values", values, "comma list of values, ranges like 1-7 allowed")->required();
  sweep->add_option("--reps", reps, "repetitions per value")->capture_default_str();

  RunFlags synth_flags;
  std::string true_rank = "3,3,3";
  std::string models = "msntucf,neutucf";
  msntucf::SyntheticSpec spec;
  std::optional<std::uint64_t> gen_seed;
  auto* synth = app.add_subcommand("synthetic", "train on a generated low-rank Tucker tensor");
  add_run_flags(synth, synth_flags);
  synth->add_option("--true-rank", true_rank, "Tucker ranks of the generator")->capture_default_str();
  synth->add_option("--density", spec.density, "observed fraction of cells")->capture_default_str();
  synth->add_option("--noise", spec.noise, "Gaussian noise std on the (0,1) scale")->capture_default_str();
  synth->add_option("--gen-seed", gen_seed, "generator seed (default: --seed)");
  synth->add_option("--models", models, "comma list of models to train")->capture_default_str();

  msntucf::EvalRequest eval_req;
  std::string eval_shape, eval_split, eval_subset = "test";
  std::optional<std::uint64_t> eval_split_seed;
  std::string eval_out;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a data split");
  eval->add_option("--checkpoint", eval_req.checkpoint, "checkpoint.txt written by train")->required();
  eval->add_option("--data", eval_req.data, "observation file")->required();
  eval->add_option("--shape", eval_shape, "expected shape I,J,K (checked against the checkpoint)");
  eval->add_option("--index-base", eval_req.index_base, "0 or 1")->capture_default_str();
  eval->add_option("--split", eval_split, "train,valid,test ratios used at training time");
  eval->add_option("--split-seed,--seed", eval_split_seed, "split seed used at training time");
  eval->add_option("--subset", eval_subset, "train, valid, test or all")->capture_default_str();
  eval->add_option("--dropout", eval_req.dropout, "rejected unless 0: evaluation is dropout-free");
  eval->add_option("--out", eval_out, "directory for eval_report.txt");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help exits 0; every other parse failure is a usage error.
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*train) {
      const auto report = msntucf::cmd_train(build_config(train_flags));
      std::cout << msntucf::format_report(report);
    } else if (*sweep) {
      const auto config = build_config(sweep_flags);
      const auto report = msntucf::cmd_sweep(config, msntucf::parse_sweep_axis(axis), parse_values(values), reps);
      std::printf("%s,runs,mae_mean,mae_std,mre_mean,mre_std,rmse_mean,rmse_std\n", msntucf::to_string(report.axis));
      for (const auto& row : report.rows) {
        std::printf("%zu,%zu,%.6g,%.3g,%.6g,%.3g,%.6g,%.3g\n", row.value, row.runs, row.mae_mean, row.mae_std,
                    row.mre_mean, row.mre_std, row.rmse_mean, row.rmse_std);
      }
    } else if (*synth) {
      auto config = build_config(synth_flags);
      msntucf::RunConfig probe;
      msntucf::apply_setting(probe, "rank", true_rank);
      spec.rank_p = probe.model_config.rank_p;
      spec.rank_q = probe.model_config.rank_q;
      spec.rank_r = probe.model_config.rank_r;
      if (config.shape.volume() != 0) spec.shape = config.shape;
      spec.seed = gen_seed.value_or(config.seed);
      std::vector<msntucf::ModelKind> kinds;
      std::stringstream ss(models);
      std::string m;
      while (std::getline(ss, m, ',')) kinds.push_back(msntucf::parse_model_kind(m));
      const auto report = msntucf::cmd_synthetic(spec, config, kinds);
      print_metrics("baseline", report.baseline);
      for (const auto& run : report.runs) {
        std::printf("# %s: %zu epochs, best epoch %zu\n", msntucf::to_string(run.config.model),
                    run.trace.epochs.size(), run.trace.best_epoch);
        print_metrics(msntucf::to_string(run.config.model), run.test);
      }
    } else if (*eval) {
      msntucf::RunConfig parsed;
      if (!eval_shape.empty()) {
        msntucf::apply_setting(parsed, "shape", eval_shape);
        eval_req.shape = parsed.shape;
      }
      if (!eval_split.empty()) {
        msntucf::apply_setting(parsed, "split", eval_split);
        eval_req.ratios = parsed.ratios;
      }
      eval_req.split_seed = eval_split_seed.value_or(1);
      eval_req.subset = msntucf::parse_eval_subset(eval_subset);
      const auto metrics = msntucf::cmd_eval(eval_req);
      print_metrics("eval", metrics);
      if (!eval_out.empty()) {
        std::filesystem::create_directories(eval_out);
        std::FILE* f = std::fopen((std::filesystem::path(eval_out) / "eval_report.txt").c_str(), "w");
        if (f) {
          std::fprintf(f, "eval_mae=%.17g\neval_mre=%.17g\neval_rmse=%.17g\neval_n_entries=%zu\n", metrics.mae,
                       metrics.mre, metrics.rmse, metrics.n_entries);
          std::fclose(f);
        }
      }
    }
  } catch (const msntucf::Error& e) {
    std::cerr << "msntucf: " << msntucf::to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "msntucf: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
