#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "msntucf/error.hpp"
#include "msntucf/experiment.hpp"
#include "msntucf/metrics.hpp"
#include "msntucf/sparse_tensor.hpp"
#include "msntucf/synthetic.hpp"

namespace py = pybind11;
using namespace msntucf;

namespace {

using IndexArray = py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>;
using ValueArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

TensorShape to_shape(const std::vector<std::size_t>& dims) {
  if (dims.size() != 3) fail(ErrorKind::Config, "shape needs three dimensions (I, J, K)");
  return {dims[0], dims[1], dims[2]};
}

py::tuple to_arrays(const SparseTensor& t) {
  const std::size_t n = t.size();
  IndexArray idx({n, std::size_t{3}});
  ValueArray val({n});
  auto iv = idx.mutable_unchecked<2>();
  auto vv = val.mutable_unchecked<1>();
  for (std::size_t r = 0; r < n; ++r) {
    const Entry& e = t.entries()[r];
    iv(r, 0) = e.i;
    iv(r, 1) = e.j;
    iv(r, 2) = e.k;
    vv(r) = e.value;
  }
  return py::make_tuple(idx, val);
}

SparseTensor from_arrays(const TensorShape& shape, const IndexArray& idx, const ValueArray& val) {
  if (idx.ndim() != 2 || idx.shape(1) != 3) fail(ErrorKind::Data, "indices must have shape (n, 3)");
  if (val.ndim() != 1 || val.shape(0) != idx.shape(0)) fail(ErrorKind::Data, "values must have shape (n,)");
  auto iv = idx.unchecked<2>();
  auto vv = val.unchecked<1>();
  std::vector<Entry> entries;
  entries.reserve(static_cast<std::size_t>(idx.shape(0)));
  for (py::ssize_t r = 0; r < idx.shape(0); ++r) {
    for (int c = 0; c < 3; ++c) {
      if (iv(r, c) < 0) fail(ErrorKind::Data, "negative index in row " + std::to_string(r));
    }
    entries.push_back({static_cast<std::uint32_t>(iv(r, 0)), static_cast<std::uint32_t>(iv(r, 1)),
                       static_cast<std::uint32_t>(iv(r, 2)), vv(r)});
  }
  return SparseTensor(shape, std::move(entries));
}

py::dict metrics_dict(const MetricsReport& m) {
  py::dict d;
  d["mae"] = m.mae;
  d["mre"] = m.mre;
  d["rmse"] = m.rmse;
  d["n_entries"] = m.n_entries;
  d["n_mre_excluded"] = m.n_mre_excluded;
  return d;
}

py::dict report_dict(const RunReport& r) {
  py::dict settings;
  for (const auto& [k, v] : config_settings(r.config)) settings[py::str(k)] = v;
  py::list epochs;
  for (const EpochRecord& e : r.trace.epochs) {
    py::dict row;
    row["epoch"] = e.epoch;
    row["loss"] = e.loss;
    row["val_mae"] = e.val_mae;
    row["val_mre"] = e.val_mre;
    row["val_rmse"] = e.val_rmse;
    epochs.append(row);
  }
  py::dict d;
  d["settings"] = settings;
  d["test"] = metrics_dict(r.test);
  d["baseline"] = metrics_dict(r.baseline);
  d["epochs"] = epochs;
  d["best_epoch"] = r.trace.best_epoch;
  d["validated_on_train"] = r.trace.validated_on_train;
  d["n_train"] = r.n_train;
  d["n_valid"] = r.n_valid;
  d["n_test"] = r.n_test;
  d["train_density"] = r.train_density;
  return d;
}

RunConfig config_from(const py::dict& settings) {
  RunConfig config;
  for (const auto& [key, value] : settings) {
    apply_setting(config, py::str(key), py::str(value));
  }
  return config;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Neural Tucker tensor completion core";

  static py::exception<Error> base(m, "MsntucfError", PyExc_RuntimeError);
  static py::exception<Error> config_error(m, "ConfigError", base.ptr());
  static py::exception<Error> data_error(m, "DataError", base.ptr());
  static py::exception<Error> numerical_error(m, "NumericalError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      switch (e.kind()) {
        case ErrorKind::Config: config_error(e.what()); break;
        case ErrorKind::Data: data_error(e.what()); break;
        case ErrorKind::Numerical: numerical_error(e.what()); break;
        default: base(e.what()); break;
      }
    }
  });

  m.def(
      "metrics",
      [](const ValueArray& truth, const ValueArray& predicted) {
        if (truth.ndim() != 1 || predicted.ndim() != 1 || truth.shape(0) != predicted.shape(0)) {
          fail(ErrorKind::Data, "truth and predicted must be 1-d arrays of equal length");
        }
        std::vector<Prediction> pairs;
        for (py::ssize_t n = 0; n < truth.shape(0); ++n) pairs.push_back({truth.at(n), predicted.at(n)});
        return metrics_dict(compute_metrics(pairs));
      },
      py::arg("truth"), py::arg("predicted"), "MAE, MRE and RMSE of predictions against ground truth.");

  m.def(
      "load_wsdream",
      [](const std::string& path, const std::vector<std::size_t>& shape, std::size_t index_base) {
        return to_arrays(load_wsdream(path, to_shape(shape), {.index_base = index_base}));
      },
      py::arg("path"), py::arg("shape"), py::arg("index_base") = 0,
      "Reads 'user service time value' lines; returns (indices (n,3), values (n,)).");

  m.def(
      "generate_synthetic",
      [](const std::vector<std::size_t>& shape, const std::vector<std::size_t>& ranks, double density,
         double noise, std::uint64_t seed) {
        if (ranks.size() != 3) fail(ErrorKind::Config, "ranks needs three values");
        SyntheticSpec spec;
        spec.shape = to_shape(shape);
        spec.rank_p = ranks[0];
        spec.rank_q = ranks[1];
        spec.rank_r = ranks[2];
        spec.density = density;
        spec.noise = noise;
        spec.seed = seed;
        const SyntheticData d = generate_synthetic(spec);
        ValueArray truth({spec.shape.users, spec.shape.services, spec.shape.time_slices});
        std::copy(d.truth.data().begin(), d.truth.data().end(), truth.mutable_data());
        py::tuple observed = to_arrays(d.observed);
        return py::make_tuple(observed[0], observed[1], truth);
      },
      py::arg("shape") = std::vector<std::size_t>{20, 20, 10},
      py::arg("ranks") = std::vector<std::size_t>{3, 3, 3}, py::arg("density") = 0.1, py::arg("noise") = 0.0,
      py::arg("seed") = 1, "Low-rank Tucker tensor; returns (indices, values, dense truth).");

  m.def(
      "train",
      [](const py::dict& settings, py::object indices, py::object values) {
        const RunConfig config = config_from(settings);
        RunReport report;
        if (indices.is_none()) {
          py::gil_scoped_release release;
          report = cmd_train(config);
        } else {
          const SparseTensor data =
              from_arrays(config.shape, indices.cast<IndexArray>(), values.cast<ValueArray>());
          py::gil_scoped_release release;
          report = run_training(config, data);
        }
        return report_dict(report);
      },
      py::arg("settings"), py::arg("indices") = py::none(), py::arg("values") = py::none(),
      "Trains one model. Settings use the CLI keys (shape, rank, heads, lr, ...). Without arrays the "
      "'data' setting names the observation file.");

  m.def(
      "default_settings", [] { return config_settings(RunConfig{}); },
      "Default settings as (key, value) pairs.");
}
