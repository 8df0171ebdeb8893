#include "msntucf/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "msntucf/error.hpp"

namespace msntucf {

const DenseTensor& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(DenseTensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& param) {
  Node node;
  node.alias = &param.value;
  node.param = &param;
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(DenseTensor value, bool requires_grad, Backward backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad && recording_;
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const DenseTensor& Tape::value(std::size_t id) const {
  const Node& node = nodes_[id];
  return node.alias ? *node.alias : node.value;
}

DenseTensor& Tape::grad_buffer(std::size_t id) {
  Node& node = nodes_[id];
  node.has_grad = true;
  if (node.param) {
    if (node.param->grad.shape() != node.param->value.shape()) {
      node.param->grad = DenseTensor(node.param->value.shape());
    }
    return node.param->grad;
  }
  if (node.grad.shape() != node.value.shape()) node.grad = DenseTensor(node.value.shape());
  return node.grad;
}

const DenseTensor* Tape::grad(Var v) const {
  const Node& node = nodes_[v.id()];
  if (!node.has_grad) return nullptr;
  return node.param ? &node.param->grad : &node.grad;
}

void Tape::backward(Var loss) {
  if (!recording_) fail(ErrorKind::Usage, "backward on a tape with recording disabled");
  if (&loss.tape() != this) fail(ErrorKind::Usage, "backward target belongs to another tape");
  if (loss.value().size() != 1) {
    fail(ErrorKind::Usage, "backward requires a scalar loss, got shape " +
                               shape_string(loss.shape()));
  }
  for (Node& node : nodes_) {
    if (!node.param && node.has_grad) node.grad.fill(0.0);
    if (!node.param) node.has_grad = false;
  }
  grad_buffer(loss.id())[0] += 1.0;
  for (std::size_t n = loss.id() + 1; n-- > 0;) {
    Node& node = nodes_[n];
    if (!node.has_grad || !node.backward) continue;
    node.backward(*this, node.grad);
  }
}

void Tape::clear() { nodes_.clear(); }

namespace {

void require_same_tape(Var a, Var b, const char* op) {
  if (&a.tape() != &b.tape()) fail(ErrorKind::Usage, std::string(op) + ": inputs on different tapes");
}

void require_rank(Var x, std::size_t rank, const char* op) {
  if (x.value().rank() != rank) {
    fail(ErrorKind::Shape, std::string(op) + ": expected rank " + std::to_string(rank) +
                               " input, got " + shape_string(x.shape()));
  }
}

}  // namespace

Var embedding_lookup(Tape& tape, Parameter& table, std::size_t index) {
  const DenseTensor& t = table.value;
  if (t.rank() != 2) fail(ErrorKind::Shape, "embedding_lookup: table must be 2-d");
  const std::size_t rows = t.dim(0), width = t.dim(1);
  if (index >= rows) {
    fail(ErrorKind::Data, "embedding_lookup: index " + std::to_string(index) +
                              " out of range for table '" + table.name + "' with " +
                              std::to_string(rows) + " rows");
  }
  DenseTensor out({width});
  std::copy_n(t.data().begin() + static_cast<std::ptrdiff_t>(index * width), width,
              out.data().begin());
  Parameter* p = &table;
  return tape.record(std::move(out), true, [p, index, width](Tape&, const DenseTensor& g) {
    if (p->grad.shape() != p->value.shape()) p->grad = DenseTensor(p->value.shape());
    double* row = p->grad.data().data() + index * width;
    for (std::size_t d = 0; d < width; ++d) row[d] += g[d];
  });
}

Var outer3(Var a, Var b, Var c) {
  require_same_tape(a, b, "outer3");
  require_same_tape(a, c, "outer3");
  require_rank(a, 1, "outer3");
  require_rank(b, 1, "outer3");
  require_rank(c, 1, "outer3");
  const DenseTensor& av = a.value();
  const DenseTensor& bv = b.value();
  const DenseTensor& cv = c.value();
  const std::size_t P = av.size(), Q = bv.size(), R = cv.size();
  DenseTensor out({P, Q, R});
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t q = 0; q < Q; ++q) {
      const double ab = av[p] * bv[q];
      for (std::size_t r = 0; r < R; ++r) out.at(p, q, r) = ab * cv[r];
    }
  Tape& tape = a.tape();
  const bool rg = a.requires_grad() || b.requires_grad() || c.requires_grad();
  return tape.record(std::move(out), rg,
                     [ia = a.id(), ib = b.id(), ic = c.id(), P, Q, R](Tape& t, const DenseTensor& g) {
    const DenseTensor& av = t.value(ia);
    const DenseTensor& bv = t.value(ib);
    const DenseTensor& cv = t.value(ic);
    const bool need_a = t.requires_grad(ia), need_b = t.requires_grad(ib),
               need_c = t.requires_grad(ic);
    DenseTensor* ga = need_a ? &t.grad_buffer(ia) : nullptr;
    DenseTensor* gb = need_b ? &t.grad_buffer(ib) : nullptr;
    DenseTensor* gc = need_c ? &t.grad_buffer(ic) : nullptr;
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t q = 0; q < Q; ++q) {
        const double* gr = g.data().data() + (p * Q + q) * R;
        double g_dot_c = 0.0;
        for (std::size_t r = 0; r < R; ++r) g_dot_c += gr[r] * cv[r];
        if (ga) (*ga)[p] += g_dot_c * bv[q];
        if (gb) (*gb)[q] += g_dot_c * av[p];
        if (gc) {
          const double ab = av[p] * bv[q];
          for (std::size_t r = 0; r < R; ++r) (*gc)[r] += gr[r] * ab;
        }
      }
  });
}

Var outer2(Var a, Var b) {
  require_same_tape(a, b, "outer2");
  require_rank(a, 1, "outer2");
  require_rank(b, 1, "outer2");
  const DenseTensor& av = a.value();
  const DenseTensor& bv = b.value();
  if (av.size() != bv.size()) {
    fail(ErrorKind::Shape, "outer2: length mismatch " + std::to_string(av.size()) + " vs " +
                               std::to_string(bv.size()));
  }
  const std::size_t n = av.size();
  DenseTensor out({n, n});
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t w = 0; w < n; ++w) out.at(u, w) = av[u] * bv[w];
  const bool rg = a.requires_grad() || b.requires_grad();
  return a.tape().record(std::move(out), rg, [ia = a.id(), ib = b.id(), n](Tape& t, const DenseTensor& g) {
    const DenseTensor& av = t.value(ia);
    const DenseTensor& bv = t.value(ib);
    if (t.requires_grad(ia)) {
      DenseTensor& ga = t.grad_buffer(ia);
      for (std::size_t u = 0; u < n; ++u) {
        double s = 0.0;
        for (std::size_t w = 0; w < n; ++w) s += g.at(u, w) * bv[w];
        ga[u] += s;
      }
    }
    if (t.requires_grad(ib)) {
      DenseTensor& gb = t.grad_buffer(ib);
      for (std::size_t u = 0; u < n; ++u)
        for (std::size_t w = 0; w < n; ++w) gb[w] += g.at(u, w) * av[u];
    }
  });
}

Var reshape(Var t, Shape shape) {
  DenseTensor out = t.value().reshaped(std::move(shape));
  return t.tape().record(std::move(out), t.requires_grad(), [it = t.id()](Tape& tp, const DenseTensor& g) {
    DenseTensor& gi = tp.grad_buffer(it);
    for (std::size_t n = 0; n < g.size(); ++n) gi[n] += g[n];
  });
}

Var flatten(Var t) { return reshape(t, {t.value().size()}); }

Var slice(Var x, std::size_t begin, std::size_t length) {
  require_rank(x, 1, "slice");
  const DenseTensor& xv = x.value();
  if (begin + length > xv.size()) {
    fail(ErrorKind::Shape, "slice: range [" + std::to_string(begin) + ", " +
                               std::to_string(begin + length) + ") exceeds length " +
                               std::to_string(xv.size()));
  }
  DenseTensor out({length});
  std::copy_n(xv.data().begin() + static_cast<std::ptrdiff_t>(begin), length, out.data().begin());
  return x.tape().record(std::move(out), x.requires_grad(),
                         [ix = x.id(), begin, length](Tape& t, const DenseTensor& g) {
    DenseTensor& gx = t.grad_buffer(ix);
    for (std::size_t n = 0; n < length; ++n) gx[begin + n] += g[n];
  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorKind::Usage, "concat: no inputs");
  std::size_t total = 0;
  bool rg = false;
  for (const Var& v : parts) {
    require_same_tape(parts.front(), v, "concat");
    require_rank(v, 1, "concat");
    total += v.value().size();
    rg = rg || v.requires_grad();
  }
  DenseTensor out({total});
  std::vector<std::size_t> ids;
  ids.reserve(parts.size());
  std::size_t offset = 0;
  for (const Var& v : parts) {
    const DenseTensor& pv = v.value();
    std::copy(pv.data().begin(), pv.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(offset));
    offset += pv.size();
    ids.push_back(v.id());
  }
  return parts.front().tape().record(std::move(out), rg, [ids = std::move(ids)](Tape& t, const DenseTensor& g) {
    std::size_t offset = 0;
    for (std::size_t id : ids) {
      const std::size_t len = t.value(id).size();
      if (t.requires_grad(id)) {
        DenseTensor& gi = t.grad_buffer(id);
        for (std::size_t n = 0; n < len; ++n) gi[n] += g[offset + n];
      }
      offset += len;
    }
  });
}

Var matvec(Var m, Var x) {
  require_same_tape(m, x, "matvec");
  require_rank(m, 2, "matvec");
  require_rank(x, 1, "matvec");
  const DenseTensor& mv = m.value();
  const DenseTensor& xv = x.value();
  const std::size_t rows = mv.dim(0), cols = mv.dim(1);
  if (cols != xv.size()) {
    fail(ErrorKind::Shape, "matvec: matrix " + shape_string(mv.shape()) +
                               " cannot multiply vector " + shape_string(xv.shape()));
  }
  DenseTensor out({rows});
  const double* md = mv.data().data();
  const double* xd = xv.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    const double* row = md + r * cols;
    for (std::size_t c = 0; c < cols; ++c) s += row[c] * xd[c];
    out[r] = s;
  }
  const bool rg = m.requires_grad() || x.requires_grad();
  return m.tape().record(std::move(out), rg, [im = m.id(), ix = x.id(), rows, cols](Tape& t, const DenseTensor& g) {
    const double* md = t.value(im).data().data();
    const double* xd = t.value(ix).data().data();
    if (t.requires_grad(im)) {
      double* gm = t.grad_buffer(im).data().data();
      for (std::size_t r = 0; r < rows; ++r) {
        const double gr = g[r];
        if (gr == 0.0) continue;
        double* row = gm + r * cols;
        for (std::size_t c = 0; c < cols; ++c) row[c] += gr * xd[c];
      }
    }
    if (t.requires_grad(ix)) {
      double* gx = t.grad_buffer(ix).data().data();
      for (std::size_t r = 0; r < rows; ++r) {
        const double gr = g[r];
        const double* row = md + r * cols;
        for (std::size_t c = 0; c < cols; ++c) gx[c] += gr * row[c];
      }
    }
  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b, "add");
  const DenseTensor& av = a.value();
  const DenseTensor& bv = b.value();
  if (av.shape() != bv.shape()) {
    fail(ErrorKind::Shape, "add: " + shape_string(av.shape()) + " vs " + shape_string(bv.shape()));
  }
  DenseTensor out = av;
  out.add_scaled(bv);
  const bool rg = a.requires_grad() || b.requires_grad();
  return a.tape().record(std::move(out), rg, [ia = a.id(), ib = b.id()](Tape& t, const DenseTensor& g) {
    if (t.requires_grad(ia)) t.grad_buffer(ia).add_scaled(g);
    if (t.requires_grad(ib)) t.grad_buffer(ib).add_scaled(g);
  });
}

Var linear(Var weight, Var bias, Var x) { return add(matvec(weight, x), bias); }

Var scale(Var x, double factor) {
  DenseTensor out = x.value();
  for (double& v : out.data()) v *= factor;
  return x.tape().record(std::move(out), x.requires_grad(), [ix = x.id(), factor](Tape& t, const DenseTensor& g) {
    t.grad_buffer(ix).add_scaled(g, factor);
  });
}

namespace {

// Visits the groups over which softmax normalizes. Each group is described by
// (start offset, element count, stride).
template <typename F>
void for_each_softmax_group(const Shape& shape, SoftmaxAxis axis, F&& f) {
  const std::size_t rows = shape[0], cols = shape[1];
  switch (axis) {
    case SoftmaxAxis::Rows:
      for (std::size_t r = 0; r < rows; ++r) f(r * cols, cols, std::size_t{1});
      break;
    case SoftmaxAxis::Columns:
      for (std::size_t c = 0; c < cols; ++c) f(c, rows, cols);
      break;
    case SoftmaxAxis::Global:
      f(std::size_t{0}, rows * cols, std::size_t{1});
      break;
  }
}

}  // namespace

Var softmax(Var m, SoftmaxAxis axis) {
  require_rank(m, 2, "softmax");
  const DenseTensor& mv = m.value();
  DenseTensor out(mv.shape());
  for_each_softmax_group(mv.shape(), axis, [&](std::size_t start, std::size_t count, std::size_t stride) {
    double mx = mv[start];
    for (std::size_t n = 1; n < count; ++n) mx = std::max(mx, mv[start + n * stride]);
    double total = 0.0;
    for (std::size_t n = 0; n < count; ++n) {
      const double e = std::exp(mv[start + n * stride] - mx);
      out[start + n * stride] = e;
      total += e;
    }
    for (std::size_t n = 0; n < count; ++n) out[start + n * stride] /= total;
  });
  Tape& tape = m.tape();
  const bool rg = m.requires_grad();
  const std::size_t out_id = tape.size();
  return tape.record(std::move(out), rg, [im = m.id(), out_id, axis](Tape& t, const DenseTensor& g) {
    const DenseTensor& s = t.value(out_id);
    DenseTensor& gm = t.grad_buffer(im);
    for_each_softmax_group(s.shape(), axis, [&](std::size_t start, std::size_t count, std::size_t stride) {
      double gs = 0.0;
      for (std::size_t n = 0; n < count; ++n) {
        const std::size_t at = start + n * stride;
        gs += g[at] * s[at];
      }
      for (std::size_t n = 0; n < count; ++n) {
        const std::size_t at = start + n * stride;
        gm[at] += s[at] * (g[at] - gs);
      }
    });
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  require_same_tape(x, gain, "layer_norm");
  require_same_tape(x, bias, "layer_norm");
  require_rank(x, 1, "layer_norm");
  const DenseTensor& xv = x.value();
  const std::size_t n = xv.size();
  if (n == 0) fail(ErrorKind::Shape, "layer_norm: empty input");
  if (gain.value().shape() != xv.shape() || bias.value().shape() != xv.shape()) {
    fail(ErrorKind::Shape, "layer_norm: gain/bias shape must match input " + shape_string(xv.shape()));
  }
  double mean = 0.0;
  for (double v : xv.data()) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : xv.data()) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double inv_std = 1.0 / std::sqrt(var + eps);

  DenseTensor normalized({n});
  DenseTensor out({n});
  const DenseTensor& gv = gain.value();
  const DenseTensor& bv = bias.value();
  for (std::size_t d = 0; d < n; ++d) {
    normalized[d] = (xv[d] - mean) * inv_std;
    out[d] = normalized[d] * gv[d] + bv[d];
  }
  const bool rg = x.requires_grad() || gain.requires_grad() || bias.requires_grad();
  return x.tape().record(std::move(out), rg,
                         [ix = x.id(), ig = gain.id(), ib = bias.id(), normalized = std::move(normalized),
                          inv_std, n](Tape& t, const DenseTensor& g) {
    const DenseTensor& gv = t.value(ig);
    if (t.requires_grad(ib)) t.grad_buffer(ib).add_scaled(g);
    if (t.requires_grad(ig)) {
      DenseTensor& gg = t.grad_buffer(ig);
      for (std::size_t d = 0; d < n; ++d) gg[d] += g[d] * normalized[d];
    }
    if (t.requires_grad(ix)) {
      double mean_gh = 0.0, mean_gh_xhat = 0.0;
      for (std::size_t d = 0; d < n; ++d) {
        const double gh = g[d] * gv[d];
        mean_gh += gh;
        mean_gh_xhat += gh * normalized[d];
      }
      mean_gh /= static_cast<double>(n);
      mean_gh_xhat /= static_cast<double>(n);
      DenseTensor& gx = t.grad_buffer(ix);
      for (std::size_t d = 0; d < n; ++d) {
        const double gh = g[d] * gv[d];
        gx[d] += inv_std * (gh - mean_gh - normalized[d] * mean_gh_xhat);
      }
    }
  });
}

Var sigmoid(Var x) {
  DenseTensor out = x.value();
  for (double& v : out.data()) {
    // Branch keeps exp() from overflowing for large |v|.
    v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  Tape& tape = x.tape();
  const std::size_t out_id = tape.size();
  return tape.record(std::move(out), x.requires_grad(), [ix = x.id(), out_id](Tape& t, const DenseTensor& g) {
    const DenseTensor& s = t.value(out_id);
    DenseTensor& gx = t.grad_buffer(ix);
    for (std::size_t n = 0; n < g.size(); ++n) gx[n] += g[n] * s[n] * (1.0 - s[n]);
  });
}

Var dropout(Var x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    fail(ErrorKind::Config, "dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  const DenseTensor& xv = x.value();
  const double keep_scale = 1.0 / (1.0 - rate);
  DenseTensor mask(xv.shape());
  DenseTensor out(xv.shape());
  for (std::size_t n = 0; n < xv.size(); ++n) {
    mask[n] = rng.bernoulli(rate) ? 0.0 : keep_scale;
    out[n] = xv[n] * mask[n];
  }
  return x.tape().record(std::move(out), x.requires_grad(),
                         [ix = x.id(), mask = std::move(mask)](Tape& t, const DenseTensor& g) {
    DenseTensor& gx = t.grad_buffer(ix);
    for (std::size_t n = 0; n < g.size(); ++n) gx[n] += g[n] * mask[n];
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.tape().record(DenseTensor::scalar(s), x.requires_grad(), [ix = x.id()](Tape& t, const DenseTensor& g) {
    for (double& v : t.grad_buffer(ix).data()) v += g[0];
  });
}

Var dot(Var a, Var b) {
  require_same_tape(a, b, "dot");
  const DenseTensor& av = a.value();
  const DenseTensor& bv = b.value();
  if (av.size() != bv.size()) {
    fail(ErrorKind::Shape, "dot: " + shape_string(av.shape()) + " vs " + shape_string(bv.shape()));
  }
  double s = 0.0;
  for (std::size_t n = 0; n < av.size(); ++n) s += av[n] * bv[n];
  const bool rg = a.requires_grad() || b.requires_grad();
  return a.tape().record(DenseTensor::scalar(s), rg, [ia = a.id(), ib = b.id()](Tape& t, const DenseTensor& g) {
    if (t.requires_grad(ia)) {
      const DenseTensor& bv = t.value(ib);
      DenseTensor& ga = t.grad_buffer(ia);
      for (std::size_t n = 0; n < bv.size(); ++n) ga[n] += g[0] * bv[n];
    }
    if (t.requires_grad(ib)) {
      const DenseTensor& av = t.value(ia);
      DenseTensor& gb = t.grad_buffer(ib);
      for (std::size_t n = 0; n < av.size(); ++n) gb[n] += g[0] * av[n];
    }
  });
}

Var half_squared_error(Var prediction, double target) {
  if (prediction.value().size() != 1) {
    fail(ErrorKind::Shape, "half_squared_error: prediction must be scalar");
  }
  const double residual = prediction.value()[0] - target;
  return prediction.tape().record(DenseTensor::scalar(0.5 * residual * residual), prediction.requires_grad(),
                                  [ip = prediction.id(), residual](Tape& t, const DenseTensor& g) {
    t.grad_buffer(ip)[0] += g[0] * residual;
  });
}

}  // namespace msntucf
