#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "msntucf/dense_tensor.hpp"
#include "msntucf/rng.hpp"

namespace msntucf {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid until the tape
/// is cleared.
class Var {
 public:
  Var() = default;

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  /// Stays valid until the tape is cleared or destroyed.
  const DenseTensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Linear record of executed operations for reverse-mode differentiation.
///
/// Each node owns its forward value (parameter nodes alias the Parameter's
/// value instead) and a vector-Jacobian closure that pushes the node's
/// upstream gradient into the gradient buffers of its inputs. Gradient
/// buffers of parameter nodes are the Parameter::grad tensors themselves, so
/// repeated forward/backward passes accumulate into them until zero_grad().
///
/// A tape built with recording disabled keeps forward values only; backward()
/// on it is a usage error.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const DenseTensor& upstream)>;

  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(DenseTensor value);
  Var parameter(Parameter& param);

  /// Appends an op result. `backward` is dropped when no input needs a
  /// gradient or when recording is off.
  Var record(DenseTensor value, bool requires_grad, Backward backward);

  const DenseTensor& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient accumulator for node `id`, zero-initialized on first use.
  DenseTensor& grad_buffer(std::size_t id);

  /// Gradient of the last backward() target with respect to `v`, or nullptr
  /// when nothing flowed into it.
  const DenseTensor* grad(Var v) const;

  /// Runs the recorded closures in reverse order starting from a scalar.
  void backward(Var loss);

  void clear();
  std::size_t size() const { return nodes_.size(); }
  bool recording() const { return recording_; }

 private:
  struct Node {
    DenseTensor value;
    const DenseTensor* alias = nullptr;
    Parameter* param = nullptr;
    DenseTensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    Backward backward;
  };

  // A deque keeps value() references valid while later ops append nodes.
  std::deque<Node> nodes_;
  bool recording_;
};

// Operations. All inputs must live on the same tape.

/// Row `index` of a (M, D) table as a (D) vector. The backward pass scatters
/// into that row of table.grad only.
Var embedding_lookup(Tape& tape, Parameter& table, std::size_t index);

/// out[p,q,r] = a[p] * b[q] * c[r]
Var outer3(Var a, Var b, Var c);

/// out[u,w] = a[u] * b[w]
Var outer2(Var a, Var b);

/// Row-major flatten of any tensor to a vector.
Var flatten(Var t);
Var reshape(Var t, Shape shape);

/// Contiguous sub-vector [begin, begin + length) of a vector.
Var slice(Var x, std::size_t begin, std::size_t length);
Var concat(std::span<const Var> parts);

/// Matrix (out, in) times vector (in).
Var matvec(Var m, Var x);
inline Var linear_nobias(Var weight, Var x) { return matvec(weight, x); }
Var linear(Var weight, Var bias, Var x);

Var add(Var a, Var b);
Var scale(Var x, double factor);

enum class SoftmaxAxis {
  Rows,     // each row sums to one
  Columns,  // each column sums to one
  Global,   // the whole matrix sums to one
};

/// Max-subtracted softmax over a matrix.
Var softmax(Var m, SoftmaxAxis axis = SoftmaxAxis::Rows);
inline Var softmax_rows(Var m) { return softmax(m, SoftmaxAxis::Rows); }

/// (x - mean) / sqrt(var + eps) * gain + bias with population variance.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

Var sigmoid(Var x);

/// Inverted dropout: survivors are scaled by 1 / (1 - rate). Identity when
/// `training` is false or rate is zero. Rejects rate outside [0, 1).
Var dropout(Var x, double rate, bool training, Rng& rng);

Var sum(Var x);
Var dot(Var a, Var b);

/// 0.5 * (target - prediction)^2 for a single-element prediction.
Var half_squared_error(Var prediction, double target);

}  // namespace msntucf
