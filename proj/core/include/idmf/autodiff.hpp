// SPDX-License-Identifier: Apache-2.0
/**
 * @file   autodiff.hpp
 * @brief  Dense 64-bit tensors and a reverse-mode computation tape.
 *
 * Tensors have rank 1 to 3 and are stored row-major. Operations are
 * recorded on a Tape in creation order; backward() walks the record in
 * reverse, which is a valid reverse topological order, and accumulates
 * gradients additively into operands. A tape is single-threaded; separate
 * tapes may run concurrently against shared, read-only parameters.
 */
#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace idmf::ad {

class Shape {
public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims);

  std::size_t rank() const noexcept { return rank_; }
  std::size_t operator[](std::size_t axis) const { return dims_[axis]; }
  std::size_t last() const noexcept { return rank_ ? dims_[rank_ - 1] : 1; }
  /// Product of every axis except the last.
  std::size_t outer() const noexcept;
  std::size_t numel() const noexcept;

  bool operator==(const Shape &) const = default;
  std::string str() const;

private:
  std::array<std::size_t, 3> dims_{1, 1, 1};
  std::size_t rank_ = 0;
};

class Tensor {
public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  const Shape &shape() const noexcept { return shape_; }
  std::size_t numel() const noexcept { return data_.size(); }
  std::size_t rows() const noexcept { return shape_.outer(); }
  std::size_t cols() const noexcept { return shape_.last(); }

  double *data() noexcept { return data_.data(); }
  const double *data() const noexcept { return data_.data(); }
  std::vector<double> &values() noexcept { return data_; }
  const std::vector<double> &values() const noexcept { return data_; }

  double &operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double &at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const {
    return data_[r * cols() + c];
  }

  bool all_finite() const noexcept;
  void fill(double v);
  bool operator==(const Tensor &) const = default;

private:
  Shape shape_;
  std::vector<double> data_;
};

class Tape;

/// Handle to a node recorded on a tape.
class Var {
public:
  Var() = default;
  Var(Tape *tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape &tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor &value() const;
  const Shape &shape() const { return value().shape(); }
  bool valid() const noexcept { return tape_ != nullptr; }

private:
  Tape *tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
public:
  using Backward = std::function<void(Tape &, std::size_t self)>;

  Tape() = default;
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  /// A value that does not receive gradients.
  Var constant(Tensor value);
  /// A leaf that receives gradients and owns its value.
  Var variable(Tensor value);
  /// A leaf that receives gradients and reads an external tensor. The
  /// tensor must outlive the tape and stay unchanged during the pass.
  Var parameter(const Tensor &value);
  /// Reads an external tensor without tracking gradients.
  Var constant_ref(const Tensor &value);

  /// Records an op result. `backward` may be empty for constant results.
  Var record(Tensor value, std::vector<std::size_t> parents,
             Backward backward);

  const Tensor &value(std::size_t id) const;
  const Tensor &value(Var v) const { return value(v.id()); }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient buffer, allocated as zeros on first access.
  Tensor &grad(std::size_t id);
  const Tensor &grad(Var v) { return grad(v.id()); }
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.values().empty(); }

  /// Seeds d(output)/d(output) = 1 for a single-element output and
  /// propagates to every node that requires gradients.
  void backward(Var output);

  std::size_t size() const noexcept { return nodes_.size(); }
  /// Number of nodes whose backward rule ran in the last backward() call.
  std::size_t backward_visits() const noexcept { return visits_; }

private:
  struct Node {
    Tensor owned;
    const Tensor *external = nullptr;
    Tensor grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
  std::size_t visits_ = 0;
};

// ---------------------------------------------------------------------------
// Primitives. All throw ShapeError on incompatible operands.

/// a (m x k) times b (k x n).
Var matmul(Var a, Var b);
/// x (..., in) times w^T (w: out x in) plus bias (out); rank-3 x is
/// treated as a stack of rows.
Var affine(Var x, Var weight, Var bias);
/// Elementwise sum; `b` may also be a rank-1 tensor broadcast over rows.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double c);
Var square(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var sqrt(Var a);
/// Softmax over the last axis.
Var softmax(Var a);
/// Concatenation along the last axis.
Var concat(std::span<const Var> parts);
Var concat(Var a, Var b);
/// Columns [begin, end) of the last axis.
Var slice(Var a, std::size_t begin, std::size_t end);
/// Same values under a new shape with equal element count.
Var reshape(Var a, Shape shape);
/// Sum / mean of every element, giving a rank-1 tensor of size 1.
Var sum(Var a);
Var mean(Var a);
/// Mean over the last axis: (..., n) -> (...,) kept as (rows x 1).
Var row_mean(Var a);

/// Stacks T tensors of shape (B x h) into (B x T x h).
Var stack_time(std::span<const Var> steps);
/// Time step t of a (B x T x h) tensor as (B x h).
Var time_step(Var seq, std::size_t t);
/// Per-batch dot products: query (B x h), keys (B x T x h) -> (B x T).
Var batched_dot(Var query, Var keys);
/// Per-batch weighted sums: weights (B x T), values (B x T x h) -> (B x h).
Var weighted_sum(Var weights, Var values);

/**
 * Fused LSTM cell. Gate order (input, forget, cell, output):
 *   z = x Wx^T + h Wh^T + b,  i = sig(z_i), f = sig(z_f), g = tanh(z_g),
 *   o = sig(z_o),  c' = f c + i g,  h' = o tanh(c').
 * Returns (B x 2H) holding [h' | c'].
 */
Var lstm_cell(Var x, Var h, Var c, Var w_input, Var w_hidden, Var bias);

// ---------------------------------------------------------------------------

struct GradCheckReport {
  double max_relative_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  double max_floor = 0.0; ///< largest denominator floor applied
  bool passed = false;
};

/// Builds a scalar loss on `tape` from parameter handles (one per entry of
/// `params`, same order).
using LossClosure = std::function<Var(Tape &, std::span<const Var>)>;

/**
 * Compares reverse-mode gradients with central differences for every
 * element of every parameter. Relative error is
 * |analytic - numeric| / max(|analytic|, |numeric|, floor), where floor is
 * the larger of `abs_floor` and the roundoff noise of the difference
 * quotient divided by `tolerance`. The noise is taken as 8 ulps of the
 * loss per evaluation, 8 eps (|f+| + |f-|) / (2 step); gradients smaller
 * than what the quotient can resolve are then judged in absolute terms.
 */
GradCheckReport grad_check(const LossClosure &loss,
                           std::span<Tensor *const> params,
                           double step = 1e-5, double tolerance = 1e-6,
                           double abs_floor = 1e-8);

} // namespace idmf::ad
