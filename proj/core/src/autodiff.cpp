// SPDX-License-Identifier: Apache-2.0
/**
 * @file   autodiff.cpp
 * @brief  Tape mechanics and the forward/backward rules of every primitive.
 */
#include <idmf/autodiff.hpp>
#include <idmf/error.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace idmf::ad {

using RowMat =
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

namespace {

MatMap mat(Tensor &t) {
  return MatMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}
ConstMatMap mat(const Tensor &t) {
  return ConstMatMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}

[[noreturn]] void shape_error(const char *op, const Shape &a, const Shape &b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.str() +
                   " and " + b.str());
}

Shape with_last(const Shape &s, std::size_t last) {
  switch (s.rank()) {
  case 1:
    return Shape{last};
  case 2:
    return Shape{s[0], last};
  default:
    return Shape{s[0], s[1], last};
  }
}

Tape &same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape())
    throw ShapeError("operands recorded on different tapes");
  return a.tape();
}

/// Unary elementwise op with derivative expressed via (x, y).
template <typename F, typename D> Var unary(Var a, F f, D dfdx) {
  Tape &t = a.tape();
  const Tensor &x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i)
    y[i] = f(x[i]);
  const std::size_t ia = a.id();
  return t.record(std::move(y), {ia}, [ia, dfdx](Tape &tp, std::size_t self) {
    if (!tp.requires_grad(ia))
      return;
    const Tensor &xv = tp.value(ia);
    const Tensor &yv = tp.value(self);
    const Tensor &g = tp.grad(self);
    Tensor &gx = tp.grad(ia);
    for (std::size_t i = 0; i < g.numel(); ++i)
      gx[i] += g[i] * dfdx(xv[i], yv[i]);
  });
}

double sigmoid_scalar(double x) {
  if (x >= 0.0)
    return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

} // namespace

// ---------------------------------------------------------------------------

Shape::Shape(std::initializer_list<std::size_t> dims) {
  if (dims.size() == 0 || dims.size() > 3)
    throw ShapeError("tensor rank must be 1, 2 or 3");
  rank_ = dims.size();
  std::copy(dims.begin(), dims.end(), dims_.begin());
}

std::size_t Shape::outer() const noexcept {
  std::size_t n = 1;
  for (std::size_t i = 0; i + 1 < rank_; ++i)
    n *= dims_[i];
  return n;
}

std::size_t Shape::numel() const noexcept {
  std::size_t n = 1;
  for (std::size_t i = 0; i < rank_; ++i)
    n *= dims_[i];
  return n;
}

std::string Shape::str() const {
  std::ostringstream ss;
  ss << '(';
  for (std::size_t i = 0; i < rank_; ++i)
    ss << (i ? "x" : "") << dims_[i];
  ss << ')';
  return ss.str();
}

Tensor::Tensor(Shape shape, double fill)
  : shape_(shape), data_(shape.numel(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
  : shape_(shape), data_(std::move(values)) {
  if (data_.size() != shape_.numel())
    throw ShapeError("tensor value count " + std::to_string(data_.size()) +
                     " does not match shape " + shape_.str());
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double x) { return std::isfinite(x); });
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

const Tensor &Var::value() const { return tape_->value(id_); }

// ---------------------------------------------------------------------------

Var Tape::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::variable(Tensor value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::parameter(const Tensor &value) {
  Node n;
  n.external = &value;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<std::size_t> parents,
                 Backward backward) {
#ifndef NDEBUG
  if (!value.all_finite())
    throw Error("autodiff: non-finite value produced in forward pass");
#endif
  Node n;
  n.owned = std::move(value);
  n.requires_grad = std::any_of(parents.begin(), parents.end(),
                                [&](std::size_t p) {
                                  return nodes_[p].requires_grad;
                                });
  if (n.requires_grad)
    n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::constant_ref(const Tensor &value) {
  Node n;
  n.external = &value;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

const Tensor &Tape::value(std::size_t id) const {
  const Node &n = nodes_[id];
  return n.external ? *n.external : n.owned;
}

Tensor &Tape::grad(std::size_t id) {
  Node &n = nodes_[id];
  if (n.grad.values().empty())
    n.grad = Tensor(value(id).shape(), 0.0);
  return n.grad;
}

void Tape::backward(Var output) {
  if (&output.tape() != this)
    throw ShapeError("backward: output recorded on a different tape");
  if (value(output.id()).numel() != 1)
    throw ShapeError("backward: output must hold a single element, got " +
                     value(output.id()).shape().str());
  for (auto &n : nodes_)
    n.grad = Tensor();
  visits_ = 0;
  grad(output.id())[0] = 1.0;
  for (std::size_t i = output.id() + 1; i-- > 0;) {
    Node &n = nodes_[i];
    if (!n.requires_grad || !n.backward || n.grad.values().empty())
      continue;
    n.backward(*this, i);
    ++visits_;
  }
}

// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape &t = same_tape(a, b);
  const Tensor &A = a.value();
  const Tensor &B = b.value();
  if (A.shape().rank() != 2 || B.shape().rank() != 2 ||
      A.shape()[1] != B.shape()[0])
    shape_error("matmul", A.shape(), B.shape());
  Tensor C(Shape{A.shape()[0], B.shape()[1]});
  mat(C).noalias() = mat(A) * mat(B);
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(C), {ia, ib}, [ia, ib](Tape &tp, std::size_t self) {
    const Tensor &g = tp.grad(self);
    if (tp.requires_grad(ia))
      mat(tp.grad(ia)).noalias() += mat(g) * mat(tp.value(ib)).transpose();
    if (tp.requires_grad(ib))
      mat(tp.grad(ib)).noalias() += mat(tp.value(ia)).transpose() * mat(g);
  });
}

Var affine(Var x, Var weight, Var bias) {
  Tape &t = same_tape(x, weight);
  same_tape(x, bias);
  const Tensor &X = x.value();
  const Tensor &W = weight.value();
  const Tensor &b = bias.value();
  if (W.shape().rank() != 2 || W.shape()[1] != X.cols())
    shape_error("affine(weight)", X.shape(), W.shape());
  if (b.shape().rank() != 1 || b.numel() != W.shape()[0])
    shape_error("affine(bias)", W.shape(), b.shape());
  const std::size_t out = W.shape()[0];
  Tensor Y(with_last(X.shape(), out));
  auto Ym = mat(Y);
  Ym.noalias() = mat(X) * mat(W).transpose();
  Ym.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(
    b.data(), static_cast<Eigen::Index>(out));
  const std::size_t ix = x.id(), iw = weight.id(), ib = bias.id();
  return t.record(std::move(Y), {ix, iw, ib},
                  [ix, iw, ib](Tape &tp, std::size_t self) {
                    const auto G = mat(tp.grad(self));
                    if (tp.requires_grad(ix))
                      mat(tp.grad(ix)).noalias() += G * mat(tp.value(iw));
                    if (tp.requires_grad(iw))
                      mat(tp.grad(iw)).noalias() +=
                        G.transpose() * mat(tp.value(ix));
                    if (tp.requires_grad(ib)) {
                      Tensor &gb = tp.grad(ib);
                      Eigen::Map<Eigen::RowVectorXd>(
                        gb.data(), static_cast<Eigen::Index>(gb.numel())) +=
                        G.colwise().sum();
                    }
                  });
}

Var add(Var a, Var b) {
  Tape &t = same_tape(a, b);
  const Tensor &A = a.value();
  const Tensor &B = b.value();
  const bool broadcast = B.shape().rank() == 1 && A.shape().rank() > 1 &&
                         B.numel() == A.cols();
  if (!(A.shape() == B.shape()) && !broadcast)
    shape_error("add", A.shape(), B.shape());
  Tensor C = A;
  if (broadcast)
    mat(C).rowwise() += Eigen::Map<const Eigen::RowVectorXd>(
      B.data(), static_cast<Eigen::Index>(B.numel()));
  else
    for (std::size_t i = 0; i < C.numel(); ++i)
      C[i] += B[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(C), {ia, ib},
                  [ia, ib, broadcast](Tape &tp, std::size_t self) {
                    const Tensor &g = tp.grad(self);
                    if (tp.requires_grad(ia)) {
                      Tensor &ga = tp.grad(ia);
                      for (std::size_t i = 0; i < g.numel(); ++i)
                        ga[i] += g[i];
                    }
                    if (tp.requires_grad(ib)) {
                      Tensor &gb = tp.grad(ib);
                      if (broadcast)
                        Eigen::Map<Eigen::RowVectorXd>(
                          gb.data(), static_cast<Eigen::Index>(gb.numel())) +=
                          mat(g).colwise().sum();
                      else
                        for (std::size_t i = 0; i < g.numel(); ++i)
                          gb[i] += g[i];
                    }
                  });
}

Var sub(Var a, Var b) {
  Tape &t = same_tape(a, b);
  const Tensor &A = a.value();
  const Tensor &B = b.value();
  if (!(A.shape() == B.shape()))
    shape_error("sub", A.shape(), B.shape());
  Tensor C = A;
  for (std::size_t i = 0; i < C.numel(); ++i)
    C[i] -= B[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(C), {ia, ib}, [ia, ib](Tape &tp, std::size_t self) {
    const Tensor &g = tp.grad(self);
    if (tp.requires_grad(ia)) {
      Tensor &ga = tp.grad(ia);
      for (std::size_t i = 0; i < g.numel(); ++i)
        ga[i] += g[i];
    }
    if (tp.requires_grad(ib)) {
      Tensor &gb = tp.grad(ib);
      for (std::size_t i = 0; i < g.numel(); ++i)
        gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape &t = same_tape(a, b);
  const Tensor &A = a.value();
  const Tensor &B = b.value();
  if (!(A.shape() == B.shape()))
    shape_error("mul", A.shape(), B.shape());
  Tensor C = A;
  for (std::size_t i = 0; i < C.numel(); ++i)
    C[i] *= B[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(C), {ia, ib}, [ia, ib](Tape &tp, std::size_t self) {
    const Tensor &g = tp.grad(self);
    if (tp.requires_grad(ia)) {
      const Tensor &bv = tp.value(ib);
      Tensor &ga = tp.grad(ia);
      for (std::size_t i = 0; i < g.numel(); ++i)
        ga[i] += g[i] * bv[i];
    }
    if (tp.requires_grad(ib)) {
      const Tensor &av = tp.value(ia);
      Tensor &gb = tp.grad(ib);
      for (std::size_t i = 0; i < g.numel(); ++i)
        gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  return unary(
    a, [factor](double x) { return factor * x; },
    [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double c) {
  return unary(
    a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var square(Var a) {
  return unary(
    a, [](double x) { return x * x; },
    [](double x, double) { return 2.0 * x; });
}

Var sigmoid(Var a) {
  return unary(a, sigmoid_scalar,
               [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(
    a, [](double x) { return std::tanh(x); },
    [](double, double y) { return 1.0 - y * y; });
}

Var sqrt(Var a) {
  return unary(
    a, [](double x) { return std::sqrt(x); },
    [](double, double y) { return 0.5 / y; });
}

Var softmax(Var a) {
  Tape &t = a.tape();
  const Tensor &X = a.value();
  Tensor Y(X.shape());
  const std::size_t rows = X.rows(), cols = X.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    const double *x = X.data() + r * cols;
    double *y = Y.data() + r * cols;
    const double m = *std::max_element(x, x + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c)
      z += (y[c] = std::exp(x[c] - m));
    for (std::size_t c = 0; c < cols; ++c)
      y[c] /= z;
  }
  const std::size_t ia = a.id();
  return t.record(std::move(Y), {ia}, [ia](Tape &tp, std::size_t self) {
    if (!tp.requires_grad(ia))
      return;
    const Tensor &y = tp.value(self);
    const Tensor &g = tp.grad(self);
    Tensor &gx = tp.grad(ia);
    const std::size_t rows = y.rows(), cols = y.cols();
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c)
        dot += g.at(r, c) * y.at(r, c);
      for (std::size_t c = 0; c < cols; ++c)
        gx.at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
    }
  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty())
    throw ShapeError("concat: no operands");
  Tape &t = parts.front().tape();
  const Shape &s0 = parts.front().shape();
  std::vector<std::size_t> widths, ids;
  std::size_t total = 0;
  for (const Var &p : parts) {
    same_tape(parts.front(), p);
    const Shape &s = p.shape();
    if (s.rank() != s0.rank() || s.outer() != s0.outer())
      shape_error("concat", s0, s);
    for (std::size_t ax = 0; ax + 1 < s.rank(); ++ax)
      if (s[ax] != s0[ax])
        shape_error("concat", s0, s);
    widths.push_back(s.last());
    ids.push_back(p.id());
    total += s.last();
  }
  const std::size_t rows = s0.outer();
  Tensor Y(with_last(s0, total));
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor &X = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(X.data() + r * widths[k], widths[k],
                  Y.data() + r * total + offset);
    offset += widths[k];
  }
  return t.record(std::move(Y), ids,
                  [ids, widths, total, rows](Tape &tp, std::size_t self) {
                    const Tensor &g = tp.grad(self);
                    std::size_t off = 0;
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      if (tp.requires_grad(ids[k])) {
                        Tensor &gx = tp.grad(ids[k]);
                        for (std::size_t r = 0; r < rows; ++r)
                          for (std::size_t c = 0; c < widths[k]; ++c)
                            gx[r * widths[k] + c] += g[r * total + off + c];
                      }
                      off += widths[k];
                    }
                  });
}

Var concat(Var a, Var b) {
  const std::array<Var, 2> parts{a, b};
  return concat(std::span<const Var>(parts));
}

Var slice(Var a, std::size_t begin, std::size_t end) {
  Tape &t = a.tape();
  const Tensor &X = a.value();
  const std::size_t cols = X.cols();
  if (begin >= end || end > cols)
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") outside " + X.shape().str());
  const std::size_t rows = X.rows(), width = end - begin;
  Tensor Y(with_last(X.shape(), width));
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(X.data() + r * cols + begin, width, Y.data() + r * width);
  const std::size_t ia = a.id();
  return t.record(std::move(Y), {ia},
                  [ia, begin, width, cols, rows](Tape &tp, std::size_t self) {
                    if (!tp.requires_grad(ia))
                      return;
                    const Tensor &g = tp.grad(self);
                    Tensor &gx = tp.grad(ia);
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t c = 0; c < width; ++c)
                        gx[r * cols + begin + c] += g[r * width + c];
                  });
}

Var reshape(Var a, Shape shape) {
  Tape &t = a.tape();
  const Tensor &X = a.value();
  if (shape.numel() != X.numel())
    shape_error("reshape", X.shape(), shape);
  Tensor Y(shape, X.values());
  const std::size_t ia = a.id();
  return t.record(std::move(Y), {ia}, [ia](Tape &tp, std::size_t self) {
    if (!tp.requires_grad(ia))
      return;
    const Tensor &g = tp.grad(self);
    Tensor &gx = tp.grad(ia);
    for (std::size_t i = 0; i < g.numel(); ++i)
      gx[i] += g[i];
  });
}

Var sum(Var a) {
  Tape &t = a.tape();
  const Tensor &X = a.value();
  const double s = std::accumulate(X.values().begin(), X.values().end(), 0.0);
  const std::size_t ia = a.id();
  return t.record(Tensor(Shape{1}, s), {ia}, [ia](Tape &tp, std::size_t self) {
    if (!tp.requires_grad(ia))
      return;
    const double g = tp.grad(self)[0];
    Tensor &gx = tp.grad(ia);
    for (std::size_t i = 0; i < gx.numel(); ++i)
      gx[i] += g;
  });
}

Var mean(Var a) {
  const auto n = static_cast<double>(a.value().numel());
  return scale(sum(a), 1.0 / n);
}

Var row_mean(Var a) {
  Tape &t = a.tape();
  const Tensor &X = a.value();
  const std::size_t rows = X.rows(), cols = X.cols();
  Tensor Y(with_last(X.shape(), 1));
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c)
      s += X.at(r, c);
    Y[r] = s / static_cast<double>(cols);
  }
  const std::size_t ia = a.id();
  return t.record(std::move(Y), {ia},
                  [ia, rows, cols](Tape &tp, std::size_t self) {
                    if (!tp.requires_grad(ia))
                      return;
                    const Tensor &g = tp.grad(self);
                    Tensor &gx = tp.grad(ia);
                    const double inv = 1.0 / static_cast<double>(cols);
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t c = 0; c < cols; ++c)
                        gx[r * cols + c] += g[r] * inv;
                  });
}

Var stack_time(std::span<const Var> steps) {
  if (steps.empty())
    throw ShapeError("stack_time: no steps");
  Tape &t = steps.front().tape();
  const Shape s0 = steps.front().shape();
  if (s0.rank() != 2)
    throw ShapeError("stack_time: steps must be rank 2, got " + s0.str());
  const std::size_t B = s0[0], h = s0[1], T = steps.size();
  std::vector<std::size_t> ids;
  ids.reserve(T);
  Tensor Y(Shape{B, T, h});
  for (std::size_t k = 0; k < T; ++k) {
    same_tape(steps.front(), steps[k]);
    if (!(steps[k].shape() == s0))
      shape_error("stack_time", s0, steps[k].shape());
    const Tensor &X = steps[k].value();
    for (std::size_t b = 0; b < B; ++b)
      std::copy_n(X.data() + b * h, h, Y.data() + (b * T + k) * h);
    ids.push_back(steps[k].id());
  }
  return t.record(std::move(Y), ids, [ids, B, T, h](Tape &tp, std::size_t self) {
    const Tensor &g = tp.grad(self);
    for (std::size_t k = 0; k < T; ++k) {
      if (!tp.requires_grad(ids[k]))
        continue;
      Tensor &gx = tp.grad(ids[k]);
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t j = 0; j < h; ++j)
          gx[b * h + j] += g[(b * T + k) * h + j];
    }
  });
}

Var time_step(Var seq, std::size_t step) {
  Tape &t = seq.tape();
  const Tensor &X = seq.value();
  if (X.shape().rank() != 3 || step >= X.shape()[1])
    throw ShapeError("time_step: step " + std::to_string(step) +
                     " outside " + X.shape().str());
  const std::size_t B = X.shape()[0], T = X.shape()[1], h = X.shape()[2];
  Tensor Y(Shape{B, h});
  for (std::size_t b = 0; b < B; ++b)
    std::copy_n(X.data() + (b * T + step) * h, h, Y.data() + b * h);
  const std::size_t ia = seq.id();
  return t.record(std::move(Y), {ia},
                  [ia, step, B, T, h](Tape &tp, std::size_t self) {
                    if (!tp.requires_grad(ia))
                      return;
                    const Tensor &g = tp.grad(self);
                    Tensor &gx = tp.grad(ia);
                    for (std::size_t b = 0; b < B; ++b)
                      for (std::size_t j = 0; j < h; ++j)
                        gx[(b * T + step) * h + j] += g[b * h + j];
                  });
}

Var batched_dot(Var query, Var keys) {
  Tape &t = same_tape(query, keys);
  const Tensor &Q = query.value();
  const Tensor &K = keys.value();
  if (Q.shape().rank() != 2 || K.shape().rank() != 3 ||
      K.shape()[0] != Q.shape()[0] || K.shape()[2] != Q.shape()[1])
    shape_error("batched_dot", Q.shape(), K.shape());
  const std::size_t B = K.shape()[0], T = K.shape()[1], h = K.shape()[2];
  Tensor Y(Shape{B, T});
  for (std::size_t b = 0; b < B; ++b) {
    ConstMatMap kb(K.data() + b * T * h, static_cast<Eigen::Index>(T),
                   static_cast<Eigen::Index>(h));
    Eigen::Map<const Eigen::VectorXd> q(Q.data() + b * h,
                                        static_cast<Eigen::Index>(h));
    Eigen::Map<Eigen::VectorXd>(Y.data() + b * T,
                                static_cast<Eigen::Index>(T)).noalias() = kb * q;
  }
  const std::size_t iq = query.id(), ik = keys.id();
  return t.record(std::move(Y), {iq, ik},
                  [iq, ik, B, T, h](Tape &tp, std::size_t self) {
                    const Tensor &g = tp.grad(self);
                    const Tensor &Qv = tp.value(iq);
                    const Tensor &Kv = tp.value(ik);
                    for (std::size_t b = 0; b < B; ++b) {
                      Eigen::Map<const Eigen::RowVectorXd> gb(
                        g.data() + b * T, static_cast<Eigen::Index>(T));
                      if (tp.requires_grad(iq)) {
                        ConstMatMap kb(Kv.data() + b * T * h,
                                       static_cast<Eigen::Index>(T),
                                       static_cast<Eigen::Index>(h));
                        Eigen::Map<Eigen::RowVectorXd>(
                          tp.grad(iq).data() + b * h,
                          static_cast<Eigen::Index>(h)) += gb * kb;
                      }
                      if (tp.requires_grad(ik)) {
                        Eigen::Map<const Eigen::RowVectorXd> qb(
                          Qv.data() + b * h, static_cast<Eigen::Index>(h));
                        MatMap gk(tp.grad(ik).data() + b * T * h,
                                  static_cast<Eigen::Index>(T),
                                  static_cast<Eigen::Index>(h));
                        gk.noalias() += gb.transpose() * qb;
                      }
                    }
                  });
}

Var weighted_sum(Var weights, Var values) {
  Tape &t = same_tape(weights, values);
  const Tensor &W = weights.value();
  const Tensor &V = values.value();
  if (W.shape().rank() != 2 || V.shape().rank() != 3 ||
      V.shape()[0] != W.shape()[0] || V.shape()[1] != W.shape()[1])
    shape_error("weighted_sum", W.shape(), V.shape());
  const std::size_t B = V.shape()[0], T = V.shape()[1], h = V.shape()[2];
  Tensor Y(Shape{B, h});
  for (std::size_t b = 0; b < B; ++b) {
    ConstMatMap vb(V.data() + b * T * h, static_cast<Eigen::Index>(T),
                   static_cast<Eigen::Index>(h));
    Eigen::Map<const Eigen::RowVectorXd> wb(W.data() + b * T,
                                            static_cast<Eigen::Index>(T));
    Eigen::Map<Eigen::RowVectorXd>(Y.data() + b * h,
                                   static_cast<Eigen::Index>(h))
      .noalias() = wb * vb;
  }
  const std::size_t iw = weights.id(), iv = values.id();
  return t.record(std::move(Y), {iw, iv},
                  [iw, iv, B, T, h](Tape &tp, std::size_t self) {
                    const Tensor &g = tp.grad(self);
                    const Tensor &Wv = tp.value(iw);
                    const Tensor &Vv = tp.value(iv);
                    for (std::size_t b = 0; b < B; ++b) {
                      Eigen::Map<const Eigen::VectorXd> gb(
                        g.data() + b * h, static_cast<Eigen::Index>(h));
                      if (tp.requires_grad(iw)) {
                        ConstMatMap vb(Vv.data() + b * T * h,
                                       static_cast<Eigen::Index>(T),
                                       static_cast<Eigen::Index>(h));
                        Eigen::Map<Eigen::VectorXd>(
                          tp.grad(iw).data() + b * T,
                          static_cast<Eigen::Index>(T)) += vb * gb;
                      }
                      if (tp.requires_grad(iv)) {
                        Eigen::Map<const Eigen::VectorXd> wb(
                          Wv.data() + b * T, static_cast<Eigen::Index>(T));
                        MatMap gv(tp.grad(iv).data() + b * T * h,
                                  static_cast<Eigen::Index>(T),
                                  static_cast<Eigen::Index>(h));
                        gv.noalias() += wb * gb.transpose();
                      }
                    }
                  });
}

Var lstm_cell(Var x, Var h, Var c, Var w_input, Var w_hidden, Var bias) {
  Tape &t = same_tape(x, h);
  same_tape(x, c);
  same_tape(x, w_input);
  same_tape(x, w_hidden);
  same_tape(x, bias);
  const Tensor &X = x.value();
  const Tensor &H = h.value();
  const Tensor &C = c.value();
  const Tensor &Wx = w_input.value();
  const Tensor &Wh = w_hidden.value();
  const Tensor &b = bias.value();
  const std::size_t B = X.rows(), in = X.cols(), hid = H.cols();
  if (X.shape().rank() != 2 || H.shape().rank() != 2 || H.rows() != B)
    shape_error("lstm_cell(x, h)", X.shape(), H.shape());
  if (!(C.shape() == H.shape()))
    shape_error("lstm_cell(h, c)", H.shape(), C.shape());
  if (Wx.shape().rank() != 2 || Wx.shape()[0] != 4 * hid ||
      Wx.shape()[1] != in)
    shape_error("lstm_cell(w_input)", X.shape(), Wx.shape());
  if (Wh.shape().rank() != 2 || Wh.shape()[0] != 4 * hid ||
      Wh.shape()[1] != hid)
    shape_error("lstm_cell(w_hidden)", H.shape(), Wh.shape());
  if (b.shape().rank() != 1 || b.numel() != 4 * hid)
    shape_error("lstm_cell(bias)", Wh.shape(), b.shape());

  // gates holds the activated (i, f, g, o) blocks per row.
  Tensor gates(Shape{B, 4 * hid});
  auto Z = mat(gates);
  Z.noalias() = mat(X) * mat(Wx).transpose();
  Z.noalias() += mat(H) * mat(Wh).transpose();
  Z.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(
    b.data(), static_cast<Eigen::Index>(4 * hid));

  Tensor out(Shape{B, 2 * hid});
  Tensor tanh_c(Shape{B, hid});
  for (std::size_t r = 0; r < B; ++r) {
    double *z = gates.data() + r * 4 * hid;
    const double *cp = C.data() + r * hid;
    double *hn = out.data() + r * 2 * hid;
    double *cn = hn + hid;
    double *tc = tanh_c.data() + r * hid;
    for (std::size_t j = 0; j < hid; ++j) {
      const double i = sigmoid_scalar(z[j]);
      const double f = sigmoid_scalar(z[hid + j]);
      const double g = std::tanh(z[2 * hid + j]);
      const double o = sigmoid_scalar(z[3 * hid + j]);
      z[j] = i;
      z[hid + j] = f;
      z[2 * hid + j] = g;
      z[3 * hid + j] = o;
      cn[j] = f * cp[j] + i * g;
      tc[j] = std::tanh(cn[j]);
      hn[j] = o * tc[j];
    }
  }

  const std::size_t ix = x.id(), ih = h.id(), ic = c.id(), iwx = w_input.id(),
                    iwh = w_hidden.id(), ib = bias.id();
  return t.record(
    std::move(out), {ix, ih, ic, iwx, iwh, ib},
    [=, gates = std::move(gates),
     tanh_c = std::move(tanh_c)](Tape &tp, std::size_t self) {
      const Tensor &g = tp.grad(self);
      const Tensor &cprev = tp.value(ic);
      Tensor dz(Shape{B, 4 * hid});
      const bool need_c = tp.requires_grad(ic);
      Tensor *gc = need_c ? &tp.grad(ic) : nullptr;
      for (std::size_t r = 0; r < B; ++r) {
        const double *a = gates.data() + r * 4 * hid;
        const double *dh = g.data() + r * 2 * hid;
        const double *dc_in = dh + hid;
        const double *tc = tanh_c.data() + r * hid;
        const double *cp = cprev.data() + r * hid;
        double *d = dz.data() + r * 4 * hid;
        for (std::size_t j = 0; j < hid; ++j) {
          const double i = a[j], f = a[hid + j], gg = a[2 * hid + j],
                       o = a[3 * hid + j];
          const double dc = dc_in[j] + dh[j] * o * (1.0 - tc[j] * tc[j]);
          d[j] = dc * gg * i * (1.0 - i);
          d[hid + j] = dc * cp[j] * f * (1.0 - f);
          d[2 * hid + j] = dc * i * (1.0 - gg * gg);
          d[3 * hid + j] = dh[j] * tc[j] * o * (1.0 - o);
          if (gc)
            (*gc)[r * hid + j] += dc * f;
        }
      }
      const auto DZ = mat(dz);
      if (tp.requires_grad(ix))
        mat(tp.grad(ix)).noalias() += DZ * mat(tp.value(iwx));
      if (tp.requires_grad(ih))
        mat(tp.grad(ih)).noalias() += DZ * mat(tp.value(iwh));
      if (tp.requires_grad(iwx))
        mat(tp.grad(iwx)).noalias() += DZ.transpose() * mat(tp.value(ix));
      if (tp.requires_grad(iwh))
        mat(tp.grad(iwh)).noalias() += DZ.transpose() * mat(tp.value(ih));
      if (tp.requires_grad(ib)) {
        Tensor &gb = tp.grad(ib);
        Eigen::Map<Eigen::RowVectorXd>(gb.data(),
                                       static_cast<Eigen::Index>(4 * hid)) +=
          DZ.colwise().sum();
      }
    });
}

// ---------------------------------------------------------------------------

GradCheckReport grad_check(const LossClosure &loss,
                           std::span<Tensor *const> params, double step,
                           double tolerance, double abs_floor) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (Tensor *p : params)
      vars.push_back(tape.parameter(*p));
    const Var out = loss(tape, vars);
    tape.backward(out);
    for (const Var &v : vars)
      analytic.push_back(tape.grad(v.id()));
  }

  auto evaluate = [&]() {
    Tape tape;
    std::vector<Var> vars;
    for (Tensor *p : params)
      vars.push_back(tape.parameter(*p));
    return loss(tape, vars).value()[0];
  };

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor &p = *params[pi];
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double orig = p[i];
      p[i] = orig + step;
      const double fp = evaluate();
      p[i] = orig - step;
      const double fm = evaluate();
      p[i] = orig;
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[pi][i];
      const double abs_err = std::abs(a - numeric);
      const double noise = 8.0 * std::numeric_limits<double>::epsilon() *
                           (std::abs(fp) + std::abs(fm)) / (2.0 * step);
      const double floor = std::max(abs_floor, noise / tolerance);
      report.max_floor = std::max(report.max_floor, floor);
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      const double rel = abs_err / denom;
      ++report.checked;
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      if (rel > report.max_relative_error || report.checked == 1) {
        report.max_relative_error = std::max(report.max_relative_error, rel);
        if (rel >= report.max_relative_error) {
          report.worst_param = pi;
          report.worst_index = i;
          report.worst_analytic = a;
          report.worst_numeric = numeric;
        }
      }
    }
  }
  report.passed = report.max_relative_error <= tolerance;
  return report;
}

} // namespace idmf::ad
