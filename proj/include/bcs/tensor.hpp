// Copyright 2026 The BCS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BCS_TENSOR_HPP_
#define BCS_TENSOR_HPP_

// Dense rank-2 tensors with tape-based reverse-mode differentiation.
//
// Every tensor is a row-major Eigen matrix; row vectors stand in for rank-1
// data and a 1x1 tensor for scalars. Ops record a backward closure on the
// thread's active Tape (see TapeScope) whenever an input requires a
// gradient; with no active tape nothing is recorded, which is the inference
// path. The only broadcast is a 1xN row applied to every row of an MxN
// operand.

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bcs/error.hpp"
#include "bcs/rng.hpp"

namespace bcs {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using IndexMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// When enabled, every op result is checked for NaN/Inf.
inline std::atomic<bool>& debug_checks_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}
inline void set_debug_checks(bool enabled) { debug_checks_flag().store(enabled); }
inline bool debug_checks_enabled() { return debug_checks_flag().load(std::memory_order_relaxed); }

template <typename Scalar>
class Tape;

namespace detail {

template <typename Scalar>
struct Node {
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
  bool grad_ready = false;
  bool requires_grad = false;
  const Tape<Scalar>* tape = nullptr;

  template <typename Derived>
  void accumulate(const Eigen::MatrixBase<Derived>& g) {
    if (grad_ready) {
      grad += g;
    } else {
      grad = g;
      grad_ready = true;
    }
  }
};

}  // namespace detail

template <typename Scalar>
class Tensor {
 public:
  using Node = detail::Node<Scalar>;
  using MatrixType = Matrix<Scalar>;

  Tensor() : node_(std::make_shared<Node>()) {}
  explicit Tensor(MatrixType value, bool requires_grad = false) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    set_requires_grad(requires_grad);
  }

  static Tensor zeros(Index rows, Index cols, bool requires_grad = false) {
    return Tensor(MatrixType::Zero(rows, cols), requires_grad);
  }
  static Tensor constant(Index rows, Index cols, Scalar v) {
    return Tensor(MatrixType::Constant(rows, cols, v));
  }
  static Tensor scalar(Scalar v) { return constant(1, 1, v); }
  static Tensor row(std::initializer_list<Scalar> values) {
    MatrixType m(1, static_cast<Index>(values.size()));
    Index j = 0;
    for (Scalar v : values) m(0, j++) = v;
    return Tensor(std::move(m));
  }

  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  Index size() const { return node_->value.size(); }
  std::vector<Index> shape() const { return {rows(), cols()}; }

  const MatrixType& value() const { return node_->value; }
  MatrixType& mutable_value() { return node_->value; }
  Scalar item() const {
    if (size() != 1)
      throw ShapeError("item: tensor of shape " + shape_string() + " is not a scalar");
    return node_->value(0, 0);
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) {
    node_->requires_grad = on;
    if (on && !node_->grad_ready) {
      node_->grad = MatrixType::Zero(rows(), cols());
      node_->grad_ready = true;
    }
  }
  bool has_grad() const { return node_->grad_ready; }
  const MatrixType& grad() const {
    if (!node_->grad_ready) {
      node_->grad = MatrixType::Zero(rows(), cols());
      node_->grad_ready = true;
    }
    return node_->grad;
  }
  MatrixType& mutable_grad() {
    grad();
    return node_->grad;
  }
  void zero_grad() {
    node_->grad = MatrixType::Zero(rows(), cols());
    node_->grad_ready = true;
  }

  const std::shared_ptr<Node>& node() const { return node_; }
  bool same(const Tensor& other) const { return node_ == other.node_; }

  std::string shape_string() const {
    return "(" + std::to_string(rows()) + "x" + std::to_string(cols()) + ")";
  }

 private:
  std::shared_ptr<Node> node_;
};

// Records backward closures in execution order and replays them in reverse.
template <typename Scalar>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::function<void()> backward) { entries_.push_back(std::move(backward)); }
  std::size_t size() const { return entries_.size(); }

  // Fills the gradients of every requires-grad leaf reachable from `loss`.
  void backward(const Tensor<Scalar>& loss) {
    if (loss.size() != 1) {
      throw ShapeError("backward: loss must be a scalar, got " + loss.shape_string());
    }
    if (done_) throw Error("backward: called twice without reset");
    done_ = true;
    auto& node = *loss.node();
    if (!node.requires_grad || node.tape != this) {
      warn("backward: loss is not connected to any parameter on this tape; gradients stay zero");
      return;
    }
    node.accumulate(Matrix<Scalar>::Ones(1, 1));
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
  }

  void reset() {
    entries_.clear();
    done_ = false;
  }

  static Tape* active() { return active_; }

 private:
  template <typename S>
  friend class TapeScope;

  static inline thread_local Tape* active_ = nullptr;
  std::vector<std::function<void()>> entries_;
  bool done_ = false;
};

// Makes `tape` the active tape of the current thread for its lifetime.
template <typename Scalar>
class TapeScope {
 public:
  explicit TapeScope(Tape<Scalar>& tape) : previous_(Tape<Scalar>::active_) {
    Tape<Scalar>::active_ = &tape;
  }
  ~TapeScope() { Tape<Scalar>::active_ = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<Scalar>* previous_;
};

namespace detail {

template <typename Scalar>
Tape<Scalar>* recording_tape(std::initializer_list<const Tensor<Scalar>*> inputs) {
  Tape<Scalar>* tape = Tape<Scalar>::active();
  if (!tape) return nullptr;
  for (const auto* t : inputs) {
    if (t->requires_grad()) return tape;
  }
  return nullptr;
}

template <typename Scalar>
Tensor<Scalar> make_result(const char* op, Matrix<Scalar>&& value, Tape<Scalar>* tape) {
  if (debug_checks_enabled() && !value.allFinite()) {
    throw NumericError(std::string(op) + ": non-finite value in output");
  }
  Tensor<Scalar> out(std::move(value));
  if (tape) {
    out.node()->requires_grad = true;
    out.node()->tape = tape;
  }
  return out;
}

template <typename Scalar>
[[noreturn]] void shape_error(const char* op, const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                   b.shape_string());
}

// Same shape, or `b` is a single row broadcast over the rows of `a`.
template <typename Scalar>
bool row_broadcast(const char* op, const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return false;
  if (b.rows() == 1 && a.cols() == b.cols()) return true;
  shape_error(op, a, b);
}

template <typename Scalar>
Matrix<Scalar> broadcast_rows(const Matrix<Scalar>& row, Index rows) {
  return row.replicate(rows, 1);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra and elementwise arithmetic
// ---------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.cols() != b.rows()) detail::shape_error("matmul", a, b);
  auto* tape = detail::recording_tape({&a, &b});
  Matrix<Scalar> v = a.value() * b.value();
  auto out = detail::make_result("matmul", std::move(v), tape);
  if (tape) {
    tape->record([an = a.node(), bn = b.node(), on = out.node()] {
      if (!on->grad_ready) return;
      if (an->requires_grad) an->accumulate(on->grad * bn->value.transpose());
      if (bn->requires_grad) bn->accumulate(an->value.transpose() * on->grad);
    });
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  const bool bc = detail::row_broadcast("add", a, b);
  auto* tape = detail::recording_tape({&a, &b});
  Matrix<Scalar> v = bc ? Matrix<Scalar>(a.value().rowwise() + b.value().row(0))
                        : Matrix<Scalar>(a.value() + b.value());
  auto out = detail::make_result("add", std::move(v), tape);
  if (tape) {
    tape->record([an = a.node(), bn = b.node(), on = out.node(), bc] {
      if (!on->grad_ready) return;
      if (an->requires_grad) an->accumulate(on->grad);
      if (bn->requires_grad) {
        if (bc) {
          bn->accumulate(on->grad.colwise().sum());
        } else {
          bn->accumulate(on->grad);
        }
      }
    });
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  const bool bc = detail::row_broadcast("sub", a, b);
  auto* tape = detail::recording_tape({&a, &b});
  Matrix<Scalar> v = bc ? Matrix<Scalar>(a.value().rowwise() - b.value().row(0))
                        : Matrix<Scalar>(a.value() - b.value());
  auto out = detail::make_result("sub", std::move(v), tape);
  if (tape) {
    tape->record([an = a.node(), bn = b.node(), on = out.node(), bc] {
      if (!on->grad_ready) return;
      if (an->requires_grad) an->accumulate(on->grad);
      if (bn->requires_grad) {
        if (bc) {
          bn->accumulate(-on->grad.colwise().sum());
        } else {
          bn->accumulate(-on->grad);
        }
      }
    });
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  const bool bc = detail::row_broadcast("mul", a, b);
  auto* tape = detail::recording_tape({&a, &b});
  const Matrix<Scalar> bv = bc ? detail::broadcast_rows(b.value(), a.rows()) : b.value();
  Matrix<Scalar> v = a.value().cwiseProduct(bv);
  auto out = detail::make_result("mul", std::move(v), tape);
  if (tape) {
    tape->record([an = a.node(), bn = b.node(), on = out.node(), bc] {
      if (!on->grad_ready) return;
      const Index rows = an->value.rows();
      if (an->requires_grad) {
        an->accumulate(
            on->grad.cwiseProduct(bc ? detail::broadcast_rows(bn->value, rows) : bn->value));
      }
      if (bn->requires_grad) {
        Matrix<Scalar> g = on->grad.cwiseProduct(an->value);
        if (bc) {
          bn->accumulate(g.colwise().sum());
        } else {
          bn->accumulate(g);
        }
      }
    });
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> div(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  const bool bc = detail::row_broadcast("div", a, b);
  auto* tape = detail::recording_tape({&a, &b});
  const Matrix<Scalar> bv = bc ? detail::broadcast_rows(b.value(), a.rows()) : b.value();
  Matrix<Scalar> v = a.value().cwiseQuotient(bv);
  auto out = detail::make_result("div", std::move(v), tape);
  if (tape) {
    tape->record([an = a.node(), bn = b.node(), on = out.node(), bc] {
      if (!on->grad_ready) return;
      const Matrix<Scalar> bv =
          bc ? detail::broadcast_rows(bn->value, an->value.rows()) : bn->value;
      if (an->requires_grad) an->accumulate(on->grad.cwiseQuotient(bv));
      if (bn->requires_grad) {
        Matrix<Scalar> g = -(on->grad.cwiseProduct(an->value)).cwiseQuotient(bv.cwiseProduct(bv));
        if (bc) {
          bn->accumulate(g.colwise().sum());
        } else {
          bn->accumulate(g);
        }
      }
    });
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> operator+(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return add(a, b);
}
template <typename Scalar>
Tensor<Scalar> operator-(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return sub(a, b);
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar s) {
  auto* tape = detail::recording_tape({&a});
  auto out = detail::make_result("scale", Matrix<Scalar>(a.value() * s), tape);
  if (tape) {
    tape->record([an = a.node(), on = out.node(), s] {
      if (on->grad_ready && an->requires_grad) an->accumulate(on->grad * s);
    });
  }
  return out;
}

// Shared shape of the unary elementwise ops: forward map and the derivative
// expressed through input and output values.
template <typename Scalar, typename Fwd, typename Deriv>
Tensor<Scalar> unary_op(const char* name, const Tensor<Scalar>& a, Fwd fwd, Deriv deriv) {
  auto* tape = detail::recording_tape({&a});
  Matrix<Scalar> v = a.value().unaryExpr(fwd);
  auto out = detail::make_result(name, std::move(v), tape);
  if (tape) {
    tape->record([an = a.node(), on = out.node(), deriv] {
      if (!on->grad_ready || !an->requires_grad) return;
      Matrix<Scalar> d = an->value.binaryExpr(on->value, deriv);
      an->accumulate(on->grad.cwiseProduct(d));
    });
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> exp(const Tensor<Scalar>& a) {
  return unary_op<Scalar>(
      "exp", a, [](Scalar x) { return std::exp(x); }, [](Scalar, Scalar y) { return y; });
}

template <typename Scalar>
Tensor<Scalar> log(const Tensor<Scalar>& a) {
  return unary_op<Scalar>(
      "log", a, [](Scalar x) { return std::log(x); },
      [](Scalar x, Scalar) { return Scalar(1) / x; });
}

template <typename Scalar>
Tensor<Scalar> tanh(const Tensor<Scalar>& a) {
  return unary_op<Scalar>(
      "tanh", a, [](Scalar x) { return std::tanh(x); },
      [](Scalar, Scalar y) { return Scalar(1) - y * y; });
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& a) {
  return unary_op<Scalar>(
      "relu", a, [](Scalar x) { return x > Scalar(0) ? x : Scalar(0); },
      [](Scalar x, Scalar) { return x > Scalar(0) ? Scalar(1) : Scalar(0); });
}

template <typename Scalar>
Tensor<Scalar> leaky_relu(const Tensor<Scalar>& a, Scalar slope) {
  return unary_op<Scalar>(
      "leaky_relu", a, [slope](Scalar x) { return x > Scalar(0) ? x : slope * x; },
      [slope](Scalar x, Scalar) { return x > Scalar(0) ? Scalar(1) : slope; });
}

// ---------------------------------------------------------------------------
// Normalisation
// ---------------------------------------------------------------------------

namespace detail {

// Row-wise softmax; rows whose `valid` entries are all false become zero.
template <typename Scalar>
Matrix<Scalar> softmax_rows(const Matrix<Scalar>& x, const BoolMatrix* valid) {
  Matrix<Scalar> y(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    Scalar mx = -std::numeric_limits<Scalar>::infinity();
    for (Index j = 0; j < x.cols(); ++j) {
      if (!valid || (*valid)(i, j)) mx = std::max(mx, x(i, j));
    }
    if (mx == -std::numeric_limits<Scalar>::infinity()) {
      y.row(i).setZero();
      continue;
    }
    Scalar total = 0;
    for (Index j = 0; j < x.cols(); ++j) {
      const Scalar e = (!valid || (*valid)(i, j)) ? std::exp(x(i, j) - mx) : Scalar(0);
      y(i, j) = e;
      total += e;
    }
    y.row(i) /= total;
  }
  return y;
}

template <typename Scalar>
Tensor<Scalar> softmax_impl(const Tensor<Scalar>& a, const BoolMatrix* valid) {
  auto* tape = recording_tape({&a});
  auto out = make_result("softmax", softmax_rows(a.value(), valid), tape);
  if (tape) {
    tape->record([an = a.node(), on = out.node()] {
      if (!on->grad_ready || !an->requires_grad) return;
      const Matrix<Scalar>& y = on->value;
      const auto dot = (on->grad.cwiseProduct(y)).rowwise().sum();
      Matrix<Scalar> g = y.cwiseProduct(on->grad - dot.replicate(1, y.cols()));
      an->accumulate(g);
    });
  }
  return out;
}

}  // namespace detail

template <typename Scalar>
Tensor<Scalar> transpose(const Tensor<Scalar>& a);

// Softmax along `axis` (1 = across each row, 0 = down each column).
template <typename Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& a, int axis = 1) {
  if (axis == 1) return detail::softmax_impl(a, nullptr);
  if (axis == 0) return transpose(detail::softmax_impl(transpose(a), nullptr));
  throw ShapeError("softmax: axis must be 0 or 1, got " + std::to_string(axis));
}

// Row softmax restricted to entries where `valid` is true; invalid entries
// get exactly zero, and a row with no valid entry is all zeros.
template <typename Scalar>
Tensor<Scalar> masked_softmax(const Tensor<Scalar>& a, const BoolMatrix& valid) {
  if (valid.rows() != a.rows() || valid.cols() != a.cols()) {
    throw ShapeError("masked_softmax: mask shape does not match " + a.shape_string());
  }
  return detail::softmax_impl(a, &valid);
}

template <typename Scalar>
Tensor<Scalar> log_softmax(const Tensor<Scalar>& a) {
  auto* tape = detail::recording_tape({&a});
  const Matrix<Scalar>& x = a.value();
  Matrix<Scalar> y(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const Scalar mx = x.row(i).maxCoeff();
    const Scalar lse = mx + std::log((x.row(i).array() - mx).exp().sum());
    y.row(i) = x.row(i).array() - lse;
  }
  auto out = detail::make_result("log_softmax", std::move(y), tape);
  if (tape) {
    tape->record([an = a.node(), on = out.node()] {
      if (!on->grad_ready || !an->requires_grad) return;
      const Matrix<Scalar> p = on->value.array().exp().matrix();
      const auto total = on->grad.rowwise().sum();
      an->accumulate(on->grad - p.cwiseProduct(total.replicate(1, p.cols())));
    });
  }
  return out;
}

// Normalises each row to zero mean and unit variance, then applies the 1xN
// gain and bias.
template <typename Scalar>
Tensor<Scalar> layer_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& gain,
                          const Tensor<Scalar>& bias, Scalar eps = Scalar(1e-5)) {
  if (gain.rows() != 1 || gain.cols() != x.cols()) detail::shape_error("layer_norm", x, gain);
  if (bias.rows() != 1 || bias.cols() != x.cols()) detail::shape_error("layer_norm", x, bias);
  auto* tape = detail::recording_tape({&x, &gain, &bias});
  const Index n = x.cols();
  Matrix<Scalar> xhat(x.rows(), n);
  Matrix<Scalar> inv_std(x.rows(), 1);
  for (Index i = 0; i < x.rows(); ++i) {
    const Scalar mu = x.value().row(i).mean();
    const auto centered = x.value().row(i).array() - mu;
    const Scalar var = centered.square().sum() / static_cast<Scalar>(n);
    inv_std(i, 0) = Scalar(1) / std::sqrt(var + eps);
    xhat.row(i) = centered * inv_std(i, 0);
  }
  Matrix<Scalar> y = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  y.rowwise() += bias.value().row(0);
  auto out = detail::make_result("layer_norm", std::move(y), tape);
  if (tape) {
    tape->record([xn = x.node(), gn = gain.node(), bn = bias.node(), on = out.node(),
                  xhat = std::move(xhat), inv_std = std::move(inv_std)] {
      if (!on->grad_ready) return;
      const Matrix<Scalar>& dy = on->grad;
      if (gn->requires_grad) gn->accumulate(dy.cwiseProduct(xhat).colwise().sum());
      if (bn->requires_grad) bn->accumulate(dy.colwise().sum());
      if (xn->requires_grad) {
        const Index n = xhat.cols();
        Matrix<Scalar> dxhat = (dy.array().rowwise() * gn->value.row(0).array()).matrix();
        Matrix<Scalar> dx(dxhat.rows(), n);
        for (Index i = 0; i < dxhat.rows(); ++i) {
          const Scalar s1 = dxhat.row(i).sum();
          const Scalar s2 = dxhat.row(i).dot(xhat.row(i));
          dx.row(i) =
              (inv_std(i, 0) / static_cast<Scalar>(n)) *
              (static_cast<Scalar>(n) * dxhat.row(i).array() - s1 - xhat.row(i).array() * s2)
                  .matrix();
        }
        xn->accumulate(dx);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Indexing and layout
// ---------------------------------------------------------------------------

// Rows of `table` selected by `ids`.
template <typename Scalar>
Tensor<Scalar> embedding(const Tensor<Scalar>& table, std::span<const int> ids) {
  for (int id : ids) {
    if (id < 0 || id >= table.rows()) {
      throw ShapeError("embedding: id " + std::to_string(id) + " outside table " +
                       table.shape_string());
    }
  }
  auto* tape = detail::recording_tape({&table});
  Matrix<Scalar> v(static_cast<Index>(ids.size()), table.cols());
  for (std::size_t k = 0; k < ids.size(); ++k)
    v.row(static_cast<Index>(k)) = table.value().row(ids[k]);
  auto out = detail::make_result("embedding", std::move(v), tape);
  if (tape) {
    tape->record(
        [tn = table.node(), on = out.node(), ids = std::vector<int>(ids.begin(), ids.end())] {
          if (!on->grad_ready || !tn->requires_grad) return;
          Matrix<Scalar> g = Matrix<Scalar>::Zero(tn->value.rows(), tn->value.cols());
          for (std::size_t k = 0; k < ids.size(); ++k)
            g.row(ids[k]) += on->grad.row(static_cast<Index>(k));
          tn->accumulate(g);
        });
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> gather_rows(const Tensor<Scalar>& a, std::span<const int> idx) {
  return embedding(a, idx);
}

// out.row(idx[k]) += a.row(k); result has `rows` rows.
template <typename Scalar>
Tensor<Scalar> scatter_add_rows(const Tensor<Scalar>& a, std::span<const int> idx, Index rows) {
  if (static_cast<Index>(idx.size()) != a.rows()) {
    throw ShapeError("scatter_add_rows: " + std::to_string(idx.size()) + " indices for " +
                     a.shape_string());
  }
  for (int i : idx) {
    if (i < 0 || i >= rows) throw ShapeError("scatter_add_rows: index out of range");
  }
  auto* tape = detail::recording_tape({&a});
  Matrix<Scalar> v = Matrix<Scalar>::Zero(rows, a.cols());
  for (std::size_t k = 0; k < idx.size(); ++k)
    v.row(idx[k]) += a.value().row(static_cast<Index>(k));
  auto out = detail::make_result("scatter_add_rows", std::move(v), tape);
  if (tape) {
    tape->record([an = a.node(), on = out.node(), idx = std::vector<int>(idx.begin(), idx.end())] {
      if (!on->grad_ready || !an->requires_grad) return;
      Matrix<Scalar> g(static_cast<Index>(idx.size()), an->value.cols());
      for (std::size_t k = 0; k < idx.size(); ++k)
        g.row(static_cast<Index>(k)) = on->grad.row(idx[k]);
      an->accumulate(g);
    });
  }
  return out;
}

// out(i, j) = a(i, idx(i, j)).
template <typename Scalar>
Tensor<Scalar> gather_cols(const Tensor<Scalar>& a, const IndexMatrix& idx) {
  if (idx.rows() != a.rows())
    throw ShapeError("gather_cols: index rows differ from " + a.shape_string());
  if (idx.size() > 0 && (idx.minCoeff() < 0 || idx.maxCoeff() >= a.cols())) {
    throw ShapeError("gather_cols: index out of range for " + a.shape_string());
  }
  auto* tape = detail::recording_tape({&a});
  Matrix<Scalar> v(idx.rows(), idx.cols());
  for (Index i = 0; i < idx.rows(); ++i) {
    for (Index j = 0; j < idx.cols(); ++j) v(i, j) = a.value()(i, idx(i, j));
  }
  auto out = detail::make_result("gather_cols", std::move(v), tape);
  if (tape) {
    tape->record([an = a.node(), on = out.node(), idx] {
      if (!on->grad_ready || !an->requires_grad) return;
      Matrix<Scalar> g = Matrix<Scalar>::Zero(an->value.rows(), an->value.cols());
      for (Index i = 0; i < idx.rows(); ++i) {
        for (Index j = 0; j < idx.cols(); ++j) g(i, idx(i, j)) += on->grad(i, j);
      }
      an->accumulate(g);
    });
  }
  return out;
}

// Adjoint of gather_cols: out(i, c) = sum of a(i, j) over j with idx(i, j) = c.
template <typename Scalar>
Tensor<Scalar> scatter_cols(const Tensor<Scalar>& a, const IndexMatrix& idx, Index cols) {
  if (idx.rows() != a.rows() || idx.cols() != a.cols()) {
    throw ShapeError("scatter_cols: index shape differs from " + a.shape_string());
  }
  if (idx.size() > 0 && (idx.minCoeff() < 0 || idx.maxCoeff() >= cols)) {
    throw ShapeError("scatter_cols: index out of range");
  }
  auto* tape = detail::recording_tape({&a});
  Matrix<Scalar> v = Matrix<Scalar>::Zero(a.rows(), cols);
  for (Index i = 0; i < idx.rows(); ++i) {
    for (Index j = 0; j < idx.cols(); ++j) v(i, idx(i, j)) += a.value()(i, j);
  }
  auto out = detail::make_result("scatter_cols", std::move(v), tape);
  if (tape) {
    tape->record([an = a.node(), on = out.node(), idx] {
      if (!on->grad_ready || !an->requires_grad) return;
      Matrix<Scalar> g(idx.rows(), idx.cols());
      for (Index i = 0; i < idx.rows(); ++i) {
        for (Index j = 0; j < idx.cols(); ++j) g(i, j) = on->grad(i, idx(i, j));
      }
      an->accumulate(g);
    });
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> transpose(const Tensor<Scalar>& a) {
  auto* tape = detail::recording_tape({&a});
  auto out = detail::make_result("transpose", Matrix<Scalar>(a.value().transpose()), tape);
  if (tape) {
    tape->record([an = a.node(), on = out.node()] {
      if (on->grad_ready && an->requires_grad) an->accumulate(on->grad.transpose());
    });
  }
  return out;
}

// Contiguous block along `axis`: rows [begin, begin+count) for axis 0,
// columns for axis 1.
template <typename Scalar>
Tensor<Scalar> slice(const Tensor<Scalar>& a, int axis, Index begin, Index count) {
  const Index extent = axis == 0 ? a.rows() : a.cols();
  if ((axis != 0 && axis != 1) || begin < 0 || count < 0 || begin + count > extent) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") on axis " + std::to_string(axis) + " of " +
                     a.shape_string());
  }
  auto* tape = detail::recording_tape({&a});
  Matrix<Scalar> v = axis == 0 ? Matrix<Scalar>(a.value().middleRows(begin, count))
                               : Matrix<Scalar>(a.value().middleCols(begin, count));
  auto out = detail::make_result("slice", std::move(v), tape);
  if (tape) {
    tape->record([an = a.node(), on = out.node(), axis, begin, count] {
      if (!on->grad_ready || !an->requires_grad) return;
      Matrix<Scalar> g = Matrix<Scalar>::Zero(an->value.rows(), an->value.cols());
      if (axis == 0) {
        g.middleRows(begin, count) = on->grad;
      } else {
        g.middleCols(begin, count) = on->grad;
      }
      an->accumulate(g);
    });
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> concat(const std::vector<Tensor<Scalar>>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
  Index rows = 0, cols = 0;
  for (const auto& p : parts) {
    if (axis == 0) {
      if (p.cols() != parts.front().cols()) detail::shape_error("concat", parts.front(), p);
      rows += p.rows();
      cols = p.cols();
    } else {
      if (p.rows() != parts.front().rows()) detail::shape_error("concat", parts.front(), p);
      cols += p.cols();
      rows = p.rows();
    }
  }
  Tape<Scalar>* tape = Tape<Scalar>::active();
  bool any = false;
  for (const auto& p : parts) any = any || p.requires_grad();
  if (!any) tape = nullptr;
  Matrix<Scalar> v(rows, cols);
  Index offset = 0;
  for (const auto& p : parts) {
    if (axis == 0) {
      v.middleRows(offset, p.rows()) = p.value();
      offset += p.rows();
    } else {
      v.middleCols(offset, p.cols()) = p.value();
      offset += p.cols();
    }
  }
  auto out = detail::make_result("concat", std::move(v), tape);
  if (tape) {
    std::vector<std::shared_ptr<detail::Node<Scalar>>> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    tape->record([nodes = std::move(nodes), on = out.node(), axis] {
      if (!on->grad_ready) return;
      Index offset = 0;
      for (const auto& n : nodes) {
        const Index extent = axis == 0 ? n->value.rows() : n->value.cols();
        if (n->requires_grad) {
          if (axis == 0) {
            n->accumulate(on->grad.middleRows(offset, extent));
          } else {
            n->accumulate(on->grad.middleCols(offset, extent));
          }
        }
        offset += extent;
      }
    });
  }
  return out;
}

// Entries where `mask` is true are replaced by `value` and pass no gradient.
template <typename Scalar>
Tensor<Scalar> masked_fill(const Tensor<Scalar>& a, const BoolMatrix& mask, Scalar value) {
  if (mask.rows() != a.rows() || mask.cols() != a.cols()) {
    throw ShapeError("masked_fill: mask shape does not match " + a.shape_string());
  }
  auto* tape = detail::recording_tape({&a});
  Matrix<Scalar> v = a.value();
  for (Index i = 0; i < v.rows(); ++i) {
    for (Index j = 0; j < v.cols(); ++j) {
      if (mask(i, j)) v(i, j) = value;
    }
  }
  auto out = detail::make_result("masked_fill", std::move(v), tape);
  if (tape) {
    tape->record([an = a.node(), on = out.node(), mask] {
      if (!on->grad_ready || !an->requires_grad) return;
      Matrix<Scalar> g = on->grad;
      for (Index i = 0; i < g.rows(); ++i) {
        for (Index j = 0; j < g.cols(); ++j) {
          if (mask(i, j)) g(i, j) = 0;
        }
      }
      an->accumulate(g);
    });
  }
  return out;
}

// Multiplies row i of `a` by s(i, 0).
template <typename Scalar>
Tensor<Scalar> scale_rows(const Tensor<Scalar>& a, const Tensor<Scalar>& s) {
  if (s.cols() != 1 || s.rows() != a.rows()) detail::shape_error("scale_rows", a, s);
  auto* tape = detail::recording_tape({&a, &s});
  Matrix<Scalar> v = (a.value().array().colwise() * s.value().col(0).array()).matrix();
  auto out = detail::make_result("scale_rows", std::move(v), tape);
  if (tape) {
    tape->record([an = a.node(), sn = s.node(), on = out.node()] {
      if (!on->grad_ready) return;
      if (an->requires_grad) {
        an->accumulate((on->grad.array().colwise() * sn->value.col(0).array()).matrix());
      }
      if (sn->requires_grad) sn->accumulate(on->grad.cwiseProduct(an->value).rowwise().sum());
    });
  }
  return out;
}

// Softmax over groups of a column vector: entries sharing segment id s are
// normalised together.
template <typename Scalar>
Tensor<Scalar> segment_softmax(const Tensor<Scalar>& logits, std::span<const int> segment,
                               Index num_segments) {
  if (logits.cols() != 1 || logits.rows() != static_cast<Index>(segment.size())) {
    throw ShapeError("segment_softmax: expected a column of " + std::to_string(segment.size()) +
                     " logits, got " + logits.shape_string());
  }
  const Matrix<Scalar>& x = logits.value();
  std::vector<Scalar> mx(static_cast<std::size_t>(num_segments),
                         -std::numeric_limits<Scalar>::infinity());
  for (std::size_t e = 0; e < segment.size(); ++e) {
    if (segment[e] < 0 || segment[e] >= num_segments)
      throw ShapeError("segment_softmax: bad segment id");
    mx[segment[e]] = std::max(mx[segment[e]], x(static_cast<Index>(e), 0));
  }
  std::vector<Scalar> total(static_cast<std::size_t>(num_segments), Scalar(0));
  Matrix<Scalar> y(x.rows(), 1);
  for (std::size_t e = 0; e < segment.size(); ++e) {
    y(static_cast<Index>(e), 0) = std::exp(x(static_cast<Index>(e), 0) - mx[segment[e]]);
    total[segment[e]] += y(static_cast<Index>(e), 0);
  }
  for (std::size_t e = 0; e < segment.size(); ++e) y(static_cast<Index>(e), 0) /= total[segment[e]];

  auto* tape = detail::recording_tape({&logits});
  auto out = detail::make_result("segment_softmax", std::move(y), tape);
  if (tape) {
    tape->record([ln = logits.node(), on = out.node(),
                  seg = std::vector<int>(segment.begin(), segment.end()), num_segments] {
      if (!on->grad_ready || !ln->requires_grad) return;
      std::vector<Scalar> dot(static_cast<std::size_t>(num_segments), Scalar(0));
      for (std::size_t e = 0; e < seg.size(); ++e) {
        dot[seg[e]] += on->grad(static_cast<Index>(e), 0) * on->value(static_cast<Index>(e), 0);
      }
      Matrix<Scalar> g(static_cast<Index>(seg.size()), 1);
      for (std::size_t e = 0; e < seg.size(); ++e) {
        const Index r = static_cast<Index>(e);
        g(r, 0) = on->value(r, 0) * (on->grad(r, 0) - dot[seg[e]]);
      }
      ln->accumulate(g);
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions and losses
// ---------------------------------------------------------------------------

// axis 0 sums down columns (1xN), axis 1 across rows (Mx1).
template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& a, int axis) {
  if (axis != 0 && axis != 1) throw ShapeError("sum: axis must be 0 or 1");
  auto* tape = detail::recording_tape({&a});
  Matrix<Scalar> v = axis == 0 ? Matrix<Scalar>(a.value().colwise().sum())
                               : Matrix<Scalar>(a.value().rowwise().sum());
  auto out = detail::make_result("sum", std::move(v), tape);
  if (tape) {
    tape->record([an = a.node(), on = out.node(), axis] {
      if (!on->grad_ready || !an->requires_grad) return;
      if (axis == 0) {
        an->accumulate(on->grad.replicate(an->value.rows(), 1));
      } else {
        an->accumulate(on->grad.replicate(1, an->value.cols()));
      }
    });
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> sum_all(const Tensor<Scalar>& a) {
  auto* tape = detail::recording_tape({&a});
  Matrix<Scalar> v = Matrix<Scalar>::Constant(1, 1, a.value().sum());
  auto out = detail::make_result("sum_all", std::move(v), tape);
  if (tape) {
    tape->record([an = a.node(), on = out.node()] {
      if (!on->grad_ready || !an->requires_grad) return;
      an->accumulate(Matrix<Scalar>::Constant(an->value.rows(), an->value.cols(), on->grad(0, 0)));
    });
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& a, int axis) {
  const Index n = axis == 0 ? a.rows() : a.cols();
  return scale(sum(a, axis), Scalar(1) / static_cast<Scalar>(std::max<Index>(n, 1)));
}

template <typename Scalar>
Tensor<Scalar> mean_all(const Tensor<Scalar>& a) {
  return scale(sum_all(a), Scalar(1) / static_cast<Scalar>(std::max<Index>(a.size(), 1)));
}

// Sum of -logp(i, targets[i]) over rows whose target differs from
// `ignore_id`. Returns a 1x1 tensor.
template <typename Scalar>
Tensor<Scalar> nll_sum(const Tensor<Scalar>& logp, std::span<const int> targets, int ignore_id) {
  if (static_cast<Index>(targets.size()) != logp.rows()) {
    throw ShapeError("nll_sum: " + std::to_string(targets.size()) + " targets for " +
                     logp.shape_string());
  }
  Scalar total = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] == ignore_id) continue;
    if (targets[i] < 0 || targets[i] >= logp.cols())
      throw ShapeError("nll_sum: target out of range");
    total -= logp.value()(static_cast<Index>(i), targets[i]);
  }
  auto* tape = detail::recording_tape({&logp});
  Matrix<Scalar> v = Matrix<Scalar>::Constant(1, 1, total);
  auto out = detail::make_result("nll_sum", std::move(v), tape);
  if (tape) {
    tape->record([ln = logp.node(), on = out.node(),
                  t = std::vector<int>(targets.begin(), targets.end()), ignore_id] {
      if (!on->grad_ready || !ln->requires_grad) return;
      Matrix<Scalar> g = Matrix<Scalar>::Zero(ln->value.rows(), ln->value.cols());
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] != ignore_id) g(static_cast<Index>(i), t[i]) = -on->grad(0, 0);
      }
      ln->accumulate(g);
    });
  }
  return out;
}

// Inverted dropout. Identity when `train` is false or `rate` is 0.
template <typename Scalar>
Tensor<Scalar> dropout(const Tensor<Scalar>& a, double rate, Rng& rng, bool train) {
  if (!train || rate <= 0.0) return a;
  if (rate >= 1.0) throw Error("dropout: rate must be below 1");
  const Scalar keep_scale = Scalar(1.0 / (1.0 - rate));
  Matrix<Scalar> m(a.rows(), a.cols());
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = uniform01(rng) >= rate ? keep_scale : Scalar(0);
  }
  return mul(a, Tensor<Scalar>(std::move(m)));
}

}  // namespace bcs

#endif  // BCS_TENSOR_HPP_
