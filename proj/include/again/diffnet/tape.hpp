#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <utility>

#include "again/diffnet/tensor.hpp"

namespace again {

/// A learnable tensor with its gradient buffer and Adam moments.
template <class T>
struct Parameter {
  std::string name;
  std::string role;  // encoder | classifier | discriminator
  Matrix<T> value;
  Matrix<T> grad;
  Matrix<T> m;
  Matrix<T> v;
  std::int64_t step = 0;

  Parameter() = default;
  Parameter(std::string n, std::string r, Matrix<T> init)
      : name(std::move(n)), role(std::move(r)), value(std::move(init)) {
    reset_state();
  }

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  void reset_state() {
    zero_grad();
    m.setZero(value.rows(), value.cols());
    v.setZero(value.rows(), value.cols());
    step = 0;
  }
  Index size() const { return value.size(); }
};

template <class T>
class Tape;

/// Handle to a node recorded on a Tape.
template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Matrix<T>& value() const { return tape->value(*this); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  /// Scalar value of a 1x1 node.
  T item() const { return value()(0, 0); }
};

/// Reverse-mode recorder. One tape per forward/backward pass; not thread-safe.
template <class T>
class Tape {
 public:
  using Mat = Matrix<T>;
  using Backward = std::function<void(Tape&, const Mat&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Mat value) { return push("constant", std::move(value), false, {}, nullptr); }

  /// Leaf bound to `p`. With trainable=false the value participates but
  /// nothing is accumulated into p.grad.
  Var<T> param(Parameter<T>& p, bool trainable = true) {
    return push("param", p.value, trainable, {}, trainable ? &p : nullptr);
  }

  /// Records an op output. `back` runs only if some input needs a gradient.
  Var<T> record(const char* op, Mat value, std::initializer_list<Var<T>> inputs, Backward back) {
    ensure_finite(value, op);
    bool needs = false;
    for (const auto& in : inputs) needs = needs || nodes_[in.id].needs_grad;
    return push(op, std::move(value), needs, needs ? std::move(back) : Backward{}, nullptr);
  }

  const Mat& value(Var<T> v) const { return nodes_[v.id].value; }
  bool needs_grad(Var<T> v) const { return nodes_[v.id].needs_grad; }

  /// Gradient buffer of `v`, zero-initialised on first touch.
  Mat& grad(Var<T> v) {
    auto& n = nodes_[v.id];
    if (n.grad.size() == 0) n.grad.setZero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  /// Backpropagates from a 1x1 node and accumulates into bound parameters.
  void backward(Var<T> loss) {
    if (value(loss).size() != 1) throw shape_error("backward expects a scalar loss, got " + shape_str(value(loss)));
    if (!needs_grad(loss)) return;
    grad(loss).setOnes();
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (!n.needs_grad || n.grad.size() == 0) continue;
      if (n.back) n.back(*this, n.grad);
      if (n.param != nullptr) n.param->grad += n.grad;
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    const char* op;
    Mat value;
    Mat grad;
    bool needs_grad;
    Backward back;
    Parameter<T>* param;
  };

  Var<T> push(const char* op, Mat value, bool needs, Backward back, Parameter<T>* p) {
    nodes_.push_back(Node{op, std::move(value), Mat{}, needs, std::move(back), p});
    return Var<T>{this, nodes_.size() - 1};
  }

  std::deque<Node> nodes_;
};

}  // namespace again
