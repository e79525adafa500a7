#pragma once

// Reverse-mode automatic differentiation over matrix-valued expression nodes.
//
// A Tape owns the nodes; creation order is a topological order, so backward()
// is a single reverse sweep over the reachable set and visits each node once.
// Gradients of gradients are obtained structurally: callers that need
// d(loss(grad_x f))/d(params) build the input-gradient of f out of the same
// primitives (see Mlp::input_gradient), after which one ordinary backward
// pass is exact.

#include "sphnn/common.hpp"

#include <memory>
#include <vector>

namespace sphnn::ad {

enum class Op {
  leaf,
  add,
  sub,
  neg,
  scale,
  matmul,
  transpose,
  hadamard,
  sum,
  mean,
  dot,
  tanh,
  softplus,
  sigmoid,
  relu,
  abs,
  mul_scalar,
  div_scalar,
  segment,
  vconcat,
  reshape,
};

class Tape;

namespace detail {
struct Node {
  Mat data;
  Mat grad;  // same shape as data, zero until backward touches it
  Op op = Op::leaf;
  std::vector<Node*> parents;
  std::function<void(Node&)> pull;  // accumulate this->grad into parents
  std::size_t index = 0;            // creation order within the tape
};
}  // namespace detail

/// Lightweight handle into a Tape.
class Value {
 public:
  Value() = default;

  bool valid() const { return node_ != nullptr; }
  const Mat& data() const { return node_->data; }
  const Mat& grad() const { return node_->grad; }
  Eigen::Index rows() const { return node_->data.rows(); }
  Eigen::Index cols() const { return node_->data.cols(); }

  double scalar() const {
    if (rows() != 1 || cols() != 1) throw ShapeError("Value::scalar on non-1x1 value");
    return node_->data(0, 0);
  }

 private:
  friend class Tape;
  explicit Value(detail::Node* n) : node_(n) {}
  detail::Node* node_ = nullptr;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t size() const { return nodes_.size(); }

  /// Differentiable input/parameter node.
  Value leaf(Mat data);
  Value leaf(const Vec& data) { return leaf(Mat(data)); }
  Value scalar(double v) { return leaf(Mat::Constant(1, 1, v)); }

  // -- primitives -----------------------------------------------------------
  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value neg(Value a);
  Value scale(Value a, double c);
  Value matmul(Value a, Value b);
  Value transpose(Value a);
  Value hadamard(Value a, Value b);
  Value sum(Value a);
  Value mean(Value a);
  Value dot(Value a, Value b);
  Value tanh(Value a);
  Value softplus(Value a);
  Value sigmoid(Value a);
  Value relu(Value a);
  Value abs(Value a);
  Value mul_scalar(Value a, Value s);  // s is 1x1
  Value div_scalar(Value a, Value s);  // s is 1x1
  Value segment(Value a, Eigen::Index row0, Eigen::Index nrows);
  Value vconcat(Value a, Value b);
  Value reshape(Value a, Eigen::Index rows, Eigen::Index cols);

  // -- composites -----------------------------------------------------------
  Value squared_norm(Value a) { return dot(a, a); }
  Value l1_norm(Value a) { return sum(abs(a)); }

  /// Reverse sweep from a scalar root. Grads accumulate, so call zero_grad()
  /// between repeated passes on the same tape.
  void backward(Value root);
  void zero_grad();

 private:
  Value make(Mat data, Op op, std::vector<detail::Node*> parents,
             std::function<void(detail::Node&)> pull);
  static detail::Node* unwrap(Value v);

  std::vector<std::unique_ptr<detail::Node>> nodes_;
};

}  // namespace sphnn::ad
