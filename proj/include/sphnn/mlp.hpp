#pragma once

// Dense feedforward networks used for learned energies, forces, damping and
// diffusion. Hidden layers share one activation; the output layer is linear.
//
// Two evaluation paths exist: a plain Eigen path for simulation/rollout, and
// a tape path that wires the computation into an ad::Tape for training. The
// tape path can also emit the input gradient as graph nodes (the reverse
// sweep written out with forward primitives), which is what makes losses over
// grad_x H trainable with a single backward pass.

#include "sphnn/autodiff.hpp"

#include <nlohmann/json_fwd.hpp>

#include <vector>

namespace sphnn {

enum class Activation { tanh, softplus, identity };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct Mlp {
  std::vector<int> layer_dims;
  std::vector<Mat> weights;  // weights[l] has shape layer_dims[l+1] x layer_dims[l]
  std::vector<Vec> biases;
  Activation activation = Activation::tanh;

  static Mlp create(const std::vector<int>& dims, Activation act, std::uint64_t seed);
  /// All weights/biases zero (output equals the bias chain through activations).
  static Mlp zeros(const std::vector<int>& dims, Activation act);

  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  int layer_count() const { return static_cast<int>(weights.size()); }
  std::size_t parameter_count() const;

  Vec eval(const Vec& x) const;
  /// Scalar-output nets only: value and input gradient, no tape involved.
  std::pair<double, Vec> eval_with_input_gradient(const Vec& x) const;

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);
};

namespace ad {

/// Per-tape parameter leaves for one Mlp, in a fixed traversal order
/// (weights[0], biases[0], weights[1], ...). Training reads gradients back in
/// the same order.
struct BoundMlp {
  const Mlp* def = nullptr;
  std::vector<Value> weights;
  std::vector<Value> biases;
};

BoundMlp bind(Tape& tape, const Mlp& net);

/// Forward pass on the tape. `x` must be a column vector node.
Value forward(Tape& tape, const BoundMlp& net, Value x);

/// Scalar-output nets: returns {output, grad_x output} with the gradient
/// expressed as graph nodes, so losses of the gradient backpropagate into the
/// parameters exactly (second-order support).
std::pair<Value, Value> forward_with_input_gradient(Tape& tape, const BoundMlp& net,
                                                    Value x);

}  // namespace ad
}  // namespace sphnn
