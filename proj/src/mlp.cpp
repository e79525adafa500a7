#include "sphnn/mlp.hpp"

#include <nlohmann/json.hpp>

namespace sphnn {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::softplus: return "softplus";
    case Activation::identity: return "identity";
  }
  throw ParameterError("unknown activation tag");
}

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "softplus") return Activation::softplus;
  if (name == "identity") return Activation::identity;
  throw ParameterError("unknown activation: " + name);
}

static void check_dims(const std::vector<int>& dims) {
  if (dims.size() < 2) throw ParameterError("Mlp needs at least input and output dims");
  for (int d : dims)
    if (d <= 0) throw ParameterError("Mlp layer dims must be positive");
}

Mlp Mlp::create(const std::vector<int>& dims, Activation act, std::uint64_t seed) {
  check_dims(dims);
  Mlp net;
  net.layer_dims = dims;
  net.activation = act;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l];
    const int fan_out = dims[l + 1];
    const double s = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
    Mat w(fan_out, fan_in);
    for (int i = 0; i < fan_out; ++i)
      for (int j = 0; j < fan_in; ++j) w(i, j) = s * rng.normal();
    net.weights.push_back(std::move(w));
    net.biases.push_back(Vec::Zero(fan_out));
  }
  return net;
}

Mlp Mlp::zeros(const std::vector<int>& dims, Activation act) {
  check_dims(dims);
  Mlp net;
  net.layer_dims = dims;
  net.activation = act;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    net.weights.push_back(Mat::Zero(dims[l + 1], dims[l]));
    net.biases.push_back(Vec::Zero(dims[l + 1]));
  }
  return net;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  return n;
}

static double act_apply(Activation a, double x) {
  switch (a) {
    case Activation::tanh: return std::tanh(x);
    case Activation::softplus: return x > 30.0 ? x : std::log1p(std::exp(x));
    case Activation::identity: return x;
  }
  return x;
}

static double act_prime(Activation a, double x, double y) {
  // y = act(x), handy for tanh
  switch (a) {
    case Activation::tanh: return 1.0 - y * y;
    case Activation::softplus: return 1.0 / (1.0 + std::exp(-x));
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

Vec Mlp::eval(const Vec& x) const {
  if (x.size() != input_dim())
    throw ShapeError("Mlp::eval: input size " + std::to_string(x.size()) +
                     " != " + std::to_string(input_dim()));
  Vec a = x;
  const int L = layer_count();
  for (int l = 0; l < L; ++l) {
    Vec z = weights[l] * a + biases[l];
    if (l + 1 < L)
      for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = act_apply(activation, z(i));
    a = std::move(z);
  }
  return a;
}

std::pair<double, Vec> Mlp::eval_with_input_gradient(const Vec& x) const {
  if (output_dim() != 1)
    throw ShapeError("eval_with_input_gradient requires a scalar-output net");
  if (x.size() != input_dim()) throw ShapeError("eval_with_input_gradient: bad input size");
  const int L = layer_count();
  std::vector<Vec> pre(L), post(L);
  Vec a = x;
  for (int l = 0; l < L; ++l) {
    pre[l] = weights[l] * a + biases[l];
    post[l] = pre[l];
    if (l + 1 < L)
      for (Eigen::Index i = 0; i < post[l].size(); ++i)
        post[l](i) = act_apply(activation, pre[l](i));
    a = post[l];
  }
  // reverse sweep
  Vec g = weights[L - 1].transpose() * Vec::Ones(1);
  for (int l = L - 2; l >= 0; --l) {
    for (Eigen::Index i = 0; i < g.size(); ++i)
      g(i) *= act_prime(activation, pre[l](i), post[l](i));
    g = weights[l].transpose() * g;
  }
  return {post[L - 1](0), g};
}

nlohmann::json Mlp::to_json() const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["layer_dims"] = layer_dims;
  j["activation"] = activation_name(activation);
  std::vector<std::vector<double>> ws, bs;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const Mat& w = weights[l];
    std::vector<double> flat(static_cast<std::size_t>(w.size()));
    // row-major flattening
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat[k++] = w(r, c);
    ws.push_back(std::move(flat));
    bs.emplace_back(biases[l].data(), biases[l].data() + biases[l].size());
  }
  j["weights"] = ws;
  j["biases"] = bs;
  return j;
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  if (!j.contains("format_version") || j.at("format_version").get<int>() != 1)
    throw ConfigError("Mlp checkpoint: unsupported or missing format_version");
  Mlp net;
  net.layer_dims = j.at("layer_dims").get<std::vector<int>>();
  check_dims(net.layer_dims);
  net.activation = activation_from_name(j.at("activation").get<std::string>());
  const auto ws = j.at("weights").get<std::vector<std::vector<double>>>();
  const auto bs = j.at("biases").get<std::vector<std::vector<double>>>();
  if (ws.size() + 1 != net.layer_dims.size() || bs.size() != ws.size())
    throw ConfigError("Mlp checkpoint: layer count mismatch");
  for (std::size_t l = 0; l + 1 < net.layer_dims.size(); ++l) {
    const int rows = net.layer_dims[l + 1];
    const int cols = net.layer_dims[l];
    if (ws[l].size() != static_cast<std::size_t>(rows) * cols ||
        bs[l].size() != static_cast<std::size_t>(rows))
      throw ConfigError("Mlp checkpoint: weight shape mismatch");
    Mat w(rows, cols);
    std::size_t k = 0;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) w(r, c) = ws[l][k++];
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::Map<const Vec>(bs[l].data(), rows));
  }
  return net;
}

namespace ad {

BoundMlp bind(Tape& tape, const Mlp& net) {
  BoundMlp b;
  b.def = &net;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    b.weights.push_back(tape.leaf(net.weights[l]));
    b.biases.push_back(tape.leaf(Mat(net.biases[l])));
  }
  return b;
}

static Value activate(Tape& tape, Activation act, Value z) {
  switch (act) {
    case Activation::tanh: return tape.tanh(z);
    case Activation::softplus: return tape.softplus(z);
    case Activation::identity: return z;
  }
  return z;
}

Value forward(Tape& tape, const BoundMlp& net, Value x) {
  if (x.rows() != net.def->input_dim() || x.cols() != 1)
    throw ShapeError("ad::forward: input must be a column vector of size " +
                     std::to_string(net.def->input_dim()));
  const int L = net.def->layer_count();
  Value a = x;
  for (int l = 0; l < L; ++l) {
    Value z = tape.add(tape.matmul(net.weights[l], a), net.biases[l]);
    a = (l + 1 < L) ? activate(tape, net.def->activation, z) : z;
  }
  return a;
}

std::pair<Value, Value> forward_with_input_gradient(Tape& tape, const BoundMlp& net,
                                                    Value x) {
  if (net.def->output_dim() != 1)
    throw ShapeError("input gradient requires a scalar-output net");
  if (x.rows() != net.def->input_dim() || x.cols() != 1)
    throw ShapeError("input gradient: bad input shape");
  const int L = net.def->layer_count();
  const Activation act = net.def->activation;

  std::vector<Value> pre(L), post(L);
  Value a = x;
  for (int l = 0; l < L; ++l) {
    pre[l] = tape.add(tape.matmul(net.weights[l], a), net.biases[l]);
    post[l] = (l + 1 < L) ? activate(tape, act, pre[l]) : pre[l];
    a = post[l];
  }

  // Reverse sweep expressed with forward primitives so the gradient itself is
  // differentiable. d(out)/d(a_{L-2}) = W_{L-1}^T, then peel layers.
  Value g = tape.transpose(net.weights[L - 1]);
  for (int l = L - 2; l >= 0; --l) {
    Value sp;
    switch (act) {
      case Activation::tanh: {
        Value ones = tape.leaf(Mat::Ones(post[l].rows(), 1));
        sp = tape.sub(ones, tape.hadamard(post[l], post[l]));
        break;
      }
      case Activation::softplus:
        sp = tape.sigmoid(pre[l]);
        break;
      case Activation::identity:
        sp = tape.leaf(Mat::Ones(post[l].rows(), 1));
        break;
    }
    g = tape.matmul(tape.transpose(net.weights[l]), tape.hadamard(sp, g));
  }
  return {post[L - 1], g};
}

}  // namespace ad
}  // namespace sphnn
