#include "sphnn/autodiff.hpp"

namespace sphnn::ad {

using detail::Node;

Node* Tape::unwrap(Value v) {
  if (!v.valid()) throw ShapeError("use of empty Value");
  return v.node_;
}

Value Tape::make(Mat data, Op op, std::vector<Node*> parents,
                 std::function<void(Node&)> pull) {
  auto node = std::make_unique<Node>();
  node->grad = Mat::Zero(data.rows(), data.cols());
  node->data = std::move(data);
  node->op = op;
  node->parents = std::move(parents);
  node->pull = std::move(pull);
  node->index = nodes_.size();
  nodes_.push_back(std::move(node));
  return Value(nodes_.back().get());
}

Value Tape::leaf(Mat data) { return make(std::move(data), Op::leaf, {}, nullptr); }

static void check_same_shape(const Node* a, const Node* b, const char* op) {
  if (a->data.rows() != b->data.rows() || a->data.cols() != b->data.cols())
    throw ShapeError(std::string(op) + ": shape mismatch");
}

Value Tape::add(Value av, Value bv) {
  Node* a = unwrap(av);
  Node* b = unwrap(bv);
  check_same_shape(a, b, "add");
  return make(a->data + b->data, Op::add, {a, b}, [](Node& n) {
    n.parents[0]->grad += n.grad;
    n.parents[1]->grad += n.grad;
  });
}

Value Tape::sub(Value av, Value bv) {
  Node* a = unwrap(av);
  Node* b = unwrap(bv);
  check_same_shape(a, b, "sub");
  return make(a->data - b->data, Op::sub, {a, b}, [](Node& n) {
    n.parents[0]->grad += n.grad;
    n.parents[1]->grad -= n.grad;
  });
}

Value Tape::neg(Value av) {
  Node* a = unwrap(av);
  return make(-a->data, Op::neg, {a}, [](Node& n) { n.parents[0]->grad -= n.grad; });
}

Value Tape::scale(Value av, double c) {
  Node* a = unwrap(av);
  return make(c * a->data, Op::scale, {a},
              [c](Node& n) { n.parents[0]->grad += c * n.grad; });
}

Value Tape::matmul(Value av, Value bv) {
  Node* a = unwrap(av);
  Node* b = unwrap(bv);
  if (a->data.cols() != b->data.rows()) throw ShapeError("matmul: inner dims differ");
  return make(a->data * b->data, Op::matmul, {a, b}, [](Node& n) {
    n.parents[0]->grad += n.grad * n.parents[1]->data.transpose();
    n.parents[1]->grad += n.parents[0]->data.transpose() * n.grad;
  });
}

Value Tape::transpose(Value av) {
  Node* a = unwrap(av);
  return make(a->data.transpose(), Op::transpose, {a},
              [](Node& n) { n.parents[0]->grad += n.grad.transpose(); });
}

Value Tape::hadamard(Value av, Value bv) {
  Node* a = unwrap(av);
  Node* b = unwrap(bv);
  check_same_shape(a, b, "hadamard");
  return make(a->data.cwiseProduct(b->data), Op::hadamard, {a, b}, [](Node& n) {
    n.parents[0]->grad += n.grad.cwiseProduct(n.parents[1]->data);
    n.parents[1]->grad += n.grad.cwiseProduct(n.parents[0]->data);
  });
}

Value Tape::sum(Value av) {
  Node* a = unwrap(av);
  return make(Mat::Constant(1, 1, a->data.sum()), Op::sum, {a}, [](Node& n) {
    n.parents[0]->grad.array() += n.grad(0, 0);
  });
}

Value Tape::mean(Value av) {
  Node* a = unwrap(av);
  const double inv = 1.0 / static_cast<double>(a->data.size());
  return make(Mat::Constant(1, 1, a->data.mean()), Op::mean, {a}, [inv](Node& n) {
    n.parents[0]->grad.array() += inv * n.grad(0, 0);
  });
}

Value Tape::dot(Value av, Value bv) {
  Node* a = unwrap(av);
  Node* b = unwrap(bv);
  check_same_shape(a, b, "dot");
  const double v = a->data.cwiseProduct(b->data).sum();
  return make(Mat::Constant(1, 1, v), Op::dot, {a, b}, [](Node& n) {
    n.parents[0]->grad += n.grad(0, 0) * n.parents[1]->data;
    n.parents[1]->grad += n.grad(0, 0) * n.parents[0]->data;
  });
}

Value Tape::tanh(Value av) {
  Node* a = unwrap(av);
  return make(a->data.array().tanh().matrix(), Op::tanh, {a}, [](Node& n) {
    n.parents[0]->grad.array() += n.grad.array() * (1.0 - n.data.array().square());
  });
}

Value Tape::softplus(Value av) {
  Node* a = unwrap(av);
  Mat out = a->data.unaryExpr([](double x) {
    return x > 30.0 ? x : std::log1p(std::exp(x));
  });
  return make(std::move(out), Op::softplus, {a}, [](Node& n) {
    const auto& x = n.parents[0]->data.array();
    n.parents[0]->grad.array() += n.grad.array() / (1.0 + (-x).exp());
  });
}

Value Tape::sigmoid(Value av) {
  Node* a = unwrap(av);
  Mat out = a->data.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return make(std::move(out), Op::sigmoid, {a}, [](Node& n) {
    const auto s = n.data.array();
    n.parents[0]->grad.array() += n.grad.array() * s * (1.0 - s);
  });
}

Value Tape::relu(Value av) {
  Node* a = unwrap(av);
  return make(a->data.cwiseMax(0.0), Op::relu, {a}, [](Node& n) {
    n.parents[0]->grad.array() +=
        n.grad.array() * (n.parents[0]->data.array() > 0.0).cast<double>();
  });
}

Value Tape::abs(Value av) {
  Node* a = unwrap(av);
  return make(a->data.cwiseAbs(), Op::abs, {a}, [](Node& n) {
    n.parents[0]->grad.array() += n.grad.array() * n.parents[0]->data.array().sign();
  });
}

Value Tape::mul_scalar(Value av, Value sv) {
  Node* a = unwrap(av);
  Node* s = unwrap(sv);
  if (s->data.size() != 1) throw ShapeError("mul_scalar: scale must be 1x1");
  const double c = s->data(0, 0);
  return make(c * a->data, Op::mul_scalar, {a, s}, [](Node& n) {
    const double cc = n.parents[1]->data(0, 0);
    n.parents[0]->grad += cc * n.grad;
    n.parents[1]->grad(0, 0) += n.grad.cwiseProduct(n.parents[0]->data).sum();
  });
}

Value Tape::div_scalar(Value av, Value sv) {
  Node* a = unwrap(av);
  Node* s = unwrap(sv);
  if (s->data.size() != 1) throw ShapeError("div_scalar: divisor must be 1x1");
  const double c = s->data(0, 0);
  return make(a->data / c, Op::div_scalar, {a, s}, [](Node& n) {
    const double cc = n.parents[1]->data(0, 0);
    n.parents[0]->grad += n.grad / cc;
    n.parents[1]->grad(0, 0) -=
        n.grad.cwiseProduct(n.parents[0]->data).sum() / (cc * cc);
  });
}

Value Tape::segment(Value av, Eigen::Index row0, Eigen::Index nrows) {
  Node* a = unwrap(av);
  if (row0 < 0 || row0 + nrows > a->data.rows())
    throw ShapeError("segment: row range out of bounds");
  return make(a->data.middleRows(row0, nrows), Op::segment, {a},
              [row0, nrows](Node& n) {
                n.parents[0]->grad.middleRows(row0, nrows) += n.grad;
              });
}

Value Tape::vconcat(Value av, Value bv) {
  Node* a = unwrap(av);
  Node* b = unwrap(bv);
  if (a->data.cols() != b->data.cols()) throw ShapeError("vconcat: column mismatch");
  Mat out(a->data.rows() + b->data.rows(), a->data.cols());
  out << a->data, b->data;
  return make(std::move(out), Op::vconcat, {a, b}, [](Node& n) {
    const Eigen::Index ra = n.parents[0]->data.rows();
    n.parents[0]->grad += n.grad.topRows(ra);
    n.parents[1]->grad += n.grad.bottomRows(n.grad.rows() - ra);
  });
}

Value Tape::reshape(Value av, Eigen::Index rows, Eigen::Index cols) {
  Node* a = unwrap(av);
  if (rows * cols != a->data.size()) throw ShapeError("reshape: element count differs");
  Mat out = Eigen::Map<const Mat>(a->data.data(), rows, cols);
  return make(std::move(out), Op::reshape, {a}, [](Node& n) {
    Node* p = n.parents[0];
    p->grad += Eigen::Map<const Mat>(n.grad.data(), p->data.rows(), p->data.cols());
  });
}

void Tape::backward(Value root) {
  Node* r = unwrap(root);
  if (r->data.size() != 1) throw ShapeError("backward: root must be scalar");

  // Mark the subgraph below the root.
  std::vector<char> reachable(nodes_.size(), 0);
  std::vector<Node*> stack{r};
  reachable[r->index] = 1;
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    for (Node* p : n->parents) {
      if (!reachable[p->index]) {
        reachable[p->index] = 1;
        stack.push_back(p);
      }
    }
  }

  r->grad(0, 0) += 1.0;
  for (std::size_t i = r->index + 1; i-- > 0;) {
    if (!reachable[i]) continue;
    Node& n = *nodes_[i];
    if (n.pull) n.pull(n);
  }
}

void Tape::zero_grad() {
  for (auto& n : nodes_) n->grad.setZero();
}

}  // namespace sphnn::ad
