#include "advstance/autodiff.hpp"

#include "advstance/errors.hpp"

#include <cmath>
#include <numbers>
#include <unordered_set>

namespace advstance {

using detail::Node;

Var Var::constant(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var Var::parameter(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

Var Var::make(Matrix value, std::vector<Var> inputs, std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->is_leaf = false;
  for (const auto& in : inputs) {
    if (in.requires_grad()) n->requires_grad = true;
  }
  if (n->requires_grad) {
    n->inputs.reserve(inputs.size());
    for (auto& in : inputs) n->inputs.push_back(in.node_);
    n->backward = std::move(backward);
  }
  return Var(std::move(n));
}

void backward(const Var& root, double seed) {
  if (root.rows() != 1 || root.cols() != 1) {
    throw ShapeError("backward() needs a 1x1 root, got " + std::to_string(root.rows()) + "x" +
                     std::to_string(root.cols()));
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->is_leaf) n->grad.resize(0, 0);
  }
  root.node()->accumulate(Matrix::Constant(1, 1, seed));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->is_leaf || !n->backward || n->grad.size() == 0) continue;
    n->backward(*n);
  }
}

namespace {

Node& in(Node& self, std::size_t i) { return *self.inputs[i]; }

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.rows()) + ")");
  }
  return Var::make(a.value() * b.value(), {a, b}, [](Node& self) {
    Node& x = in(self, 0);
    Node& y = in(self, 1);
    if (x.requires_grad) x.accumulate(self.grad * y.value.transpose());
    if (y.requires_grad) y.accumulate(x.value.transpose() * self.grad);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: column counts differ");
  return Var::make(a.value() * b.value().transpose(), {a, b}, [](Node& self) {
    Node& x = in(self, 0);
    Node& y = in(self, 1);
    if (x.requires_grad) x.accumulate(self.grad * y.value);
    if (y.requires_grad) y.accumulate(self.grad.transpose() * x.value);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return Var::make(a.value() + b.value(), {a, b}, [](Node& self) {
    for (auto& p : self.inputs) {
      if (p->requires_grad) p->accumulate(self.grad);
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return Var::make(a.value() - b.value(), {a, b}, [](Node& self) {
    if (in(self, 0).requires_grad) in(self, 0).accumulate(self.grad);
    if (in(self, 1).requires_grad) in(self, 1).accumulate(-self.grad);
  });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("add_row: bias must be 1 x cols");
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return Var::make(std::move(out), {a, row}, [](Node& self) {
    if (in(self, 0).requires_grad) in(self, 0).accumulate(self.grad);
    if (in(self, 1).requires_grad) in(self, 1).accumulate(self.grad.colwise().sum());
  });
}

Var scale(const Var& a, double factor) {
  return Var::make(a.value() * factor, {a}, [factor](Node& self) {
    in(self, 0).accumulate(self.grad * factor);
  });
}

Var add_constant(const Var& a, const Matrix& c) {
  if (c.rows() != a.rows() || c.cols() != a.cols()) throw ShapeError("add_constant: shape mismatch");
  return Var::make(a.value() + c, {a}, [](Node& self) { in(self, 0).accumulate(self.grad); });
}

Var mul_constant(const Var& a, const Matrix& c) {
  if (c.rows() != a.rows() || c.cols() != a.cols()) throw ShapeError("mul_constant: shape mismatch");
  return Var::make(a.value().cwiseProduct(c), {a}, [c](Node& self) {
    in(self, 0).accumulate(self.grad.cwiseProduct(c));
  });
}

Var relu(const Var& a) {
  return Var::make(a.value().cwiseMax(0.0), {a}, [](Node& self) {
    Node& x = in(self, 0);
    x.accumulate((x.value.array() > 0.0).select(self.grad.array(), 0.0).matrix());
  });
}

Var gelu(const Var& a) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  Matrix out = a.value().unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); });
  return Var::make(std::move(out), {a}, [](Node& self) {
    Node& x = in(self, 0);
    const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
    Matrix d = x.value.unaryExpr([inv_sqrt_2pi](double v) {
      return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
    });
    x.accumulate(self.grad.cwiseProduct(d));
  });
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Var softmax_rows(const Var& a) {
  return Var::make(softmax_rows(a.value()), {a}, [](Node& self) {
    const Matrix& y = self.value;
    Matrix gy = self.grad.cwiseProduct(y);
    Eigen::VectorXd dots = gy.rowwise().sum();
    Matrix gx = gy - y.cwiseProduct(dots.replicate(1, y.cols()));
    in(self, 0).accumulate(gx);
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Eigen::Index n = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != n || beta.rows() != 1 || beta.cols() != n) {
    throw ShapeError("layer_norm: gamma/beta must be 1 x cols");
  }
  Matrix xhat(x.rows(), n);
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.value().row(r).mean();
    const double var = (x.value().row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.value().row(r).array() - mean) * inv_std(r);
  }
  Matrix out = xhat;
  out.array().rowwise() *= gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);
  return Var::make(std::move(out), {x, gamma, beta}, [xhat, inv_std](Node& self) {
    Node& xn = in(self, 0);
    Node& gn = in(self, 1);
    Node& bn = in(self, 2);
    const Matrix& g = self.grad;
    if (gn.requires_grad) gn.accumulate(g.cwiseProduct(xhat).colwise().sum());
    if (bn.requires_grad) bn.accumulate(g.colwise().sum());
    if (xn.requires_grad) {
      Matrix dxhat = g;
      dxhat.array().rowwise() *= gn.value.row(0).array();
      const double n = static_cast<double>(g.cols());
      Matrix dx(g.rows(), g.cols());
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        const double sum_d = dxhat.row(r).sum();
        const double sum_dx = dxhat.row(r).dot(xhat.row(r));
        dx.row(r) = (inv_std(r) / n) *
                    (n * dxhat.row(r).array() - sum_d - xhat.row(r).array() * sum_dx).matrix();
      }
      xn.accumulate(dx);
    }
  });
}

Var gather_rows(const Var& table, std::span<const int> ids) {
  Matrix out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(ids[i]) + " out of range [0, " +
                       std::to_string(table.rows()) + ")");
    }
    out.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return Var::make(std::move(out), {table}, [idx = std::move(idx)](Node& self) {
    Node& t = in(self, 0);
    if (t.grad.size() == 0) t.grad = Matrix::Zero(t.value.rows(), t.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) t.grad.row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
  });
}

Var slice(const Var& a, Eigen::Index row, Eigen::Index nrows, Eigen::Index col, Eigen::Index ncols) {
  if (row < 0 || col < 0 || row + nrows > a.rows() || col + ncols > a.cols()) {
    throw ShapeError("slice: block out of range");
  }
  return Var::make(a.value().block(row, col, nrows, ncols), {a}, [row, col, nrows, ncols](Node& self) {
    Node& x = in(self, 0);
    if (x.grad.size() == 0) x.grad = Matrix::Zero(x.value.rows(), x.value.cols());
    x.grad.block(row, col, nrows, ncols) += self.grad;
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: nothing to concatenate");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    offsets.push_back(c);
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return Var::make(std::move(out), {parts.begin(), parts.end()}, [offsets](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      Node& p = *self.inputs[i];
      if (p.requires_grad) p.accumulate(self.grad.middleCols(offsets[i], p.value.cols()));
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: nothing to concatenate");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    offsets.push_back(r);
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return Var::make(std::move(out), {parts.begin(), parts.end()}, [offsets](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      Node& p = *self.inputs[i];
      if (p.requires_grad) p.accumulate(self.grad.middleRows(offsets[i], p.value.rows()));
    }
  });
}

Var reverse_gradient(const Var& a, double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("gradient reversal lambda must be >= 0");
  return Var::make(a.value(), {a}, [lambda](Node& self) { in(self, 0).accumulate(self.grad * -lambda); });
}

Var straight_through(const Var& a, Matrix replacement) {
  if (replacement.rows() != a.rows() || replacement.cols() != a.cols()) {
    throw ShapeError("straight_through: shape mismatch");
  }
  return Var::make(std::move(replacement), {a}, [](Node& self) { in(self, 0).accumulate(self.grad); });
}

Var cross_entropy(const Var& logits, std::span<const int> targets) {
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows() || targets.empty()) {
    throw ShapeError("cross_entropy: need one target per logit row");
  }
  const Matrix probs = softmax_rows(logits.value());
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    if (targets[i] < 0 || targets[i] >= logits.cols()) throw ShapeError("cross_entropy: target out of range");
    const double m = logits.value().row(r).maxCoeff();
    const double lse = m + std::log((logits.value().row(r).array() - m).exp().sum());
    total += lse - logits.value()(r, targets[i]);
  }
  const double n = static_cast<double>(targets.size());
  std::vector<int> t(targets.begin(), targets.end());
  return Var::make(Matrix::Constant(1, 1, total / n), {logits},
                   [probs, t = std::move(t), n](Node& self) {
                     Matrix g = probs;
                     for (std::size_t i = 0; i < t.size(); ++i) g(static_cast<Eigen::Index>(i), t[i]) -= 1.0;
                     in(self, 0).accumulate(g * (self.grad(0, 0) / n));
                   });
}

}  // namespace advstance
