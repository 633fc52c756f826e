#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. Every value is a 2-D matrix; vectors are 1 x n rows.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace advstance {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;  // empty until something is accumulated
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  template <typename Expr>
  void accumulate(const Expr& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

}  // namespace detail

/// Handle to a node of the computation graph. Copies share the node.
class Var {
 public:
  Var() = default;

  static Var constant(Matrix value);
  static Var parameter(Matrix value);

  [[nodiscard]] bool defined() const { return node_ != nullptr; }
  [[nodiscard]] const Matrix& value() const { return node_->value; }
  [[nodiscard]] Matrix& mutable_value() { return node_->value; }
  [[nodiscard]] const Matrix& grad() const { return node_->grad; }
  [[nodiscard]] bool has_grad() const { return node_->grad.size() != 0; }
  [[nodiscard]] bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  void zero_grad() { node_->grad.resize(0, 0); }

  [[nodiscard]] Eigen::Index rows() const { return node_->value.rows(); }
  [[nodiscard]] Eigen::Index cols() const { return node_->value.cols(); }
  [[nodiscard]] double scalar() const { return node_->value(0, 0); }

  // Internal: builds a non-leaf node. `backward` is dropped when no input
  // requires a gradient.
  static Var make(Matrix value, std::vector<Var> inputs, std::function<void(detail::Node&)> backward);

  [[nodiscard]] const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Var(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// Back-propagates from a 1x1 root. Leaf gradients accumulate across calls;
/// intermediate gradients are reset first.
void backward(const Var& root, double seed = 1.0);

// Linear algebra
Var matmul(const Var& a, const Var& b);
/// a * b^T
Var matmul_nt(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
/// Adds a 1 x n row to every row of a.
Var add_row(const Var& a, const Var& row);
Var scale(const Var& a, double factor);
/// Adds a fixed matrix; no gradient flows to it.
Var add_constant(const Var& a, const Matrix& c);
/// Elementwise product with a fixed matrix.
Var mul_constant(const Var& a, const Matrix& c);

// Nonlinearities
Var relu(const Var& a);
/// Exact (erf) GELU.
Var gelu(const Var& a);
Var softmax_rows(const Var& a);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps);

// Structure
Var gather_rows(const Var& table, std::span<const int> ids);
Var slice(const Var& a, Eigen::Index row, Eigen::Index nrows, Eigen::Index col, Eigen::Index ncols);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);

/// Forward: identity. Backward: upstream gradient times -lambda.
Var reverse_gradient(const Var& a, double lambda);
/// Forward: `replacement` (same shape as a). Backward: identity.
Var straight_through(const Var& a, Matrix replacement);

/// Mean softmax cross-entropy of row logits against class indices. 1 x 1.
Var cross_entropy(const Var& logits, std::span<const int> targets);

/// Row-wise softmax on plain values.
Matrix softmax_rows(const Matrix& logits);

}  // namespace advstance
