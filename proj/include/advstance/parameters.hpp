#pragma once

#include "advstance/autodiff.hpp"

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace advstance {

/// Name and shape of one parameter tensor. Weight matrices are stored
/// input-major (in x out) so layers compute `x * W + b` on row vectors.
struct ParameterShape {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(rows * cols); }
};

using ParameterSnapshot = std::map<std::string, Matrix>;

/// Ordered, named collection of trainable leaves.
class ParameterStore {
 public:
  Var& add(const std::string& name, Matrix init);

  [[nodiscard]] Var& at(const std::string& name);
  [[nodiscard]] const Var& at(const std::string& name) const;
  [[nodiscard]] bool contains(const std::string& name) const { return index_.contains(name); }

  [[nodiscard]] const std::vector<std::string>& names() const { return names_; }
  [[nodiscard]] std::vector<ParameterShape> shapes() const;

  /// Number of scalars in parameters that currently require a gradient.
  [[nodiscard]] std::size_t trainable_count() const;
  [[nodiscard]] std::size_t total_count() const;

  void zero_grad();
  /// Freezes or unfreezes every parameter whose name starts with `prefix`.
  void set_trainable(const std::string& prefix, bool trainable);

  [[nodiscard]] ParameterSnapshot snapshot() const;
  /// Copies values in; every stored tensor must be present with the same shape.
  void restore(const ParameterSnapshot& snap);

 private:
  std::vector<std::string> names_;
  std::vector<Var> vars_;
  std::map<std::string, std::size_t> index_;
};

struct AdamWConfig {
  double learning_rate = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-5;
  double grad_clip = 0.0;  // global L2 norm; 0 disables
  /// Per-prefix learning-rate multipliers; the first matching prefix wins.
  std::vector<std::pair<std::string, double>> lr_multipliers;

  [[nodiscard]] double learning_rate_for(const std::string& name) const;
};

/// Adam with decoupled weight decay, matching the usual deep-learning
/// framework update (decay applied as p *= 1 - lr * wd before the Adam step).
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

  void step(ParameterStore& params);
  [[nodiscard]] long steps_taken() const { return t_; }

 private:
  AdamWConfig cfg_;
  long t_ = 0;
  std::map<std::string, Matrix> m_;
  std::map<std::string, Matrix> v_;
};

}  // namespace advstance
