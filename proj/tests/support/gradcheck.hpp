#pragma once

#include "advstance/autodiff.hpp"
#include "advstance/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace advstance::testing {

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, scale);
  return m;
}

/// Largest relative error between the tape gradient and a central finite
/// difference, over every entry of every input.
inline double max_gradient_error(std::vector<Var>& inputs, const std::function<Var(std::vector<Var>&)>& loss_fn,
                                 double step = 1e-6) {
  for (auto& v : inputs) v.zero_grad();
  Var loss = loss_fn(inputs);
  backward(loss);
  double worst = 0.0;
  for (auto& v : inputs) {
    const Matrix analytic = v.has_grad() ? v.grad() : Matrix::Zero(v.rows(), v.cols());
    for (Eigen::Index i = 0; i < v.value().size(); ++i) {
      const double orig = v.value().data()[i];
      v.mutable_value().data()[i] = orig + step;
      const double up = loss_fn(inputs).scalar();
      v.mutable_value().data()[i] = orig - step;
      const double down = loss_fn(inputs).scalar();
      v.mutable_value().data()[i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic.data()[i];
      const double err = std::abs(a - numeric) / std::max(1e-6, std::abs(a) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

/// Reduces a matrix to a scalar with fixed random weights so every entry
/// gets a distinct gradient.
inline Var weighted_sum(const Var& x, std::uint64_t seed = 99) {
  Rng rng(seed);
  const Var w = Var::constant(random_matrix(rng, x.cols(), 1));
  const Var ones = Var::constant(Matrix::Ones(1, x.rows()));
  return matmul(ones, matmul(x, w));
}

}  // namespace advstance::testing
