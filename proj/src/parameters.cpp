#include "advstance/parameters.hpp"

#include "advstance/errors.hpp"

#include <cmath>

namespace advstance {

Var& ParameterStore::add(const std::string& name, Matrix init) {
  if (index_.contains(name)) throw ConfigError("duplicate parameter name: " + name);
  index_.emplace(name, vars_.size());
  names_.push_back(name);
  vars_.push_back(Var::parameter(std::move(init)));
  return vars_.back();
}

Var& ParameterStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return vars_[it->second];
}

const Var& ParameterStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return vars_[it->second];
}

std::vector<ParameterShape> ParameterStore::shapes() const {
  std::vector<ParameterShape> out;
  out.reserve(vars_.size());
  for (std::size_t i = 0; i < vars_.size(); ++i) out.push_back({names_[i], vars_[i].rows(), vars_[i].cols()});
  return out;
}

std::size_t ParameterStore::trainable_count() const {
  std::size_t n = 0;
  for (const auto& v : vars_) {
    if (v.requires_grad()) n += static_cast<std::size_t>(v.value().size());
  }
  return n;
}

std::size_t ParameterStore::total_count() const {
  std::size_t n = 0;
  for (const auto& v : vars_) n += static_cast<std::size_t>(v.value().size());
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& v : vars_) v.zero_grad();
}

void ParameterStore::set_trainable(const std::string& prefix, bool trainable) {
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    if (names_[i].starts_with(prefix)) vars_[i].set_requires_grad(trainable);
  }
}

ParameterSnapshot ParameterStore::snapshot() const {
  ParameterSnapshot snap;
  for (std::size_t i = 0; i < vars_.size(); ++i) snap.emplace(names_[i], vars_[i].value());
  return snap;
}

void ParameterStore::restore(const ParameterSnapshot& snap) {
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    auto it = snap.find(names_[i]);
    if (it == snap.end()) throw ShapeError("missing tensor " + names_[i]);
    const Matrix& m = it->second;
    if (m.rows() != vars_[i].rows() || m.cols() != vars_[i].cols()) {
      throw ShapeError("tensor " + names_[i] + " has shape " + std::to_string(m.rows()) + "x" +
                       std::to_string(m.cols()) + ", expected " + std::to_string(vars_[i].rows()) + "x" +
                       std::to_string(vars_[i].cols()));
    }
    vars_[i].mutable_value() = m;
  }
}

double AdamWConfig::learning_rate_for(const std::string& name) const {
  for (const auto& [prefix, mult] : lr_multipliers) {
    if (name.starts_with(prefix)) return learning_rate * mult;
  }
  return learning_rate;
}

void AdamW::step(ParameterStore& params) {
  ++t_;
  double clip_factor = 1.0;
  if (cfg_.grad_clip > 0.0) {
    double sq = 0.0;
    for (const auto& name : params.names()) {
      const Var& p = params.at(name);
      if (p.requires_grad() && p.has_grad()) sq += p.grad().squaredNorm();
    }
    const double norm = std::sqrt(sq);
    if (norm > cfg_.grad_clip) clip_factor = cfg_.grad_clip / norm;
  }
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (const auto& name : params.names()) {
    Var& p = params.at(name);
    if (!p.requires_grad() || !p.has_grad()) continue;
    const double lr = cfg_.learning_rate_for(name);
    const double step_size = lr / bc1;
    Matrix& value = p.mutable_value();
    Matrix& m = m_.try_emplace(name, Matrix::Zero(value.rows(), value.cols())).first->second;
    Matrix& v = v_.try_emplace(name, Matrix::Zero(value.rows(), value.cols())).first->second;
    const Matrix g = p.grad() * clip_factor;
    value *= 1.0 - lr * cfg_.weight_decay;
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseAbs2();
    value.array() -= step_size * m.array() / ((v.array() / bc2).sqrt() + cfg_.eps);
  }
}

}  // namespace advstance
