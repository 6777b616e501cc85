#include "hsr/params.hpp"

#include <cmath>

#include "hsr/error.hpp"

namespace hsr {

Tensor ParameterSet::add(const std::string& name, const Shape& shape, bool trainable) {
  if (contains(name)) throw ShapeError("duplicate parameter name '" + name + "'");
  index_[name] = items_.size();
  items_.push_back({name, Tensor::zeros(shape, trainable), trainable});
  return items_.back().value;
}

Tensor& ParameterSet::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ShapeError("unknown parameter '" + name + "'");
  return items_[it->second].value;
}

const Tensor& ParameterSet::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ShapeError("unknown parameter '" + name + "'");
  return items_[it->second].value;
}

std::size_t ParameterSet::scalar_count() const { return scalar_count_with_prefix(""); }

std::size_t ParameterSet::scalar_count_with_prefix(const std::string& prefix) const {
  std::size_t total = 0;
  for (const auto& p : items_) {
    if (p.name.compare(0, prefix.size(), prefix) == 0) total += p.value.numel();
  }
  return total;
}

void ParameterSet::zero_grad() {
  for (auto& p : items_) p.value.zero_grad();
}

void adam_step(ParameterSet& params, AdamState& state) {
  auto& items = params.items();
  if (state.m.empty()) {
    for (const auto& p : items) {
      state.m.emplace_back(p.value.numel(), 0.0);
      state.v.emplace_back(p.value.numel(), 0.0);
    }
  }
  if (state.m.size() != items.size()) {
    throw ShapeError("adam_step: optimizer state does not match the parameter set");
  }
  for (const auto& p : items) {
    if (p.trainable && !p.value.has_grad()) {
      throw ShapeError("adam_step: parameter '" + p.name + "' has no gradient");
    }
  }

  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (!items[k].trainable) continue;
    auto value = items[k].value.mutable_data();
    auto grad = items[k].value.grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != value.size()) {
      throw ShapeError("adam_step: moment size mismatch for '" + items[k].name + "'");
    }
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * grad[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      value[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

}  // namespace hsr
