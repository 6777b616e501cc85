#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "hsr/tensor.hpp"

namespace hsr {

struct Parameter {
  std::string name;
  Tensor value;
  bool trainable = true;
};

/// Ordered, uniquely named collection of parameters.
class ParameterSet {
 public:
  Tensor add(const std::string& name, const Shape& shape, bool trainable = true);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;

  std::vector<Parameter>& items() { return items_; }
  const std::vector<Parameter>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }

  std::size_t scalar_count() const;
  std::size_t scalar_count_with_prefix(const std::string& prefix) const;

  void zero_grad();

 private:
  std::vector<Parameter> items_;
  std::map<std::string, std::size_t> index_;
};

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t t = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// One bias-corrected Adam update over every trainable parameter. Moments are
/// allocated on the first call. Gradients are left in place.
void adam_step(ParameterSet& params, AdamState& state);

}  // namespace hsr
