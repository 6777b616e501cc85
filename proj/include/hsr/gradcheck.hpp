#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hsr/tensor.hpp"

namespace hsr {

using TensorFn = std::function<Tensor(const std::vector<Tensor>&)>;

/// Relative error ||analytic - numeric|| / max(||analytic||, ||numeric||)
/// between backprop and central differences of sum(proj * fn(inputs)), with a
/// fixed random projection `proj`. Every input must be a leaf that requires grad.
double gradient_relative_error(const TensorFn& fn, const std::vector<Tensor>& inputs,
                               std::mt19937_64& rng, double step = 1e-5);

struct GradCheckResult {
  std::string op;
  std::size_t cases = 0;
  double worst_error = 0.0;
  bool passed = false;
};

/// Finite-difference checks for every differentiable op, `cases` random
/// instances each, pass threshold `tolerance`.
std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed, std::size_t cases = 20,
                                                double tolerance = 1e-4);

/// Tensor of uniform values in [lo, hi).
Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                     bool requires_grad = true);

}  // namespace hsr
