#include "hsr/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "hsr/ops.hpp"

namespace hsr {

Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo, double hi,
                     bool requires_grad) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(shape.numel());
  for (auto& x : v) x = dist(rng);
  return Tensor::from(shape, std::move(v), requires_grad);
}

double gradient_relative_error(const TensorFn& fn, const std::vector<Tensor>& inputs,
                               std::mt19937_64& rng, double step) {
  const Tensor probe = fn(inputs);
  const Tensor proj = random_tensor(probe.shape(), rng, 0.5, 1.5, false);
  auto objective = [&](const std::vector<Tensor>& xs) { return sum(mul(fn(xs), proj)); };

  std::vector<Tensor> leaves = inputs;
  for (auto& t : leaves) t.zero_grad();
  backward(objective(leaves));

  double diff2 = 0.0;
  double a2 = 0.0;
  double n2 = 0.0;
  for (auto& t : leaves) {
    auto values = t.mutable_data();
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = objective(leaves).item();
      values[i] = saved - step;
      const double down = objective(leaves).item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic.empty() ? 0.0 : analytic[i];
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
    }
  }
  const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
  return std::sqrt(diff2) / denom;
}

namespace {

// Values with pairwise gaps of at least `gap`, shuffled, so no max-pool window
// has a near tie.
Tensor distinct_tensor(const Shape& shape, std::mt19937_64& rng, double gap) {
  std::vector<double> v(shape.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (static_cast<double>(i) + 0.5) * gap;
  std::shuffle(v.begin(), v.end(), rng);
  const double offset = -0.5 * gap * static_cast<double>(v.size());
  for (auto& x : v) x += offset;
  return Tensor::from(shape, std::move(v), true);
}

// Uniform values bounded away from zero by `margin`.
Tensor off_zero_tensor(const Shape& shape, std::mt19937_64& rng, double margin) {
  std::uniform_real_distribution<double> mag(margin, 1.0);
  std::bernoulli_distribution sign(0.5);
  std::vector<double> v(shape.numel());
  for (auto& x : v) x = sign(rng) ? mag(rng) : -mag(rng);
  return Tensor::from(shape, std::move(v), true);
}

struct Case {
  std::string name;
  std::function<double(std::mt19937_64&, std::size_t)> run;
};

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::vector<Case> suite() {
  std::vector<Case> cases;
  cases.push_back({"conv2d", [](std::mt19937_64& rng, std::size_t i) {
                     const std::size_t k = (i % 3 == 0) ? 1 : 3;
                     const std::size_t stride = (i % 4 == 3) ? 2 : 1;
                     const std::size_t pad = (k == 3 && i % 2 == 0) ? 1 : 0;
                     const std::size_t cin = pick(rng, 1, 3);
                     const std::size_t cout = pick(rng, 1, 3);
                     const std::size_t n = pick(rng, 1, 2);
                     auto x = random_tensor({n, cin, pick(rng, 4, 6), pick(rng, 4, 6)}, rng);
                     auto w = random_tensor({cout, cin, k, k}, rng);
                     auto b = random_tensor({1, cout, 1, 1}, rng);
                     return gradient_relative_error(
                         [stride, pad](const std::vector<Tensor>& t) {
                           return conv2d(t[0], t[1], t[2], stride, pad);
                         },
                         {x, w, b}, rng);
                   }});
  cases.push_back({"leaky_relu", [](std::mt19937_64& rng, std::size_t) {
                     auto x = off_zero_tensor({1, 2, pick(rng, 2, 5), pick(rng, 2, 5)}, rng, 1e-3);
                     return gradient_relative_error(
                         [](const std::vector<Tensor>& t) { return leaky_relu(t[0], 0.1); }, {x},
                         rng);
                   }});
  cases.push_back({"sigmoid", [](std::mt19937_64& rng, std::size_t) {
                     auto x = random_tensor({1, 2, pick(rng, 2, 5), pick(rng, 2, 5)}, rng, -4, 4);
                     return gradient_relative_error(
                         [](const std::vector<Tensor>& t) { return sigmoid(t[0]); }, {x}, rng);
                   }});
  cases.push_back({"max_pool2d", [](std::mt19937_64& rng, std::size_t i) {
                     const std::size_t k = (i % 2 == 0) ? 2 : 4;
                     auto x = distinct_tensor({1, 2, k * pick(rng, 1, 2), k * pick(rng, 1, 2)}, rng,
                                              1e-2);
                     return gradient_relative_error(
                         [k](const std::vector<Tensor>& t) { return max_pool2d(t[0], k); }, {x},
                         rng);
                   }});
  cases.push_back({"bilinear_upsample", [](std::mt19937_64& rng, std::size_t i) {
                     const std::size_t f = (i % 2 == 0) ? 2 : 4;
                     auto x = random_tensor({1, 2, pick(rng, 1, 4), pick(rng, 1, 4)}, rng);
                     return gradient_relative_error(
                         [f](const std::vector<Tensor>& t) { return bilinear_upsample(t[0], f); },
                         {x}, rng);
                   }});
  cases.push_back({"pixel_shuffle", [](std::mt19937_64& rng, std::size_t i) {
                     const std::size_t r = 2 + i % 3;
                     auto x = random_tensor({1, r * r * pick(rng, 1, 2), pick(rng, 1, 3),
                                             pick(rng, 1, 3)},
                                            rng);
                     return gradient_relative_error(
                         [r](const std::vector<Tensor>& t) { return pixel_shuffle(t[0], r); }, {x},
                         rng);
                   }});
  cases.push_back({"concat_split", [](std::mt19937_64& rng, std::size_t) {
                     const Shape s{1, 2, pick(rng, 2, 4), pick(rng, 2, 4)};
                     auto a = random_tensor(s, rng);
                     auto b = random_tensor({1, 4, s.h, s.w}, rng);
                     return gradient_relative_error(
                         [](const std::vector<Tensor>& t) {
                           auto parts = split_channels(concat_channels({t[0], t[1]}), 3);
                           return concat_channels({parts[2], scale(parts[0], 2.0), parts[1]});
                         },
                         {a, b}, rng);
                   }});
  cases.push_back({"add_sub_mul", [](std::mt19937_64& rng, std::size_t) {
                     const Shape s{1, 2, pick(rng, 2, 4), pick(rng, 2, 4)};
                     auto a = random_tensor(s, rng);
                     auto b = random_tensor(s, rng);
                     return gradient_relative_error(
                         [](const std::vector<Tensor>& t) {
                           return mul(add(t[0], t[1]), sub(t[0], mul(t[1], t[1])));
                         },
                         {a, b}, rng);
                   }});
  cases.push_back({"l1_loss", [](std::mt19937_64& rng, std::size_t) {
                     const Shape s{1, 2, pick(rng, 2, 4), pick(rng, 2, 4)};
                     auto target = random_tensor(s, rng);
                     auto delta = off_zero_tensor(s, rng, 1e-3);
                     std::vector<double> p(s.numel());
                     for (std::size_t j = 0; j < p.size(); ++j)
                       p[j] = target.data()[j] + delta.data()[j];
                     auto pred = Tensor::from(s, std::move(p), true);
                     return gradient_relative_error(
                         [](const std::vector<Tensor>& t) { return l1_loss(t[0], t[1]); },
                         {pred, target}, rng);
                   }});
  return cases;
}

}  // namespace

std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed, std::size_t cases,
                                                double tolerance) {
  std::mt19937_64 rng(seed);
  std::vector<GradCheckResult> results;
  for (const auto& c : suite()) {
    GradCheckResult r{c.name, cases, 0.0, true};
    for (std::size_t i = 0; i < cases; ++i) r.worst_error = std::max(r.worst_error, c.run(rng, i));
    r.passed = r.worst_error < tolerance;
    results.push_back(r);
  }
  return results;
}

}  // namespace hsr
