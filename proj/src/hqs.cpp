#include "hsr/hqs.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "hsr/error.hpp"

namespace hsr {
namespace {

std::size_t wrap(long i, std::size_t n) {
  const long m = static_cast<long>(n);
  return static_cast<std::size_t>(((i % m) + m) % m);
}

double dot(const Plane& a, const Plane& b) {
  return std::inner_product(a.values.begin(), a.values.end(), b.values.begin(), 0.0);
}

void axpy(double alpha, const Plane& x, Plane& y) {
  for (std::size_t i = 0; i < y.values.size(); ++i) y.values[i] += alpha * x.values[i];
}

using LinearOp = std::function<Plane(const Plane&)>;

// Conjugate gradient for a symmetric positive definite operator.
Plane conjugate_gradient(const LinearOp& apply, const Plane& rhs, Plane x, const HqsConfig& cfg,
                         const char* what, CgReport* report) {
  const double rhs_norm = std::sqrt(dot(rhs, rhs));
  Plane r = rhs;
  axpy(-1.0, apply(x), r);
  if (rhs_norm == 0.0) {
    if (report) *report = {0, 0.0};
    return Plane(rhs.height, rhs.width);
  }
  Plane p = r;
  double rr = dot(r, r);
  std::size_t it = 0;
  while (std::sqrt(rr) / rhs_norm > cfg.cg_tolerance) {
    if (it == cfg.cg_max_iterations) {
      std::ostringstream os;
      os << what << ": conjugate gradient did not converge in " << it
         << " iterations (relative residual " << std::sqrt(rr) / rhs_norm << ")";
      throw NumericError(os.str());
    }
    const Plane ap = apply(p);
    const double alpha = rr / dot(p, ap);
    axpy(alpha, p, x);
    axpy(-alpha, ap, r);
    const double rr_next = dot(r, r);
    const double beta = rr_next / rr;
    for (std::size_t i = 0; i < p.values.size(); ++i) p.values[i] = r.values[i] + beta * p.values[i];
    rr = rr_next;
    ++it;
  }
  if (report) *report = {it, std::sqrt(rr) / rhs_norm};
  return x;
}

}  // namespace

DegradationOperator::DegradationOperator(Plane kernel, std::size_t scale)
    : kernel_(std::move(kernel)), scale_(scale) {
  if (scale_ == 0) throw ShapeError("degradation scale must be at least 1");
  if (kernel_.height % 2 == 0 || kernel_.width % 2 == 0) {
    throw ShapeError("blur kernel dimensions must be odd");
  }
  const double total = std::accumulate(kernel_.values.begin(), kernel_.values.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-12) throw ShapeError("blur kernel must sum to 1");
}

DegradationOperator DegradationOperator::delta(std::size_t scale) {
  return DegradationOperator(Plane(1, 1, 1.0), scale);
}

DegradationOperator DegradationOperator::gaussian(std::size_t size, double sigma, std::size_t scale) {
  Plane k(size, size);
  const double c = static_cast<double>(size / 2);
  double total = 0.0;
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double dy = static_cast<double>(y) - c;
      const double dx = static_cast<double>(x) - c;
      k(y, x) = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      total += k(y, x);
    }
  }
  for (auto& v : k.values) v /= total;
  return DegradationOperator(std::move(k), scale);
}

Plane DegradationOperator::apply(const Plane& hr) const {
  if (hr.height % scale_ != 0 || hr.width % scale_ != 0) {
    throw ShapeError("degradation: HR size " + std::to_string(hr.height) + "x" +
                     std::to_string(hr.width) + " is not divisible by scale " +
                     std::to_string(scale_));
  }
  const long ch = static_cast<long>(kernel_.height / 2);
  const long cw = static_cast<long>(kernel_.width / 2);
  Plane lr(hr.height / scale_, hr.width / scale_);
  for (std::size_t i = 0; i < lr.height; ++i) {
    for (std::size_t j = 0; j < lr.width; ++j) {
      const long y = static_cast<long>(i * scale_);
      const long x = static_cast<long>(j * scale_);
      double acc = 0.0;
      for (std::size_t a = 0; a < kernel_.height; ++a) {
        for (std::size_t b = 0; b < kernel_.width; ++b) {
          acc += kernel_(a, b) * hr(wrap(y - (static_cast<long>(a) - ch), hr.height),
                                    wrap(x - (static_cast<long>(b) - cw), hr.width));
        }
      }
      lr(i, j) = acc;
    }
  }
  return lr;
}

Plane DegradationOperator::adjoint(const Plane& lr) const {
  const long ch = static_cast<long>(kernel_.height / 2);
  const long cw = static_cast<long>(kernel_.width / 2);
  Plane hr(lr.height * scale_, lr.width * scale_);
  // Zero-upsampled samples sit on the s-grid; scatter each through the kernel.
  for (std::size_t i = 0; i < lr.height; ++i) {
    for (std::size_t j = 0; j < lr.width; ++j) {
      const double v = lr(i, j);
      const long y = static_cast<long>(i * scale_);
      const long x = static_cast<long>(j * scale_);
      for (std::size_t a = 0; a < kernel_.height; ++a) {
        for (std::size_t b = 0; b < kernel_.width; ++b) {
          hr(wrap(y - (static_cast<long>(a) - ch), hr.height),
             wrap(x - (static_cast<long>(b) - cw), hr.width)) += kernel_(a, b) * v;
        }
      }
    }
  }
  return hr;
}

Plane DegradationOperator::normal(const Plane& hr) const { return adjoint(apply(hr)); }

Gradient2 gradient(const Plane& x) {
  Gradient2 g{Plane(x.height, x.width), Plane(x.height, x.width)};
  for (std::size_t y = 0; y < x.height; ++y) {
    for (std::size_t c = 0; c < x.width; ++c) {
      g.dx(y, c) = x(y, (c + 1) % x.width) - x(y, c);
      g.dy(y, c) = x((y + 1) % x.height, c) - x(y, c);
    }
  }
  return g;
}

Plane gradient_normal(const Plane& x) {
  const Gradient2 g = gradient(x);
  Plane out(x.height, x.width);
  for (std::size_t y = 0; y < x.height; ++y) {
    for (std::size_t c = 0; c < x.width; ++c) {
      const std::size_t cl = (c + x.width - 1) % x.width;
      const std::size_t yu = (y + x.height - 1) % x.height;
      out(y, c) = g.dx(y, cl) - g.dx(y, c) + g.dy(yu, c) - g.dy(y, c);
    }
  }
  return out;
}

void HqsConfig::validate() const {
  if (!(beta0 > 0.0)) throw ShapeError("beta0 must be positive");
  if (!(beta_growth > 1.0)) throw ShapeError("beta_growth must exceed 1");
  if (!(lambda >= 0.0)) throw ShapeError("lambda must be non-negative");
  if (!(cg_tolerance > 0.0)) throw ShapeError("cg_tolerance must be positive");
}

double HqsConfig::beta(std::size_t k) const {
  return beta0 * std::pow(beta_growth, static_cast<double>(k));
}

double objective(const Plane& x, const Plane& y, const DegradationOperator& op, double lambda) {
  const Plane hx = op.apply(x);
  double data = 0.0;
  for (std::size_t i = 0; i < hx.values.size(); ++i) {
    const double d = y.values[i] - hx.values[i];
    data += d * d;
  }
  double prior = 0.0;
  if (lambda != 0.0) {
    const Gradient2 g = gradient(x);
    prior = dot(g.dx, g.dx) + dot(g.dy, g.dy);
  }
  return 0.5 * data + 0.5 * lambda * prior;
}

Plane ls_solve(const Plane& y, const Plane& u, double beta, const DegradationOperator& op,
               const HqsConfig& cfg, CgReport* report) {
  if (!(beta > 0.0)) throw ShapeError("ls_solve: beta must be positive");
  if (u.height != y.height * op.scale() || u.width != y.width * op.scale()) {
    throw ShapeError("ls_solve: estimate shape does not match the LR observation and scale");
  }
  Plane rhs = op.adjoint(y);
  axpy(beta, u, rhs);
  auto system = [&](const Plane& v) {
    Plane out = op.normal(v);
    axpy(beta, v, out);
    return out;
  };
  return conjugate_gradient(system, rhs, u, cfg, "ls_solve", report);
}

Plane denoise_prox(const Plane& x, double beta, double lambda, const HqsConfig& cfg,
                   CgReport* report) {
  if (!(beta > 0.0)) throw ShapeError("denoise_prox: beta must be positive");
  if (!(lambda >= 0.0)) throw ShapeError("denoise_prox: lambda must be non-negative");
  if (lambda == 0.0) {
    if (report) *report = {0, 0.0};
    return x;
  }
  Plane rhs = x;
  for (auto& v : rhs.values) v *= beta;
  auto system = [&](const Plane& v) {
    Plane out = gradient_normal(v);
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = lambda * out.values[i] + beta * v.values[i];
    return out;
  };
  return conjugate_gradient(system, rhs, x, cfg, "denoise_prox", report);
}

HqsResult hqs_run(const Plane& y, const DegradationOperator& op, const HqsConfig& cfg,
                  const Plane& x0) {
  cfg.validate();
  HqsResult result{x0, x0, {}};
  std::size_t step = 0;
  result.history.push_back({step++, "init", 0.0, objective(x0, y, op, cfg.lambda)});
  for (std::size_t k = 0; k < cfg.iterations; ++k) {
    const double beta = cfg.beta(k);
    result.x = ls_solve(y, result.u, beta, op, cfg);
    result.history.push_back({step++, "ls", beta, objective(result.x, y, op, cfg.lambda)});
    result.u = denoise_prox(result.x, beta, cfg.lambda, cfg);
    result.history.push_back({step++, "prox", beta, objective(result.u, y, op, cfg.lambda)});
  }
  return result;
}

HqsResult hqs_run(const Plane& y, const DegradationOperator& op, const HqsConfig& cfg) {
  const Plane x0 = resize_bicubic(y, y.height * op.scale(), y.width * op.scale(), false, false);
  return hqs_run(y, op, cfg, x0);
}

}  // namespace hsr
