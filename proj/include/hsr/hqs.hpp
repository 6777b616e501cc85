#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hsr/image.hpp"

namespace hsr {

/// Blur with a normalized kernel (circular boundary), then keep every s-th
/// sample. The observation noise is fixed at zero.
class DegradationOperator {
 public:
  DegradationOperator(Plane kernel, std::size_t scale);

  /// Identity blur.
  static DegradationOperator delta(std::size_t scale);
  /// Normalized isotropic Gaussian of odd size `size`.
  static DegradationOperator gaussian(std::size_t size, double sigma, std::size_t scale);

  const Plane& kernel() const { return kernel_; }
  std::size_t scale() const { return scale_; }
  double noise() const { return 0.0; }

  Plane apply(const Plane& hr) const;
  Plane adjoint(const Plane& lr) const;
  /// H^T H x.
  Plane normal(const Plane& hr) const;

 private:
  Plane kernel_;
  std::size_t scale_;
};

/// Circular forward differences (dx, dy) and their adjoint.
struct Gradient2 {
  Plane dx, dy;
};
Gradient2 gradient(const Plane& x);
/// grad^T grad x (the non-negative discrete Laplacian).
Plane gradient_normal(const Plane& x);

struct HqsConfig {
  double beta0 = 0.01;
  double beta_growth = 4.0;
  std::size_t iterations = 8;
  // Weight of the (lambda/2)||grad x||^2 prior; small because y is noise-free.
  double lambda = 1e-3;
  double cg_tolerance = 1e-8;
  std::size_t cg_max_iterations = 2000;

  void validate() const;
  double beta(std::size_t k) const;
};

struct HqsHistoryEntry {
  std::size_t step = 0;       // half-step counter
  std::string kind;           // "init", "ls" or "prox"
  double beta = 0.0;
  double objective = 0.0;     // data + prior objective at the current estimate
};

struct HqsResult {
  Plane x;
  Plane u;
  std::vector<HqsHistoryEntry> history;
};

/// 1/2 ||y - Hx||^2 + lambda/2 ||grad x||^2.
double objective(const Plane& x, const Plane& y, const DegradationOperator& op, double lambda);

struct CgReport {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

/// Solves (H^T H + beta I) x = H^T y + beta u by conjugate gradient, starting at u.
Plane ls_solve(const Plane& y, const Plane& u, double beta, const DegradationOperator& op,
               const HqsConfig& cfg, CgReport* report = nullptr);

/// Solves (beta I + lambda grad^T grad) u = beta x. lambda = 0 returns x.
Plane denoise_prox(const Plane& x, double beta, double lambda, const HqsConfig& cfg,
                   CgReport* report = nullptr);

/// Alternates ls_solve and denoise_prox for cfg.iterations rounds from x0.
HqsResult hqs_run(const Plane& y, const DegradationOperator& op, const HqsConfig& cfg,
                  const Plane& x0);
/// Same, initialized with the bicubic upscale of y.
HqsResult hqs_run(const Plane& y, const DegradationOperator& op, const HqsConfig& cfg);

}  // namespace hsr
