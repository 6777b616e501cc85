#pragma once

// Slow, direct reference implementations shared by the unit tests and the
// acceptance runner.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

#include "hsr/image.hpp"
#include "support.hpp"

namespace hsr::test {

inline double dot(const Plane& a, const Plane& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * b.values[i];
  return s;
}

inline Plane random_kernel(std::size_t size, std::mt19937_64& rng) {
  Plane k = random_plane(size, size, rng, 0.1, 1.0);
  double total = 0.0;
  for (double v : k.values) total += v;
  for (auto& v : k.values) v /= total;
  return k;
}

inline Eigen::VectorXd vec(const Plane& p) {
  return Eigen::Map<const Eigen::VectorXd>(p.values.data(), static_cast<Eigen::Index>(p.values.size()));
}

// Dense H for an h x w HR grid: LR pixel (i, j) = sum_ab k(a, b) x(i*s - a + c, j*s - b + c), circular.
inline Eigen::MatrixXd dense_degradation(const Plane& k, std::size_t s, std::size_t h, std::size_t w) {
  const std::size_t lh = h / s, lw = w / s;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(lh * lw, h * w);
  const long c = static_cast<long>(k.height / 2);
  for (std::size_t i = 0; i < lh; ++i)
    for (std::size_t j = 0; j < lw; ++j)
      for (std::size_t a = 0; a < k.height; ++a)
        for (std::size_t b = 0; b < k.width; ++b) {
          const long y = ((static_cast<long>(i * s) - static_cast<long>(a) + c) % static_cast<long>(h) + h) % h;
          const long x = ((static_cast<long>(j * s) - static_cast<long>(b) + c) % static_cast<long>(w) + w) % w;
          m(i * lw + j, y * w + x) += k(a, b);
        }
  return m;
}

// Stacked circular forward differences [Dx; Dy].
inline Eigen::MatrixXd dense_gradient(std::size_t h, std::size_t w) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2 * h * w, h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t r = y * w + x;
      d(r, y * w + (x + 1) % w) += 1.0;
      d(r, r) -= 1.0;
      d(h * w + r, ((y + 1) % h) * w + x) += 1.0;
      d(h * w + r, r) -= 1.0;
    }
  return d;
}

// Per-window SSIM with a freshly built window and two-pass moments.
inline double naive_ssim(const Plane& a, const Plane& b) {
  double win[11][11];
  double total = 0.0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) {
      win[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
      total += win[i][j];
    }
  for (auto& row : win)
    for (double& v : row) v /= total;
  const double c1 = 1e-4, c2 = 9e-4;
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t y = 0; y + 11 <= a.height; ++y)
    for (std::size_t x = 0; x + 11 <= a.width; ++x) {
      double ma = 0, mb = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          ma += win[i][j] * a(y + i, x + j);
          mb += win[i][j] * b(y + i, x + j);
        }
      double va = 0, vb = 0, cov = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double da = a(y + i, x + j) - ma, db = b(y + i, x + j) - mb;
          va += win[i][j] * da * da;
          vb += win[i][j] * db * db;
          cov += win[i][j] * da * db;
        }
      sum += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++n;
    }
  return sum / static_cast<double>(n);
}

// Tile-by-tile SSD over the 40x40 region whose top-left corner is (ry, rx),
// against the 5x5 patch centered at (py, px).
inline double brute_lss(const Plane& l, std::size_t ry, std::size_t rx, std::size_t py, std::size_t px) {
  double best = 0.0;
  for (std::size_t ty = 0; ty < 8; ++ty)
    for (std::size_t tx = 0; tx < 8; ++tx) {
      const long y0 = static_cast<long>(ry + 5 * ty), x0 = static_cast<long>(rx + 5 * tx);
      const long pyl = static_cast<long>(py) - 2, pxl = static_cast<long>(px) - 2;
      const bool overlap = y0 < pyl + 5 && pyl < y0 + 5 && x0 < pxl + 5 && pxl < x0 + 5;
      if (overlap) continue;
      double ssd = 0.0;
      for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) {
          const double d = (l(py - 2 + i, px - 2 + j) - l(y0 + i, x0 + j)) / 100.0;
          ssd += d * d;
        }
      best = std::max(best, std::exp(-ssd / 25.0));
    }
  return best;
}

}  // namespace hsr::test
