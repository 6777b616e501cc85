#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "hsr/image.hpp"

namespace hsr::test {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("hsr_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Image random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) img.set(y, x, c, u(rng));
  return img;
}

inline Image smooth_image(std::size_t h, std::size_t w) {
  Image img(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double fy = static_cast<double>(y) / h;
      const double fx = static_cast<double>(x) / w;
      img.set(y, x, 0, 0.5 + 0.3 * std::sin(2.0 * M_PI * fx) * std::cos(2.0 * M_PI * fy));
      img.set(y, x, 1, 0.2 + 0.6 * fx);
      img.set(y, x, 2, 0.7 - 0.4 * fy);
    }
  return img;
}

// Checkerboard, a disc and a bar: hard edges that bicubic upscaling blurs.
inline Image edge_image(std::size_t n) {
  Image img(n, n);
  const double s = n / 64.0;
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      const bool check = ((x / 8) + (y / 8)) % 2 == 0;
      const double dx = x - 40.0 * s, dy = y - 24.0 * s;
      const bool disc = dx * dx + dy * dy < 144.0 * s * s;
      const bool bar = y > 44 * s && y < 56 * s && x > 6 * s && x < 58 * s;
      double r = check ? 0.8 : 0.2, g = 0.5, b = check ? 0.3 : 0.6;
      if (disc) r = 0.9, g = 0.2, b = 0.1;
      if (bar) r = 0.1, g = 0.9, b = 0.9;
      img.set(y, x, 0, r);
      img.set(y, x, 1, g);
      img.set(y, x, 2, b);
    }
  return img;
}

inline Plane random_plane(std::size_t h, std::size_t w, std::mt19937_64& rng, double lo = 0.0,
                          double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Plane p(h, w);
  for (auto& v : p.values) v = u(rng);
  return p;
}

}  // namespace hsr::test
