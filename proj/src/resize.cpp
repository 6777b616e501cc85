#include <algorithm>
#include <cmath>

#include "hsr/error.hpp"
#include "hsr/image.hpp"

namespace hsr {

double cubic_kernel(double x) {
  constexpr double a = -0.5;
  const double ax = std::abs(x);
  const double ax2 = ax * ax;
  const double ax3 = ax2 * ax;
  if (ax <= 1.0) return (a + 2.0) * ax3 - (a + 3.0) * ax2 + 1.0;
  if (ax < 2.0) return a * ax3 - 5.0 * a * ax2 + 8.0 * a * ax - 4.0 * a;
  return 0.0;
}

ResizeWeights bicubic_weights(std::size_t in_size, std::size_t out_size, bool antialias) {
  if (in_size == 0 || out_size == 0) throw ShapeError("bicubic resize: zero size");
  const double scale = static_cast<double>(out_size) / static_cast<double>(in_size);
  const bool widen = antialias && scale < 1.0;
  const double kernel_scale = widen ? scale : 1.0;
  const double width = 4.0 / kernel_scale;
  const auto taps = static_cast<std::size_t>(std::ceil(width)) + 2;

  ResizeWeights rw;
  rw.indices.resize(out_size);
  rw.weights.resize(out_size);
  for (std::size_t i = 0; i < out_size; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / scale - 0.5;
    const auto left = static_cast<long>(std::floor(u - width / 2.0));
    double total = 0.0;
    for (std::size_t k = 0; k < taps; ++k) {
      const long idx = left + static_cast<long>(k);
      const double wgt = kernel_scale * cubic_kernel(kernel_scale * (u - static_cast<double>(idx)));
      if (wgt == 0.0) continue;
      const long clamped = std::clamp<long>(idx, 0, static_cast<long>(in_size) - 1);
      rw.indices[i].push_back(static_cast<std::size_t>(clamped));
      rw.weights[i].push_back(wgt);
      total += wgt;
    }
    double check = 0.0;
    for (auto& wgt : rw.weights[i]) {
      wgt /= total;
      check += wgt;
    }
    if (std::abs(check - 1.0) > 1e-12) throw NumericError("bicubic weights do not sum to 1");
  }
  return rw;
}

Plane resize_axis(const Plane& plane, const ResizeWeights& rw, bool horizontal) {
  const std::size_t out_n = rw.indices.size();
  Plane out(horizontal ? plane.height : out_n, horizontal ? out_n : plane.width);
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) {
      const std::size_t o = horizontal ? x : y;
      double acc = 0.0;
      for (std::size_t k = 0; k < rw.indices[o].size(); ++k) {
        const std::size_t src = rw.indices[o][k];
        acc += rw.weights[o][k] * (horizontal ? plane(y, src) : plane(src, x));
      }
      out(y, x) = acc;
    }
  }
  return out;
}

Plane resize_bicubic(const Plane& plane, std::size_t out_h, std::size_t out_w, bool antialias,
                     bool clamp) {
  if (out_h == 0 || out_w == 0) throw ShapeError("bicubic resize: zero target size");
  Plane out = resize_axis(plane, bicubic_weights(plane.width, out_w, antialias), true);
  out = resize_axis(out, bicubic_weights(plane.height, out_h, antialias), false);
  if (clamp) {
    for (auto& v : out.values) v = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

Image resize_bicubic(const Image& img, std::size_t out_h, std::size_t out_w, bool antialias) {
  return Image::from_planes(resize_bicubic(img.channel(0), out_h, out_w, antialias),
                            resize_bicubic(img.channel(1), out_h, out_w, antialias),
                            resize_bicubic(img.channel(2), out_h, out_w, antialias));
}

}  // namespace hsr
