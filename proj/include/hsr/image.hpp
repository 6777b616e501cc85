#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "hsr/tensor.hpp"

namespace hsr {

/// Single-channel real-valued map, row-major.
struct Plane {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  Plane() = default;
  Plane(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), values(h * w, fill) {}

  double& operator()(std::size_t y, std::size_t x) { return values[y * width + x]; }
  double operator()(std::size_t y, std::size_t x) const { return values[y * width + x]; }
};

/// H x W x 3 picture, interleaved RGB, values in [0,1].
class Image {
 public:
  Image() = default;
  Image(std::size_t height, std::size_t width);
  // Values are clamped to [0,1].
  Image(std::size_t height, std::size_t width, std::vector<double> rgb);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  const std::vector<double>& pixels() const { return pixels_; }

  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels_[(y * width_ + x) * 3 + c];
  }
  void set(std::size_t y, std::size_t x, std::size_t c, double v);

  Plane channel(std::size_t c) const;
  static Image from_planes(const Plane& r, const Plane& g, const Plane& b);

  bool operator==(const Image&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> pixels_;
};

/// PNG (8-bit gray/gray+alpha/RGB/RGBA/palette; alpha dropped) or binary PPM.
Image load_image(const std::filesystem::path& path);
/// Format chosen by extension: .png or .ppm. Quantized to 8 bits, written atomically.
void save_image(const Image& img, const std::filesystem::path& path);
/// 8-bit grayscale: .pgm (P5) or .png.
void save_gray(const Plane& plane, const std::filesystem::path& path);

Tensor image_to_tensor(const Image& img);
/// First batch item of a (b, 3, h, w) tensor, clamped to [0,1].
Image tensor_to_image(const Tensor& t);

/// Separable bicubic resampling (a = -0.5) with half-pixel centers and edge
/// clamping. With `antialias`, downscaling widens the kernel by the inverse
/// scale. Output is clamped to [0,1].
Image resize_bicubic(const Image& img, std::size_t out_h, std::size_t out_w, bool antialias = true);
Plane resize_bicubic(const Plane& plane, std::size_t out_h, std::size_t out_w, bool antialias = true,
                     bool clamp = true);

/// One-axis resampling weights: output i reads indices[i][k] with weights[i][k].
struct ResizeWeights {
  std::vector<std::vector<std::size_t>> indices;
  std::vector<std::vector<double>> weights;
};
ResizeWeights bicubic_weights(std::size_t in_size, std::size_t out_size, bool antialias);

/// Applies `weights` along the columns (horizontal) or rows of `plane`. No clamping.
Plane resize_axis(const Plane& plane, const ResizeWeights& weights, bool horizontal);

/// Cubic convolution kernel with a = -0.5.
double cubic_kernel(double x);

/// Reflect-pads bottom and right up to (height, width).
Image pad_reflect(const Image& img, std::size_t height, std::size_t width);
/// Reflect-pads bottom and right so both dims become multiples of `multiple`.
Image pad_to_multiple(const Image& img, std::size_t multiple);
Image crop(const Image& img, std::size_t y, std::size_t x, std::size_t h, std::size_t w);

/// Studio-swing luma: 16/255 + (65.481 R + 128.553 G + 24.966 B) / 255.
Plane rgb_to_y(const Image& img);

struct LabImage {
  Plane l, a, b;
};
/// sRGB -> linear -> XYZ (D65) -> CIELAB, L in [0,100].
LabImage rgb_to_lab(const Image& img);

}  // namespace hsr
