#include <cmath>

#include "hsr/image.hpp"

namespace hsr {
namespace {

double srgb_to_linear(double v) {
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

// D65 reference white, Y normalized to 1.
constexpr double kWhiteX = 0.95047;
constexpr double kWhiteY = 1.0;
constexpr double kWhiteZ = 1.08883;

}  // namespace

Plane rgb_to_y(const Image& img) {
  Plane y(img.height(), img.width());
  for (std::size_t i = 0; i < y.values.size(); ++i) {
    const double r = img.pixels()[i * 3];
    const double g = img.pixels()[i * 3 + 1];
    const double b = img.pixels()[i * 3 + 2];
    y.values[i] = (16.0 + 65.481 * r + 128.553 * g + 24.966 * b) / 255.0;
  }
  return y;
}

LabImage rgb_to_lab(const Image& img) {
  LabImage lab{Plane(img.height(), img.width()), Plane(img.height(), img.width()),
               Plane(img.height(), img.width())};
  for (std::size_t i = 0; i < lab.l.values.size(); ++i) {
    const double r = srgb_to_linear(img.pixels()[i * 3]);
    const double g = srgb_to_linear(img.pixels()[i * 3 + 1]);
    const double b = srgb_to_linear(img.pixels()[i * 3 + 2]);
    const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    const double fx = lab_f(x / kWhiteX);
    const double fy = lab_f(y / kWhiteY);
    const double fz = lab_f(z / kWhiteZ);
    lab.l.values[i] = 116.0 * fy - 16.0;
    lab.a.values[i] = 500.0 * (fx - fy);
    lab.b.values[i] = 200.0 * (fy - fz);
  }
  return lab;
}

}  // namespace hsr
