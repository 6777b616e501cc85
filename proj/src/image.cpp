#include "hsr/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <sstream>

#include "hsr/atomic_file.hpp"
#include "hsr/error.hpp"

namespace hsr {
namespace {

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return ext;
}

Image decode_png(const std::string& bytes, const std::string& name) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw IoError("PNG: cannot decode '" + name + "': " + png.message);
  }
  if (png.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&png);
    throw IoError("PNG: unsupported bit depth 16 in '" + name + "' (only 8-bit is supported)");
  }
  // Decode as RGBA so alpha is read and then ignored rather than composited.
  png.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> raw(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, raw.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw IoError("PNG: cannot decode '" + name + "': " + msg);
  }
  const std::size_t h = png.height;
  const std::size_t w = png.width;
  std::vector<double> rgb(h * w * 3);
  for (std::size_t i = 0; i < h * w; ++i) {
    for (std::size_t c = 0; c < 3; ++c) rgb[i * 3 + c] = raw[i * 4 + c] / 255.0;
  }
  return Image(h, w, std::move(rgb));
}

// Skips whitespace and '#' comments in a PNM header, then reads one integer.
std::size_t read_pnm_int(const std::string& bytes, std::size_t& pos, const std::string& name) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  std::size_t value = 0;
  std::size_t digits = 0;
  while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
    value = value * 10 + static_cast<std::size_t>(bytes[pos] - '0');
    ++pos;
    ++digits;
  }
  if (digits == 0) throw IoError("PPM: malformed header in '" + name + "'");
  return value;
}

Image decode_ppm(const std::string& bytes, const std::string& name) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
    throw IoError("PPM: unsupported format in '" + name + "' (only binary P6 is supported)");
  }
  std::size_t pos = 2;
  const std::size_t w = read_pnm_int(bytes, pos, name);
  const std::size_t h = read_pnm_int(bytes, pos, name);
  const std::size_t maxval = read_pnm_int(bytes, pos, name);
  if (maxval != 255) {
    throw IoError("PPM: unsupported bit depth in '" + name + "' (maxval " + std::to_string(maxval) +
                  ", only 255 is supported)");
  }
  ++pos;  // single whitespace before the raster
  if (w == 0 || h == 0) throw IoError("PPM: empty image '" + name + "'");
  if (bytes.size() < pos + w * h * 3) throw IoError("PPM: truncated raster in '" + name + "'");
  std::vector<double> rgb(w * h * 3);
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    rgb[i] = static_cast<unsigned char>(bytes[pos + i]) / 255.0;
  }
  return Image(h, w, std::move(rgb));
}

std::string encode_png(const std::vector<std::uint8_t>& raw, std::size_t h, std::size_t w,
                       bool gray) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(w);
  png.height = static_cast<png_uint_32>(h);
  png.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, raw.data(), 0, nullptr)) {
    throw IoError(std::string("PNG: encoder failed: ") + png.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, raw.data(), 0, nullptr)) {
    throw IoError(std::string("PNG: encoder failed: ") + png.message);
  }
  out.resize(size);
  return out;
}

}  // namespace

Image::Image(std::size_t height, std::size_t width)
    : height_(height), width_(width), pixels_(height * width * 3, 0.0) {
  if (height == 0 || width == 0) throw ShapeError("image dimensions must be at least 1");
}

Image::Image(std::size_t height, std::size_t width, std::vector<double> rgb)
    : height_(height), width_(width), pixels_(std::move(rgb)) {
  if (height == 0 || width == 0) throw ShapeError("image dimensions must be at least 1");
  if (pixels_.size() != height * width * 3) {
    throw ShapeError("image buffer has " + std::to_string(pixels_.size()) + " values, expected " +
                     std::to_string(height * width * 3));
  }
  for (auto& v : pixels_) v = std::clamp(v, 0.0, 1.0);
}

void Image::set(std::size_t y, std::size_t x, std::size_t c, double v) {
  pixels_[(y * width_ + x) * 3 + c] = std::clamp(v, 0.0, 1.0);
}

Plane Image::channel(std::size_t c) const {
  Plane p(height_, width_);
  for (std::size_t i = 0; i < height_ * width_; ++i) p.values[i] = pixels_[i * 3 + c];
  return p;
}

Image Image::from_planes(const Plane& r, const Plane& g, const Plane& b) {
  if (r.height != g.height || r.height != b.height || r.width != g.width || r.width != b.width) {
    throw ShapeError("from_planes: channel sizes differ");
  }
  std::vector<double> rgb(r.values.size() * 3);
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    rgb[i * 3] = r.values[i];
    rgb[i * 3 + 1] = g.values[i];
    rgb[i * 3 + 2] = b.values[i];
  }
  return Image(r.height, r.width, std::move(rgb));
}

Image load_image(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const std::string name = path.string();
  static const unsigned char kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0) return decode_png(bytes, name);
  if (bytes.size() >= 2 && bytes[0] == 'P') return decode_ppm(bytes, name);
  throw IoError("unsupported image format in '" + name + "' (expected PNG or PPM P6)");
}

void save_image(const Image& img, const std::filesystem::path& path) {
  std::vector<std::uint8_t> raw(img.pixels().size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = quantize(img.pixels()[i]);
  const std::string ext = lower_extension(path);
  if (ext == ".png") {
    write_file_atomic(path, encode_png(raw, img.height(), img.width(), false));
  } else if (ext == ".ppm") {
    std::ostringstream os;
    os << "P6\n" << img.width() << " " << img.height() << "\n255\n";
    os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    write_file_atomic(path, os.str());
  } else {
    throw IoError("unsupported output format '" + ext + "' (use .png or .ppm)");
  }
}

void save_gray(const Plane& plane, const std::filesystem::path& path) {
  std::vector<std::uint8_t> raw(plane.values.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = quantize(plane.values[i]);
  const std::string ext = lower_extension(path);
  if (ext == ".png") {
    write_file_atomic(path, encode_png(raw, plane.height, plane.width, true));
  } else if (ext == ".pgm") {
    std::ostringstream os;
    os << "P5\n" << plane.width << " " << plane.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    write_file_atomic(path, os.str());
  } else {
    throw IoError("unsupported grayscale format '" + ext + "' (use .pgm or .png)");
  }
}

Tensor image_to_tensor(const Image& img) {
  const std::size_t h = img.height();
  const std::size_t w = img.width();
  std::vector<double> v(3 * h * w);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < h * w; ++i) v[c * h * w + i] = img.pixels()[i * 3 + c];
  }
  return Tensor::from({1, 3, h, w}, std::move(v));
}

Image tensor_to_image(const Tensor& t) {
  const Shape& s = t.shape();
  if (s.c != 3) throw ShapeError("tensor_to_image: expected 3 channels, got " + s.str());
  std::vector<double> rgb(s.h * s.w * 3);
  auto d = t.data();
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < s.plane(); ++i) rgb[i * 3 + c] = d[c * s.plane() + i];
  }
  return Image(s.h, s.w, std::move(rgb));
}

Image pad_to_multiple(const Image& img, std::size_t multiple) {
  return pad_reflect(img, (img.height() + multiple - 1) / multiple * multiple,
                     (img.width() + multiple - 1) / multiple * multiple);
}

Image pad_reflect(const Image& img, std::size_t ph, std::size_t pw) {
  const std::size_t h = img.height();
  const std::size_t w = img.width();
  if (ph < h || pw < w) throw ShapeError("pad_reflect: target smaller than image");
  if (ph == h && pw == w) return img;
  auto reflect = [](std::size_t i, std::size_t n) {
    if (n == 1) return std::size_t{0};
    const std::size_t period = 2 * (n - 1);
    i %= period;
    return i < n ? i : period - i;
  };
  Image out(ph, pw);
  for (std::size_t y = 0; y < ph; ++y) {
    for (std::size_t x = 0; x < pw; ++x) {
      for (std::size_t c = 0; c < 3; ++c) out.set(y, x, c, img.at(reflect(y, h), reflect(x, w), c));
    }
  }
  return out;
}

Image crop(const Image& img, std::size_t y, std::size_t x, std::size_t h, std::size_t w) {
  if (y + h > img.height() || x + w > img.width()) throw ShapeError("crop: window outside image");
  Image out(h, w);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      for (std::size_t c = 0; c < 3; ++c) out.set(i, j, c, img.at(y + i, x + j, c));
    }
  }
  return out;
}

}  // namespace hsr
