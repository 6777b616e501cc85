#include "hsr/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "hsr/error.hpp"

namespace hsr {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMatrix = Eigen::Map<RowMatrix>;
using ConstMapMatrix = Eigen::Map<const RowMatrix>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                     b.shape().str());
  }
}

struct ConvGeometry {
  std::size_t in_c, in_h, in_w;
  std::size_t kh, kw, stride, pad;
  std::size_t out_h, out_w;

  std::size_t rows() const { return in_c * kh * kw; }
  std::size_t cols() const { return out_h * out_w; }
  bool is_pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

// cols[(ci*kh + a)*kw + b][oy*out_w + ox] = input[ci][oy*stride + a - pad][ox*stride + b - pad]
void im2col(const ConvGeometry& g, const double* in, double* cols) {
  std::size_t row = 0;
  for (std::size_t ci = 0; ci < g.in_c; ++ci) {
    const double* plane = in + ci * g.in_h * g.in_w;
    for (std::size_t a = 0; a < g.kh; ++a) {
      for (std::size_t b = 0; b < g.kw; ++b, ++row) {
        double* dst = cols + row * g.cols();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + a) - static_cast<long>(g.pad);
          double* line = dst + oy * g.out_w;
          if (iy < 0 || iy >= static_cast<long>(g.in_h)) {
            std::fill(line, line + g.out_w, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * g.in_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + b) - static_cast<long>(g.pad);
            line[ox] = (ix < 0 || ix >= static_cast<long>(g.in_w)) ? 0.0
                                                                    : src[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const double* cols, double* in_grad) {
  std::size_t row = 0;
  for (std::size_t ci = 0; ci < g.in_c; ++ci) {
    double* plane = in_grad + ci * g.in_h * g.in_w;
    for (std::size_t a = 0; a < g.kh; ++a) {
      for (std::size_t b = 0; b < g.kw; ++b, ++row) {
        const double* src = cols + row * g.cols();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + a) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
          double* dst = plane + static_cast<std::size_t>(iy) * g.in_w;
          const double* line = src + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + b) - static_cast<long>(g.pad);
            if (ix >= 0 && ix < static_cast<long>(g.in_w)) dst[ix] += line[ox];
          }
        }
      }
    }
  }
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return Tensor::make_result(
      x.shape(), std::move(out), {x},
      [x, deriv](std::span<const double> g, std::vector<std::span<double>>& gin) {
        auto v = x.data();
        for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * deriv(v[i]);
      });
}

struct Interp {
  std::size_t i0, i1;
  double t;
};

std::vector<Interp> bilinear_table(std::size_t in, std::size_t factor) {
  std::vector<Interp> table(in * factor);
  const double max_pos = static_cast<double>(in - 1);
  for (std::size_t o = 0; o < table.size(); ++o) {
    double src = (static_cast<double>(o) + 0.5) / static_cast<double>(factor) - 0.5;
    src = std::clamp(src, 0.0, max_pos);
    const auto i0 = static_cast<std::size_t>(std::floor(src));
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    table[o] = {i0, i1, src - static_cast<double>(i0)};
  }
  return table;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              std::size_t stride, std::size_t pad) {
  const Shape& is = input.shape();
  const Shape& ws = weight.shape();
  if (is.c != ws.c) {
    throw ShapeError("conv2d: input " + is.str() + " has " + std::to_string(is.c) +
                     " channels but weight " + ws.str() + " expects " + std::to_string(ws.c));
  }
  if (bias.shape() != Shape{1, ws.n, 1, 1}) {
    throw ShapeError("conv2d: bias " + bias.shape().str() + " does not match weight " + ws.str());
  }
  if (stride == 0) throw ShapeError("conv2d: stride must be at least 1");
  if (is.h + 2 * pad < ws.h || is.w + 2 * pad < ws.w) {
    throw ShapeError("conv2d: empty output for input " + is.str() + " and weight " + ws.str());
  }
  ConvGeometry g{is.c, is.h, is.w, ws.h, ws.w, stride, pad,
                 (is.h + 2 * pad - ws.h) / stride + 1, (is.w + 2 * pad - ws.w) / stride + 1};
  const std::size_t out_c = ws.n;
  const Shape os{is.n, out_c, g.out_h, g.out_w};

  std::vector<double> out(os.numel());
  std::vector<double> cols(g.is_pointwise() ? 0 : g.rows() * g.cols());
  ConstMapMatrix wmat(weight.data().data(), out_c, g.rows());
  auto b = bias.data();
  for (std::size_t n = 0; n < is.n; ++n) {
    const double* src = input.data().data() + n * is.c * is.h * is.w;
    const double* colp = src;
    if (!g.is_pointwise()) {
      im2col(g, src, cols.data());
      colp = cols.data();
    }
    MapMatrix omat(out.data() + n * out_c * g.cols(), out_c, g.cols());
    omat.noalias() = wmat * ConstMapMatrix(colp, g.rows(), g.cols());
    for (std::size_t co = 0; co < out_c; ++co) omat.row(co).array() += b[co];
  }

  return Tensor::make_result(
      os, std::move(out), {input, weight, bias},
      [input, weight, g, out_c](std::span<const double> grad,
                                std::vector<std::span<double>>& gin) {
        const Shape& is = input.shape();
        const std::size_t in_size = is.c * is.h * is.w;
        ConstMapMatrix wmat(weight.data().data(), out_c, g.rows());
        std::vector<double> cols(g.rows() * g.cols());
        for (std::size_t n = 0; n < is.n; ++n) {
          ConstMapMatrix gout(grad.data() + n * out_c * g.cols(), out_c, g.cols());
          const double* src = input.data().data() + n * in_size;
          if (!gin[1].empty()) {
            const double* colp = src;
            if (!g.is_pointwise()) {
              im2col(g, src, cols.data());
              colp = cols.data();
            }
            MapMatrix gw(gin[1].data(), out_c, g.rows());
            gw.noalias() += gout * ConstMapMatrix(colp, g.rows(), g.cols()).transpose();
          }
          if (!gin[2].empty()) {
            for (std::size_t co = 0; co < out_c; ++co) gin[2][co] += gout.row(co).sum();
          }
          if (!gin[0].empty()) {
            if (g.is_pointwise()) {
              MapMatrix gi(gin[0].data() + n * in_size, g.rows(), g.cols());
              gi.noalias() += wmat.transpose() * gout;
            } else {
              MapMatrix gcols(cols.data(), g.rows(), g.cols());
              gcols.noalias() = wmat.transpose() * gout;
              col2im_add(g, cols.data(), gin[0].data() + n * in_size);
            }
          }
        }
      });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  if (!(slope > 0.0 && slope < 1.0)) throw ShapeError("leaky_relu: slope must be in (0,1)");
  return unary(
      x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v) { return v > 0.0 ? 1.0 : slope; });
}

Tensor sigmoid(const Tensor& x) {
  auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    // Split by sign so exp never overflows.
    const double v = in[i];
    if (v >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
  auto result = Tensor::make_result(x.shape(), std::move(out), {x}, nullptr);
  if (result.requires_grad()) {
    // The derivative is expressed through the output, which the closure reads
    // from the node it belongs to without keeping it alive.
    std::weak_ptr<detail::Node> self = result.node();
    result.node()->backward = [self](std::span<const double> g,
                                     std::vector<std::span<double>>& gin) {
      const auto node = self.lock();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = node->data[i];
        gin[0][i] += g[i] * s * (1.0 - s);
      }
    };
  }
  return result;
}

Tensor max_pool2d(const Tensor& x, std::size_t k) {
  const Shape& s = x.shape();
  if (k == 0 || s.h % k != 0 || s.w % k != 0) {
    throw ShapeError("max_pool2d: spatial size " + s.str() + " is not divisible by " +
                     std::to_string(k));
  }
  const Shape os{s.n, s.c, s.h / k, s.w / k};
  std::vector<double> out(os.numel());
  std::vector<std::size_t> argmax(os.numel());
  auto in = x.data();
  std::size_t o = 0;
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    const std::size_t base = p * s.h * s.w;
    for (std::size_t oy = 0; oy < os.h; ++oy) {
      for (std::size_t ox = 0; ox < os.w; ++ox, ++o) {
        std::size_t best = base + oy * k * s.w + ox * k;
        for (std::size_t a = 0; a < k; ++a) {
          for (std::size_t b = 0; b < k; ++b) {
            const std::size_t idx = base + (oy * k + a) * s.w + ox * k + b;
            if (in[idx] > in[best]) best = idx;
          }
        }
        out[o] = in[best];
        argmax[o] = best;
      }
    }
  }
  return Tensor::make_result(
      os, std::move(out), {x},
      [argmax = std::move(argmax)](std::span<const double> g,
                                   std::vector<std::span<double>>& gin) {
        for (std::size_t i = 0; i < g.size(); ++i) gin[0][argmax[i]] += g[i];
      });
}

Tensor bilinear_upsample(const Tensor& x, std::size_t factor) {
  if (factor != 2 && factor != 4) throw ShapeError("bilinear_upsample: factor must be 2 or 4");
  const Shape& s = x.shape();
  const Shape os{s.n, s.c, s.h * factor, s.w * factor};
  auto ty = bilinear_table(s.h, factor);
  auto tx = bilinear_table(s.w, factor);
  std::vector<double> out(os.numel());
  auto in = x.data();
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    const double* src = in.data() + p * s.plane();
    double* dst = out.data() + p * os.plane();
    for (std::size_t oy = 0; oy < os.h; ++oy) {
      const auto& y = ty[oy];
      for (std::size_t ox = 0; ox < os.w; ++ox) {
        const auto& xx = tx[ox];
        const double top = src[y.i0 * s.w + xx.i0] * (1 - xx.t) + src[y.i0 * s.w + xx.i1] * xx.t;
        const double bot = src[y.i1 * s.w + xx.i0] * (1 - xx.t) + src[y.i1 * s.w + xx.i1] * xx.t;
        dst[oy * os.w + ox] = top * (1 - y.t) + bot * y.t;
      }
    }
  }
  return Tensor::make_result(
      os, std::move(out), {x},
      [s, os, ty = std::move(ty), tx = std::move(tx)](std::span<const double> g,
                                                      std::vector<std::span<double>>& gin) {
        for (std::size_t p = 0; p < s.n * s.c; ++p) {
          const double* gsrc = g.data() + p * os.plane();
          double* gdst = gin[0].data() + p * s.plane();
          for (std::size_t oy = 0; oy < os.h; ++oy) {
            const auto& y = ty[oy];
            for (std::size_t ox = 0; ox < os.w; ++ox) {
              const auto& xx = tx[ox];
              const double v = gsrc[oy * os.w + ox];
              gdst[y.i0 * s.w + xx.i0] += v * (1 - y.t) * (1 - xx.t);
              gdst[y.i0 * s.w + xx.i1] += v * (1 - y.t) * xx.t;
              gdst[y.i1 * s.w + xx.i0] += v * y.t * (1 - xx.t);
              gdst[y.i1 * s.w + xx.i1] += v * y.t * xx.t;
            }
          }
        }
      });
}

namespace {

// Flat index map from shuffled output positions to input positions.
std::vector<std::size_t> shuffle_index(const Shape& in, std::size_t r) {
  const std::size_t oc = in.c / (r * r);
  const std::size_t oh = in.h * r;
  const std::size_t ow = in.w * r;
  std::vector<std::size_t> idx(in.numel());
  std::size_t o = 0;
  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t c = 0; c < oc; ++c) {
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x, ++o) {
          const std::size_t ic = c * r * r + (y % r) * r + (x % r);
          idx[o] = ((n * in.c + ic) * in.h + y / r) * in.w + x / r;
        }
      }
    }
  }
  return idx;
}

Tensor gather(const Tensor& x, const Shape& os, std::vector<std::size_t> src_of) {
  auto in = x.data();
  std::vector<double> out(src_of.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[src_of[i]];
  return Tensor::make_result(
      os, std::move(out), {x},
      [src_of = std::move(src_of)](std::span<const double> g,
                                   std::vector<std::span<double>>& gin) {
        for (std::size_t i = 0; i < g.size(); ++i) gin[0][src_of[i]] += g[i];
      });
}

}  // namespace

Tensor pixel_shuffle(const Tensor& x, std::size_t r) {
  const Shape& s = x.shape();
  if (r == 0 || s.c % (r * r) != 0) {
    throw ShapeError("pixel_shuffle: channels of " + s.str() + " not divisible by " +
                     std::to_string(r * r));
  }
  return gather(x, {s.n, s.c / (r * r), s.h * r, s.w * r}, shuffle_index(s, r));
}

Tensor pixel_unshuffle(const Tensor& x, std::size_t r) {
  const Shape& s = x.shape();
  if (r == 0 || s.h % r != 0 || s.w % r != 0) {
    throw ShapeError("pixel_unshuffle: spatial size of " + s.str() + " not divisible by " +
                     std::to_string(r));
  }
  const Shape in{s.n, s.c * r * r, s.h / r, s.w / r};
  auto fwd = shuffle_index(in, r);
  std::vector<std::size_t> inv(fwd.size());
  for (std::size_t i = 0; i < fwd.size(); ++i) inv[fwd[i]] = i;
  return gather(x, in, std::move(inv));
}

Tensor concat_channels(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw ShapeError("concat_channels: empty input list");
  const Shape& first = xs.front().shape();
  std::size_t total_c = 0;
  for (const auto& t : xs) {
    const Shape& s = t.shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw ShapeError("concat_channels: mismatched shapes " + first.str() + " and " + s.str());
    }
    total_c += s.c;
  }
  const Shape os{first.n, total_c, first.h, first.w};
  const std::size_t plane = first.plane();
  std::vector<double> out(os.numel());
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& t : xs) {
    offsets.push_back(offset);
    const std::size_t c = t.shape().c;
    auto in = t.data();
    for (std::size_t n = 0; n < first.n; ++n) {
      std::copy_n(in.data() + n * c * plane, c * plane,
                  out.data() + (n * total_c + offset) * plane);
    }
    offset += c;
  }
  std::vector<std::size_t> widths;
  for (const auto& t : xs) widths.push_back(t.shape().c);
  return Tensor::make_result(
      os, std::move(out), xs,
      [os, offsets, widths](std::span<const double> g, std::vector<std::span<double>>& gin) {
        const std::size_t plane = os.plane();
        for (std::size_t i = 0; i < gin.size(); ++i) {
          if (gin[i].empty()) continue;
          for (std::size_t n = 0; n < os.n; ++n) {
            const double* src = g.data() + (n * os.c + offsets[i]) * plane;
            double* dst = gin[i].data() + n * widths[i] * plane;
            for (std::size_t j = 0; j < widths[i] * plane; ++j) dst[j] += src[j];
          }
        }
      });
}

Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count) {
  const Shape& s = x.shape();
  if (begin + count > s.c || count == 0) {
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + "," +
                     std::to_string(begin + count) + ") outside " + s.str());
  }
  const Shape os{s.n, count, s.h, s.w};
  const std::size_t plane = s.plane();
  std::vector<double> out(os.numel());
  auto in = x.data();
  for (std::size_t n = 0; n < s.n; ++n) {
    std::copy_n(in.data() + (n * s.c + begin) * plane, count * plane,
                out.data() + n * count * plane);
  }
  return Tensor::make_result(
      os, std::move(out), {x},
      [s, begin, count](std::span<const double> g, std::vector<std::span<double>>& gin) {
        const std::size_t plane = s.plane();
        for (std::size_t n = 0; n < s.n; ++n) {
          double* dst = gin[0].data() + (n * s.c + begin) * plane;
          const double* src = g.data() + n * count * plane;
          for (std::size_t j = 0; j < count * plane; ++j) dst[j] += src[j];
        }
      });
}

std::vector<Tensor> split_channels(const Tensor& x, std::size_t parts) {
  const Shape& s = x.shape();
  if (parts == 0 || s.c % parts != 0) {
    throw ShapeError("split_channels: " + std::to_string(s.c) + " channels cannot be split into " +
                     std::to_string(parts) + " equal parts");
  }
  std::vector<Tensor> out;
  const std::size_t width = s.c / parts;
  for (std::size_t i = 0; i < parts; ++i) out.push_back(slice_channels(x, i * width, width));
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto x = a.data();
  auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b},
                             [](std::span<const double> g, std::vector<std::span<double>>& gin) {
                               for (auto& slot : gin) {
                                 if (slot.empty()) continue;
                                 for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i];
                               }
                             });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto x = a.data();
  auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b},
                             [](std::span<const double> g, std::vector<std::span<double>>& gin) {
                               if (!gin[0].empty())
                                 for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
                               if (!gin[1].empty())
                                 for (std::size_t i = 0; i < g.size(); ++i) gin[1][i] -= g[i];
                             });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto x = a.data();
  auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return Tensor::make_result(
      a.shape(), std::move(out), {a, b},
      [a, b](std::span<const double> g, std::vector<std::span<double>>& gin) {
        auto x = a.data();
        auto y = b.data();
        if (!gin[0].empty())
          for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * y[i];
        if (!gin[1].empty())
          for (std::size_t i = 0; i < g.size(); ++i) gin[1][i] += g[i] * x[i];
      });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, [factor](double v) { return v * factor; }, [factor](double) { return factor; });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return Tensor::make_result({1, 1, 1, 1}, {total}, {x},
                             [](std::span<const double> g, std::vector<std::span<double>>& gin) {
                               for (auto& v : gin[0]) v += g[0];
                             });
}

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "l1_loss");
  auto p = pred.data();
  auto t = target.data();
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += std::abs(p[i] - t[i]);
  const double inv_n = 1.0 / static_cast<double>(p.size());
  return Tensor::make_result(
      {1, 1, 1, 1}, {total * inv_n}, {pred, target},
      [pred, target, inv_n](std::span<const double> g, std::vector<std::span<double>>& gin) {
        auto p = pred.data();
        auto t = target.data();
        for (std::size_t i = 0; i < p.size(); ++i) {
          const double d = p[i] - t[i];
          const double sgn = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
          if (!gin[0].empty()) gin[0][i] += g[0] * inv_n * sgn;
          if (!gin[1].empty()) gin[1][i] -= g[0] * inv_n * sgn;
        }
      });
}

}  // namespace hsr
