#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hsr/error.hpp"
#include "hsr/metrics.hpp"

namespace hsr {
namespace {

void require_same_size(const Plane& a, const Plane& b, const char* what) {
  if (a.height != b.height || a.width != b.width) {
    throw ShapeError(std::string(what) + ": size mismatch " + std::to_string(a.height) + "x" +
                     std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                     std::to_string(b.width));
  }
}

Plane crop_plane(const Plane& p, std::size_t crop) {
  if (2 * crop >= p.height || 2 * crop >= p.width) throw ShapeError("crop removes the whole image");
  Plane out(p.height - 2 * crop, p.width - 2 * crop);
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) out(y, x) = p(y + crop, x + crop);
  }
  return out;
}

std::vector<double> gaussian_window(std::size_t size, double sigma) {
  std::vector<double> w(size * size);
  const double c = static_cast<double>(size / 2);
  double total = 0.0;
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double dy = static_cast<double>(y) - c;
      const double dx = static_cast<double>(x) - c;
      w[y * size + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      total += w[y * size + x];
    }
  }
  for (auto& v : w) v /= total;
  return w;
}

}  // namespace

std::optional<double> psnr(const Plane& a, const Plane& b, std::size_t crop) {
  require_same_size(a, b, "psnr");
  const Plane ca = crop ? crop_plane(a, crop) : a;
  const Plane cb = crop ? crop_plane(b, crop) : b;
  double mse = 0.0;
  for (std::size_t i = 0; i < ca.values.size(); ++i) {
    const double d = ca.values[i] - cb.values[i];
    mse += d * d;
  }
  mse /= static_cast<double>(ca.values.size());
  if (mse == 0.0) return std::nullopt;
  return 10.0 * std::log10(1.0 / mse);
}

std::optional<double> psnr(const Image& a, const Image& b, std::size_t crop, bool y_only) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError("psnr: image sizes differ");
  }
  if (y_only) return psnr(rgb_to_y(a), rgb_to_y(b), crop);
  // RGB: one plane three times as wide holds every channel value.
  Plane pa(a.height(), a.width() * 3);
  Plane pb(b.height(), b.width() * 3);
  pa.values = a.pixels();
  pb.values = b.pixels();
  if (crop == 0) return psnr(pa, pb, 0);
  std::vector<double> da, db;
  for (std::size_t y = crop; y + crop < a.height(); ++y) {
    for (std::size_t x = crop; x + crop < a.width(); ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        da.push_back(a.at(y, x, c));
        db.push_back(b.at(y, x, c));
      }
    }
  }
  if (da.empty()) throw ShapeError("crop removes the whole image");
  Plane qa(1, da.size());
  Plane qb(1, db.size());
  qa.values = std::move(da);
  qb.values = std::move(db);
  return psnr(qa, qb, 0);
}

double ssim(const Plane& a, const Plane& b) {
  require_same_size(a, b, "ssim");
  constexpr std::size_t kWin = 11;
  if (a.height < kWin || a.width < kWin) {
    throw ShapeError("ssim: image smaller than the 11x11 window");
  }
  static const std::vector<double> window = gaussian_window(kWin, 1.5);
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  const std::size_t oh = a.height - kWin + 1;
  const std::size_t ow = a.width - kWin + 1;
  double total = 0.0;
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double ma = 0.0, mb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
      for (std::size_t i = 0; i < kWin; ++i) {
        for (std::size_t j = 0; j < kWin; ++j) {
          const double w = window[i * kWin + j];
          const double va = a(y + i, x + j);
          const double vb = b(y + i, x + j);
          ma += w * va;
          mb += w * vb;
          saa += w * va * va;
          sbb += w * vb * vb;
          sab += w * va * vb;
        }
      }
      const double var_a = saa - ma * ma;
      const double var_b = sbb - mb * mb;
      const double cov = sab - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
               ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
    }
  }
  return total / static_cast<double>(oh * ow);
}

double ssim(const Image& a, const Image& b, bool y_only, std::size_t crop) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError("ssim: image sizes differ");
  }
  auto prep = [crop](const Plane& p) { return crop ? crop_plane(p, crop) : p; };
  if (y_only) return ssim(prep(rgb_to_y(a)), prep(rgb_to_y(b)));
  double total = 0.0;
  for (std::size_t c = 0; c < 3; ++c) total += ssim(prep(a.channel(c)), prep(b.channel(c)));
  return total / 3.0;
}

void LssParams::validate() const {
  if (patch == 0 || region % patch != 0) throw ShapeError("LSS region must be a multiple of the patch size");
  if (patch % 2 == 0) throw ShapeError("LSS patch size must be odd");
  if (tiles_per_side() < 2) throw ShapeError("LSS region must hold at least 2x2 tiles");
  if (!(l_range > 0.0)) throw ShapeError("LSS l_range must be positive");
}

std::size_t LssParams::region_offset() const {
  return (tiles_per_side() / 2 - 1) * patch + patch / 2;
}

double lss_at(const Plane& l, std::size_t y, std::size_t x, const LssParams& params) {
  params.validate();
  const std::size_t off = params.region_offset();
  if (y < off || x < off || y - off + params.region > l.height ||
      x - off + params.region > l.width) {
    throw ShapeError("lss_at: region around (" + std::to_string(y) + "," + std::to_string(x) +
                     ") is out of bounds");
  }
  const std::size_t half = params.patch / 2;
  const std::size_t ry = y - off;
  const std::size_t rx = x - off;
  const double area = static_cast<double>(params.patch * params.patch);
  double best = -1.0;
  const std::size_t tiles = params.tiles_per_side();
  for (std::size_t ty = 0; ty < tiles; ++ty) {
    for (std::size_t tx = 0; tx < tiles; ++tx) {
      const std::size_t y0 = ry + ty * params.patch;
      const std::size_t x0 = rx + tx * params.patch;
      const bool overlaps = y0 <= y + half && y - half < y0 + params.patch && x0 <= x + half &&
                            x - half < x0 + params.patch;
      if (params.exclude_self && overlaps) continue;
      double ssd = 0.0;
      for (std::size_t i = 0; i < params.patch; ++i) {
        for (std::size_t j = 0; j < params.patch; ++j) {
          const double d = (l(y - half + i, x - half + j) - l(y0 + i, x0 + j)) / params.l_range;
          ssd += d * d;
        }
      }
      best = std::max(best, std::exp(-ssd / area));
    }
  }
  if (best < 0.0) throw ShapeError("lss_at: self-tile exclusion left no tiles");
  return best;
}

std::size_t lss_block_count(std::size_t height, std::size_t width, const LssParams& params) {
  return (height / params.region) * (width / params.region);
}

double lss_image(const Image& img, const LssParams& params) {
  params.validate();
  if (img.height() < params.region || img.width() < params.region) {
    throw ShapeError("lss_image: image must be at least " + std::to_string(params.region) + "x" +
                     std::to_string(params.region));
  }
  const Plane l = rgb_to_lab(img).l;
  const std::size_t off = params.region_offset();
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t by = 0; by + params.region <= l.height; by += params.region) {
    for (std::size_t bx = 0; bx + params.region <= l.width; bx += params.region) {
      total += lss_at(l, by + off, bx + off, params);
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double plcc(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("plcc: series lengths differ");
  if (x.size() < 3) throw ShapeError("plcc: need at least 3 samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw ShapeError("plcc: undefined for a constant series");
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double srcc(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("srcc: series lengths differ");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return plcc(rx, ry);
}

EvalReport summarize(std::vector<EvalRow> rows) {
  EvalReport report;
  report.rows = std::move(rows);
  std::vector<double> ps, ls;
  for (const auto& r : report.rows) {
    report.mean_ssim += r.ssim;
    report.mean_lss += r.lss;
    if (r.psnr) {
      ps.push_back(*r.psnr);
      ls.push_back(r.lss);
    }
  }
  const double n = static_cast<double>(std::max<std::size_t>(report.rows.size(), 1));
  report.mean_ssim /= n;
  report.mean_lss /= n;
  if (!ps.empty()) report.mean_psnr = std::accumulate(ps.begin(), ps.end(), 0.0) / static_cast<double>(ps.size());
  if (ps.size() >= 3) {
    try {
      report.plcc_psnr_lss = plcc(ps, ls);
      report.srcc_psnr_lss = srcc(ps, ls);
    } catch (const ShapeError&) {
      // Constant column: correlation undefined, left empty.
    }
  }
  return report;
}

std::string eval_csv(const EvalReport& report) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(6);
  os << "name,psnr,ssim,lss\n";
  for (const auto& r : report.rows) {
    os << r.name << ",";
    if (r.psnr) {
      os << *r.psnr;
    } else {
      os << "identical";
    }
    os << "," << r.ssim << "," << r.lss << "\n";
  }
  return os.str();
}

}  // namespace hsr
