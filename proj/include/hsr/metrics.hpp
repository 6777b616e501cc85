#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hsr/image.hpp"

namespace hsr {

/// PSNR in dB for [0,1] data after removing `crop` pixels from every border.
/// Returns nullopt when the inputs are identical (MSE = 0).
std::optional<double> psnr(const Plane& a, const Plane& b, std::size_t crop = 0);
/// On luma when `y_only`, otherwise over all RGB values.
std::optional<double> psnr(const Image& a, const Image& b, std::size_t crop, bool y_only);

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// dynamic range 1, averaged over all valid window positions.
double ssim(const Plane& a, const Plane& b);
/// On luma when `y_only`, otherwise the mean of the per-channel values.
double ssim(const Image& a, const Image& b, bool y_only, std::size_t crop = 0);

/// Local self-similarity of a point: max over region tiles of exp(-SSD)
/// between the centered patch and each non-overlapping region tile.
struct LssParams {
  std::size_t patch = 5;
  std::size_t region = 40;
  // Divides L before comparison so SSD is measured on a [0,1] scale.
  double l_range = 100.0;
  // Tiles touching the central patch are left out of the max.
  bool exclude_self = true;

  void validate() const;
  std::size_t tiles_per_side() const { return region / patch; }
  // Offset of the region's top-left corner from the query point; places the
  // central patch on a tile of the grid.
  std::size_t region_offset() const;
};

/// `l` is an L channel in [0, l_range]. The region around (y, x) must lie inside `l`.
double lss_at(const Plane& l, std::size_t y, std::size_t x, const LssParams& params = {});

/// Mean of lss_at over non-overlapping region-sized blocks (remainder dropped),
/// each evaluated at the query point whose region coincides with the block.
double lss_image(const Image& img, const LssParams& params = {});
std::size_t lss_block_count(std::size_t height, std::size_t width, const LssParams& params = {});

double plcc(std::span<const double> x, std::span<const double> y);
/// Pearson correlation of average ranks.
double srcc(std::span<const double> x, std::span<const double> y);
std::vector<double> average_ranks(std::span<const double> x);

struct EvalRow {
  std::string name;
  std::optional<double> psnr;
  double ssim = 0.0;
  double lss = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  // Identical images are excluded from the PSNR mean.
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  double mean_lss = 0.0;
  std::optional<double> plcc_psnr_lss;
  std::optional<double> srcc_psnr_lss;
};

EvalReport summarize(std::vector<EvalRow> rows);
/// CSV with header `name,psnr,ssim,lss`; identical images print `identical`.
std::string eval_csv(const EvalReport& report);

}  // namespace hsr
