#include <cmath>
#include <random>

#include "doctest.h"

#include "hsr/error.hpp"
#include "hsr/metrics.hpp"
#include "oracles.hpp"

using namespace hsr;
using hsr::test::brute_lss;
using hsr::test::naive_ssim;
using hsr::test::random_plane;

namespace {

Image uniform(std::size_t h, std::size_t w, double v) { return Image(h, w, std::vector<double>(h * w * 3, v)); }

}  // namespace

TEST_CASE("PSNR of a uniform 16/255 difference") {
  const Image a = uniform(8, 8, 0.5);
  const Image b = uniform(8, 8, 0.5 + 16.0 / 255.0);
  const auto v = psnr(a, b, 0, false);
  REQUIRE(v.has_value());
  CHECK(std::abs(*v - 24.0482) < 1e-3);
  CHECK(std::abs(*v - 20.0 * std::log10(255.0 / 16.0)) < 1e-9);
}

TEST_CASE("PSNR identical sentinel, symmetry and crop") {
  const Image a = hsr::test::random_image(12, 12, 1);
  CHECK_FALSE(psnr(a, a, 0, true).has_value());
  const Image b = hsr::test::random_image(12, 12, 2);
  CHECK(*psnr(a, b, 2, true) == *psnr(b, a, 2, true));
  Image c = a;
  for (std::size_t x = 0; x < 12; ++x) c.set(0, x, 1, 1.0 - a.at(0, x, 1));
  CHECK(psnr(a, c, 0, false).has_value());
  CHECK_FALSE(psnr(a, c, 4, false).has_value());
  CHECK_FALSE(psnr(a, c, 1, true).has_value());
  CHECK_THROWS_AS(psnr(a, Image(12, 11), 0, true), ShapeError);
  CHECK_THROWS_AS(psnr(a, b, 6, true), ShapeError);
}

TEST_CASE("SSIM of an image with itself is one") {
  const Image a = hsr::test::random_image(20, 17, 3);
  CHECK(ssim(a, a, true) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ssim(a, a, false) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("SSIM of offset constants equals the luminance term") {
  const Plane a(16, 16, 0.4);
  const Plane b(16, 16, 0.5);
  const double c1 = 1e-4;
  const double expected = (2 * 0.4 * 0.5 + c1) / (0.4 * 0.4 + 0.5 * 0.5 + c1);
  CHECK(std::abs(ssim(a, b) - expected) < 1e-10);
}

TEST_CASE("SSIM matches a per-window oracle") {
  std::mt19937_64 rng(4);
  const Plane a = random_plane(16, 16, rng);
  const Plane b = random_plane(16, 16, rng);
  CHECK(std::abs(ssim(a, b) - naive_ssim(a, b)) <= 1e-10);
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-14));
  CHECK_THROWS_AS(ssim(Plane(10, 16), Plane(10, 16)), ShapeError);
}

TEST_CASE("LSS of a constant image is exactly one") {
  const Plane l(40, 40, 63.0);
  CHECK(lss_at(l, 17, 17) == 1.0);
  CHECK(lss_image(uniform(80, 80, 0.3)) == 1.0);
}

TEST_CASE("LSS of a periodic tiling is exactly one") {
  std::mt19937_64 rng(5);
  const Plane tile = random_plane(5, 5, rng, 0, 100);
  Plane l(40, 40);
  for (std::size_t y = 0; y < 40; ++y)
    for (std::size_t x = 0; x < 40; ++x) l(y, x) = tile(y % 5, x % 5);
  CHECK(lss_at(l, 17, 17) == 1.0);
}

TEST_CASE("LSS matches the brute-force tile oracle") {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 10; ++t) {
    const Plane l = random_plane(40, 40, rng, 0, 100);
    CHECK(lss_at(l, 17, 17) == brute_lss(l, 0, 0, 17, 17));
    const double v = lss_at(l, 17, 17);
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
  }
  const Plane big = random_plane(60, 50, rng, 0, 100);
  CHECK(lss_at(big, 30, 21) == brute_lss(big, 13, 4, 30, 21));
}

TEST_CASE("LSS keeps the self tile out and is translation-consistent") {
  std::mt19937_64 rng(7);
  const Plane l = random_plane(40, 40, rng, 0, 100);
  LssParams with_self;
  with_self.exclude_self = false;
  CHECK(lss_at(l, 17, 17, with_self) == 1.0);
  CHECK(lss_at(l, 17, 17) < 1.0);

  Plane shifted(47, 43);
  for (std::size_t y = 0; y < 40; ++y)
    for (std::size_t x = 0; x < 40; ++x) shifted(y + 7, x + 3) = l(y, x);
  CHECK(lss_at(shifted, 24, 20) == lss_at(l, 17, 17));
  CHECK_THROWS_AS(lss_at(l, 16, 17), ShapeError);
  CHECK_THROWS_AS(lss_at(l, 18, 17), ShapeError);
}

TEST_CASE("image LSS tiling and ordering") {
  CHECK(lss_block_count(85, 85) == 4);
  const Image noise = hsr::test::random_image(85, 85, 8);
  const Plane l = rgb_to_lab(noise).l;
  double mean = 0.0;
  for (std::size_t by : {0u, 40u})
    for (std::size_t bx : {0u, 40u}) mean += lss_at(l, by + 17, bx + 17);
  CHECK(lss_image(noise) == doctest::Approx(mean / 4.0).epsilon(1e-15));

  Image periodic(80, 80);
  const Image tile = hsr::test::random_image(5, 5, 9);
  for (std::size_t y = 0; y < 80; ++y)
    for (std::size_t x = 0; x < 80; ++x)
      for (std::size_t c = 0; c < 3; ++c) periodic.set(y, x, c, tile.at(y % 5, x % 5, c));
  CHECK(lss_image(crop(noise, 0, 0, 80, 80)) < lss_image(periodic));
  CHECK_THROWS_AS(lss_image(Image(39, 80)), ShapeError);
}

TEST_CASE("PLCC and SRCC") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  std::vector<double> twice, cubed;
  for (double v : x) {
    twice.push_back(2 * v);
    cubed.push_back(v * v * v);
  }
  CHECK(plcc(x, twice) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(srcc(x, cubed) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(plcc(x, cubed) < 1.0);

  // Deviations (-2,-1,0,1,2) and (-1,-2,1,0,2): sxy = 8, sxx = syy = 10.
  const std::vector<double> y{2, 1, 4, 3, 5};
  CHECK(std::abs(plcc(x, y) - 0.8) < 1e-12);

  // Ranks (1, 2.5, 2.5, 4, 5) against (1..5): sxy = 9.5, sxx = 9.5, syy = 10.
  const std::vector<double> tied{1, 2, 2, 3, 4};
  const std::vector<double> r{10, 20, 30, 40, 50};
  CHECK(average_ranks(tied) == std::vector<double>{1, 2.5, 2.5, 4, 5});
  CHECK(std::abs(srcc(tied, r) - 9.5 / std::sqrt(95.0)) < 1e-12);

  std::vector<double> expd;
  for (double v : y) expd.push_back(std::exp(v));
  CHECK(srcc(x, expd) == doctest::Approx(srcc(x, y)).epsilon(1e-15));

  CHECK_THROWS_AS(plcc(x, std::vector<double>(5, 1.0)), ShapeError);
  CHECK_THROWS_AS(plcc(std::vector<double>{1, 2}, std::vector<double>{2, 1}), ShapeError);
}

TEST_CASE("evaluation report and CSV") {
  std::vector<EvalRow> rows{{"a.png", 30.0, 0.9, 0.5}, {"b.png", std::nullopt, 1.0, 0.7},
                            {"c.png", 20.0, 0.8, 0.6}, {"d.png", 25.0, 0.85, 0.55}};
  const EvalReport rep = summarize(rows);
  CHECK(rep.mean_psnr == doctest::Approx(25.0));
  CHECK(rep.mean_ssim == doctest::Approx(0.8875));
  const std::string csv = eval_csv(rep);
  CHECK(csv.rfind("name,psnr,ssim,lss\n", 0) == 0);
  CHECK(csv.find("b.png,identical,") != std::string::npos);
  REQUIRE(rep.plcc_psnr_lss.has_value());
  CHECK(*rep.srcc_psnr_lss == doctest::Approx(-1.0));
}
