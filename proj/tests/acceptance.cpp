// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "hsr/atomic_file.hpp"
#include "hsr/checkpoint.hpp"
#include "hsr/gradcheck.hpp"
#include "hsr/hqs.hpp"
#include "hsr/metrics.hpp"
#include "hsr/model.hpp"
#include "hsr/train.hpp"
#include "oracles.hpp"

using namespace hsr;
using namespace hsr::test;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string source_path(const std::string& rel) { return std::string(HSR_SOURCE_DIR) + "/" + rel; }

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

std::size_t conv_params(std::size_t in, std::size_t out, std::size_t k) { return out * in * k * k + out; }

void zero_conv(NetworkWeights& w, const std::string& name) {
  for (auto* suffix : {".weight", ".bias"}) {
    for (auto& v : w.params.get(name + suffix).mutable_data()) v = 0.0;
  }
}

HsrConfig small_model(std::size_t scale) {
  HsrConfig cfg;
  cfg.channels = 16;
  cfg.n_blocks = 2;
  cfg.iterations = 2;
  cfg.scale = scale;
  return cfg;
}

void gradient_suite(Outcome& o) {
  std::size_t ops = 0;
  double worst = 0.0;
  for (const auto& r : run_gradient_suite(0, 20, 1e-4)) {
    ++ops;
    worst = std::max(worst, r.worst_error);
    o.require(r.passed, r.op + " error " + std::to_string(r.worst_error));
    o.require(r.cases >= 20, r.op + " ran fewer than 20 cases");
  }
  o.detail << ops << " ops x 20 cases, worst rel. err " << worst;
}

void architecture(Outcome& o) {
  std::size_t shapes = 0;
  for (std::size_t s : {2u, 3u, 4u}) {
    NetworkWeights w = NetworkWeights::build(small_model(s));
    w.initialize(1);
    for (std::size_t h : {8u, 12u, 48u})
      for (std::size_t wd : {8u, 12u, 48u}) {
        const Tensor out = hsrnet_forward(Tensor::filled({1, 3, h, wd}, 0.5), w);
        o.require(out.shape() == Shape{1, 3, s * h, s * wd}, "shape " + out.shape().str());
        ++shapes;
      }
  }

  NetworkWeights w = NetworkWeights::build(HsrConfig{});
  w.initialize(2);
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor({1, 64, 16, 16}, rng, -1, 1, false);

  // Tensors are shared handles, so the zeroed copy is built separately.
  NetworkWeights heb = NetworkWeights::build(HsrConfig{});
  heb.initialize(2);
  zero_conv(heb, "denoiser.block0.heb.fuse");
  const Tensor y = heb_forward(x, heb, "denoiser.block0.heb");
  o.require(max_abs_diff(y, x) <= 1e-12, "HEB zeroed-fuse identity");

  for (std::size_t i = 1; i <= 4; ++i) {
    const std::string prefix = "denoiser.block0.heb.branch" + std::to_string(i) + ".";
    std::size_t convs = 0;
    for (const auto& p : w.params.items()) {
      if (p.name.rfind(prefix, 0) == 0 && p.name.ends_with(".weight")) ++convs;
    }
    o.require(convs == i - 1, "branch " + std::to_string(i) + " has " + std::to_string(convs) + " convs");
  }

  zero_conv(heb, "denoiser.block0.msa.fuse");
  const Tensor m = msa_forward(x, heb, "denoiser.block0.msa");
  double msa_err = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) msa_err = std::max(msa_err, std::abs(m.data()[i] - 0.5 * x.data()[i]));
  o.require(msa_err <= 1e-12, "MSA zeroed-fuse halving");
  o.detail << shapes << " shape cases, HEB identity, branch convs 0/1/2/3, MSA 0.5x";
}

std::size_t cli_param_total(const std::string& config) {
  std::ostringstream out, err;
  if (cli::run({"params", "--config", config}, out, err) != cli::kOk) {
    throw std::runtime_error("params failed: " + err.str());
  }
  std::istringstream is(out.str());
  std::string word;
  std::size_t total = 0;
  is >> word >> total;
  return total;
}

void parameter_count(Outcome& o) {
  const std::size_t x4 = cli_param_total(source_path("configs/hsrnet_x4.json"));
  const std::size_t x2 = cli_param_total(source_path("configs/hsrnet_x2.json"));
  const double r4 = static_cast<double>(x4) / 1.285e6 - 1.0;
  const double r2 = static_cast<double>(x2) / 1.26e6 - 1.0;
  o.require(std::abs(r4) <= 0.2, "x4 count outside 20%");
  o.require(std::abs(r2) <= 0.2, "x2 count outside 20%");
  const std::size_t delta = conv_params(64, 3 * 16, 3) - conv_params(64, 3 * 4, 3);
  o.require(x4 - x2 == delta, "x4 - x2 differs from the upscale conv delta");
  o.detail << "x4 " << x4 << " (" << std::showpos << 100 * r4 << "%), x2 " << x2 << " (" << 100 * r2
           << std::noshowpos << "%), delta " << x4 - x2 << " == " << delta;
}

void ablation(Outcome& o) {
  std::size_t prev = 0;
  o.detail << "N:";
  for (std::size_t n : {3u, 5u, 7u, 10u}) {
    HsrConfig cfg;
    cfg.n_blocks = n;
    const std::size_t total = param_count(cfg).total;
    o.require(total > prev, "count not increasing at N=" + std::to_string(n));
    o.detail << " " << total;
    prev = total;
  }
  std::set<std::size_t> per_k;
  for (std::size_t k : {1u, 2u, 3u}) {
    HsrConfig cfg;
    cfg.iterations = k;
    per_k.insert(param_count(cfg).total);
  }
  o.require(per_k.size() == 1, "count varies with K");
  HsrConfig no_msa;
  no_msa.msa_enabled = false;
  const NetworkWeights w = NetworkWeights::build(no_msa);
  std::size_t msa_params = 0;
  for (const auto& p : w.params.items()) {
    if (p.name.find(".msa.") != std::string::npos) ++msa_params;
  }
  o.require(msa_params == 0, "MSA parameters remain with msa disabled");
  o.require(param_count(no_msa).total < param_count(HsrConfig{}).total, "disabling MSA removes nothing");
  o.detail << "; K=1..3 constant " << *per_k.begin() << "; no-MSA " << param_count(no_msa).total;
}

void hqs_oracle(Outcome& o) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> scale_d(1, 4), size_d(1, 3), lr_d(3, 9);
  double adj = 0.0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t s = scale_d(rng);
    const DegradationOperator op(random_kernel(2 * size_d(rng) + 1, rng), s);
    const std::size_t lh = lr_d(rng), lw = lr_d(rng);
    const Plane x = random_plane(lh * s, lw * s, rng, -1, 1);
    const Plane y = random_plane(lh, lw, rng, -1, 1);
    const double lhs = dot(op.apply(x), y);
    adj = std::max(adj, std::abs(lhs - dot(x, op.adjoint(y))) / std::max(1.0, std::abs(lhs)));
  }
  o.require(adj < 1e-10, "adjoint identity");

  const Plane k = random_kernel(5, rng);
  const DegradationOperator op8(k, 2);
  const Eigen::MatrixXd h = dense_degradation(k, 2, 8, 8);
  const Eigen::MatrixXd d = dense_gradient(8, 8);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(64, 64);
  const Plane y8 = random_plane(4, 4, rng);
  const Plane u8 = random_plane(8, 8, rng);
  double dense = 0.0;
  for (double beta : {0.01, 0.5, 20.0}) {
    const Eigen::VectorXd ls_ref =
        (h.transpose() * h + beta * eye).ldlt().solve(h.transpose() * vec(y8) + beta * vec(u8));
    dense = std::max(dense, (vec(ls_solve(y8, u8, beta, op8, HqsConfig{})) - ls_ref).cwiseAbs().maxCoeff());
    const Eigen::VectorXd prox_ref = (beta * eye + 0.7 * d.transpose() * d).ldlt().solve(beta * vec(u8));
    dense = std::max(dense, (vec(denoise_prox(u8, beta, 0.7, HqsConfig{})) - prox_ref).cwiseAbs().maxCoeff());
  }
  o.require(dense < 1e-6, "dense solve mismatch");

  const auto op = DegradationOperator::gaussian(7, 1.6, 2);
  bool monotone = true;
  auto check_monotone = [&](const HqsResult& r) {
    double prev = r.history.front().objective;
    for (const auto& e : r.history) {
      if (e.kind != "ls") continue;
      monotone = monotone && e.objective <= prev * (1.0 + 1e-12);
      prev = e.objective;
    }
  };
  check_monotone(hqs_run(op.apply(random_plane(32, 32, rng)), op, HqsConfig{}));

  const Plane truth = rgb_to_y(edge_image(32));
  const Plane y = op.apply(truth);
  const HqsResult r = hqs_run(y, op, HqsConfig{});
  check_monotone(r);
  o.require(monotone, "objective increased across an LS half-step");
  const double gain = *psnr(r.x, truth) - *psnr(resize_bicubic(y, 32, 32, true, false), truth);
  o.require(gain >= 1.0, "recovery gain below 1 dB");
  o.detail << "adjoint " << adj << ", dense " << dense << ", LS objective monotone, gain " << gain << " dB";
}

void toy_training(Outcome& o) {
  TrainConfig cfg = load_train_config(source_path("configs/tiny.json"));
  cfg.checkpoint_path.clear();
  cfg.loss_log.clear();
  const TrainPair pair = make_pair("toy", edge_image(64), cfg.model.scale);
  Trainer trainer(cfg, {pair});
  trainer.run(trainer.planned_steps());
  const auto& h = trainer.history();
  const double ratio = h.back().loss / h.front().loss;
  o.require(h.size() == 500, "expected 500 steps");
  o.require(ratio <= 0.1, "loss reduced by less than 90%");
  const Image sr = super_resolve(pair.lr, trainer.weights());
  const Image bic = resize_bicubic(pair.lr, pair.hr.height(), pair.hr.width(), true);
  const double sr_db = *psnr(sr, pair.hr, 0, false);
  const double bic_db = *psnr(bic, pair.hr, 0, false);
  o.require(sr_db - bic_db >= 3.0, "SR gain over bicubic below 3 dB");
  o.detail << h.size() << " steps, loss " << h.front().loss << " -> " << h.back().loss << " (-"
           << 100 * (1 - ratio) << "%), SR " << sr_db << " dB vs bicubic " << bic_db << " dB";
}

void metrics_oracles(Outcome& o) {
  const Image a(8, 8, std::vector<double>(192, 0.5));
  const Image b(8, 8, std::vector<double>(192, 0.5 + 16.0 / 255.0));
  const double p = *psnr(a, b, 0, false);
  o.require(std::abs(p - 24.0482) <= 1e-3, "uniform-difference PSNR");

  const Image img = random_image(24, 24, 1);
  o.require(std::abs(ssim(img, img, true) - 1.0) <= 1e-12, "SSIM(a,a)");
  std::mt19937_64 rng(4);
  const Plane s1 = random_plane(16, 16, rng), s2 = random_plane(16, 16, rng);
  const double ssim_err = std::abs(ssim(s1, s2) - naive_ssim(s1, s2));
  o.require(ssim_err <= 1e-10, "SSIM vs windowed oracle");

  o.require(lss_at(Plane(40, 40, 42.0), 17, 17) == 1.0, "LSS of a constant");
  o.require(lss_image(Image(80, 80, std::vector<double>(80 * 80 * 3, 0.3))) == 1.0, "image LSS of a constant");
  for (int t = 0; t < 10; ++t) {
    const Plane l = random_plane(40, 40, rng, 0, 100);
    o.require(lss_at(l, 17, 17) == brute_lss(l, 0, 0, 17, 17), "LSS vs tile oracle");
  }

  const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 1, 4, 3, 5};
  o.require(std::abs(plcc(x, y) - 0.8) <= 1e-12, "plcc fixture");
  const std::vector<double> tied{1, 2, 2, 3, 4}, ranked{10, 20, 30, 40, 50};
  o.require(std::abs(srcc(tied, ranked) - 9.5 / std::sqrt(95.0)) <= 1e-12, "srcc fixture");
  o.detail << "PSNR " << p << " dB, SSIM oracle err " << ssim_err << ", LSS exact, plcc/srcc fixtures";
}

void determinism(Outcome& o) {
  TempDir dir("acceptance");
  auto run_once = [&](const std::string& tag) {
    TrainConfig cfg = load_train_config(source_path("configs/tiny.json"));
    cfg.patch_size = 16;
    cfg.batch_size = 2;
    cfg.checkpoint_path = (dir / (tag + ".ckpt")).string();
    cfg.loss_log = (dir / (tag + ".csv")).string();
    Trainer t(cfg, {make_pair("a", edge_image(64), 2), make_pair("b", random_image(48, 40, 5), 2)});
    t.run(5);
    return t;
  };
  const Trainer first = run_once("a");
  run_once("b");
  o.require(read_file(dir / "a.ckpt") == read_file(dir / "b.ckpt"), "checkpoints differ");
  o.require(read_file(dir / "a.csv") == read_file(dir / "b.csv"), "loss logs differ");

  const LoadedCheckpoint back = load_checkpoint(dir / "a.ckpt");
  const Tensor input = image_to_tensor(random_image(16, 16, 9));
  const Tensor ref = hsrnet_forward(input, first.weights());
  const Tensor got = hsrnet_forward(input, back.weights);
  double scale = 0.0;
  for (double v : ref.data()) scale = std::max(scale, std::abs(v));
  const double rel = max_abs_diff(ref, got) / scale;
  o.require(rel <= 1e-5, "round-trip forward drift");
  o.detail << "checkpoint and loss CSV byte-identical, round-trip forward drift " << rel;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"gradient suite", gradient_suite},   {"architecture contracts", architecture},
      {"parameter count", parameter_count}, {"ablation structure", ablation},
      {"HQS oracle", hqs_oracle},           {"toy training", toy_training},
      {"metrics oracles", metrics_oracles}, {"determinism", determinism}};
  // Wall-clock budgets in seconds; 0 means unbounded.
  const double budget[] = {60, 0, 0, 0, 30, 600, 0, 0};

  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget[i] > 0 && secs > budget[i]) o.require(false, "exceeded " + std::to_string(budget[i]) + " s");
    std::printf("%s %zu %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.str().c_str(), secs);
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
