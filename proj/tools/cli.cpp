#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "hsr/atomic_file.hpp"
#include "hsr/checkpoint.hpp"
#include "hsr/error.hpp"
#include "hsr/features.hpp"
#include "hsr/gradcheck.hpp"
#include "hsr/hqs.hpp"
#include "hsr/image.hpp"
#include "hsr/metrics.hpp"
#include "hsr/model.hpp"
#include "hsr/train.hpp"

namespace hsr::cli {
namespace {

namespace fs = std::filesystem;

// HSR_SEED, when set, replaces any configured seed.
std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("HSR_SEED");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  const unsigned long long seed = std::strtoull(v, &end, 10);
  if (*end != '\0') throw std::invalid_argument(std::string("HSR_SEED is not an integer: ") + v);
  return seed;
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string fmt_db(const std::optional<double>& v) { return v ? fmt(*v) + " dB" : "identical"; }

struct TrainArgs {
  std::string config;
};

struct InferArgs {
  std::string ckpt, in, out;
};

struct DegradeArgs {
  std::string in, out;
  std::size_t scale = 4;
};

struct EvalArgs {
  std::string ckpt, hr_dir, csv;
  std::size_t scale = 4;
  bool y_only = false;
  bool rgb = false;
  int crop = -1;  // -1 means crop `scale` pixels
};

struct LssArgs {
  std::string in;
};

struct ParamsArgs {
  std::string config;
};

struct GradArgs {
  std::size_t cases = 20;
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
};

struct HqsArgs {
  std::string in, history, out;
  std::size_t scale = 2;
  std::size_t iters = 8;
  std::size_t kernel = 7;
  double sigma = 1.6;
  double lambda = HqsConfig{}.lambda;
};

struct FeatureArgs {
  std::string ckpt, in, out_dir;
  std::string stage = "all";
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  TrainConfig cfg = load_train_config(a.config);
  if (auto s = env_seed()) cfg.seed = *s;
  Trainer trainer(cfg, build_pairs(cfg.data_dir, cfg.model.scale));
  const std::size_t total = trainer.planned_steps();
  trainer.run(total);
  const auto& h = trainer.history();
  if (!h.empty()) {
    out << "steps " << trainer.steps_done() << ", first loss " << fmt(h.front().loss, 6)
        << ", last loss " << fmt(h.back().loss, 6) << "\n";
  }
  if (!cfg.checkpoint_path.empty()) out << "checkpoint " << cfg.checkpoint_path << "\n";
  return kOk;
}

int cmd_infer(const InferArgs& a, std::ostream& out) {
  const LoadedCheckpoint ckpt = load_checkpoint(a.ckpt);
  const Image lr = load_image(a.in);
  const Image sr = super_resolve(lr, ckpt.weights);
  save_image(sr, a.out);
  out << a.in << " " << lr.width() << "x" << lr.height() << " -> " << a.out << " " << sr.width()
      << "x" << sr.height() << "\n";
  return kOk;
}

int cmd_degrade(const DegradeArgs& a, std::ostream& out) {
  const TrainPair pair = make_pair(fs::path(a.in).filename().string(), load_image(a.in), a.scale);
  save_image(pair.lr, a.out);
  out << a.in << " " << pair.hr.width() << "x" << pair.hr.height() << " -> " << a.out << " "
      << pair.lr.width() << "x" << pair.lr.height() << "\n";
  return kOk;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (a.y_only && a.rgb) throw std::invalid_argument("--y-only and --rgb are exclusive");
  const LoadedCheckpoint ckpt = load_checkpoint(a.ckpt);
  if (ckpt.weights.config.scale != a.scale) {
    throw std::invalid_argument("checkpoint scale " + std::to_string(ckpt.weights.config.scale) +
                                " does not match --scale " + std::to_string(a.scale));
  }
  const bool y_only = !a.rgb;
  const std::size_t crop_px = a.crop < 0 ? a.scale : static_cast<std::size_t>(a.crop);
  std::vector<EvalRow> rows;
  for (const TrainPair& pair : build_pairs(a.hr_dir, a.scale)) {
    const Image sr = super_resolve(pair.lr, ckpt.weights);
    EvalRow row;
    row.name = pair.name;
    row.psnr = psnr(sr, pair.hr, crop_px, y_only);
    row.ssim = ssim(sr, pair.hr, y_only, crop_px);
    row.lss = lss_image(sr);
    rows.push_back(std::move(row));
  }
  const EvalReport report = summarize(std::move(rows));
  for (const auto& r : report.rows) {
    out << r.name << ": psnr " << fmt_db(r.psnr) << ", ssim " << fmt(r.ssim) << ", lss "
        << fmt(r.lss) << "\n";
  }
  out << "mean: psnr " << fmt(report.mean_psnr) << " dB, ssim " << fmt(report.mean_ssim)
      << ", lss " << fmt(report.mean_lss) << " (" << (y_only ? "luma" : "rgb") << ", crop "
      << crop_px << ")\n";
  if (report.plcc_psnr_lss) {
    out << "psnr/lss: plcc " << fmt(*report.plcc_psnr_lss) << ", srcc "
        << fmt(*report.srcc_psnr_lss) << "\n";
  }
  if (!a.csv.empty()) write_file_atomic(a.csv, eval_csv(report));
  return kOk;
}

int cmd_lss(const LssArgs& a, std::ostream& out) {
  const Image img = load_image(a.in);
  const double v = lss_image(img);
  out << "lss " << std::setprecision(10) << v << " over "
      << lss_block_count(img.height(), img.width()) << " blocks\n";
  return kOk;
}

int cmd_params(const ParamsArgs& a, std::ostream& out) {
  const nlohmann::json j = [&] {
    try {
      return nlohmann::json::parse(read_file(a.config));
    } catch (const nlohmann::json::exception& e) {
      throw IoError("cannot parse config '" + a.config + "': " + e.what());
    }
  }();
  // A training config nests the architecture under "model".
  const HsrConfig cfg = j.contains("model") ? j.get<TrainConfig>().model : j.get<HsrConfig>();
  cfg.validate();
  const ParamCount count = param_count(cfg);
  out << "total " << count.total << " (" << fmt(count.total / 1e6, 3) << "M)\n";
  for (const auto& [name, n] : count.breakdown) out << "  " << name << " " << n << "\n";
  return kOk;
}

int cmd_gradcheck(const GradArgs& a, std::ostream& out) {
  const std::uint64_t seed = env_seed().value_or(a.seed);
  bool all = true;
  for (const auto& r : run_gradient_suite(seed, a.cases, a.tolerance)) {
    out << (r.passed ? "PASS " : "FAIL ") << std::left << std::setw(18) << r.op << " cases "
        << r.cases << " worst " << std::scientific << std::setprecision(3) << r.worst_error
        << std::defaultfloat << "\n";
    all = all && r.passed;
  }
  return all ? kOk : kNumericFailure;
}

// Treats the input as ground truth: its luma is blurred and decimated, then
// recovered by HQS and compared against the bicubic upscale.
int cmd_hqs_demo(const HqsArgs& a, std::ostream& out) {
  const Image img = load_image(a.in);
  const std::size_t h = img.height() / a.scale * a.scale;
  const std::size_t w = img.width() / a.scale * a.scale;
  if (h == 0 || w == 0) throw std::invalid_argument("image is smaller than the scale factor");
  const Plane truth = rgb_to_y(crop(img, 0, 0, h, w));
  const DegradationOperator op = DegradationOperator::gaussian(a.kernel, a.sigma, a.scale);
  const Plane y = op.apply(truth);

  HqsConfig cfg;
  cfg.iterations = a.iters;
  cfg.lambda = a.lambda;
  cfg.validate();
  const Plane bicubic = resize_bicubic(y, h, w, true, false);
  const HqsResult res = hqs_run(y, op, cfg, bicubic);

  out << "bicubic psnr " << fmt_db(psnr(bicubic, truth)) << "\n";
  out << "hqs     psnr " << fmt_db(psnr(res.x, truth)) << " after " << a.iters << " rounds\n";
  if (!a.history.empty()) {
    std::ostringstream csv;
    csv.precision(17);
    csv << "step,beta,objective\n";
    for (const auto& e : res.history) csv << e.step << "," << e.beta << "," << e.objective << "\n";
    write_file_atomic(a.history, csv.str());
  }
  if (!a.out.empty()) {
    Plane clamped = res.x;
    for (auto& v : clamped.values) v = std::clamp(v, 0.0, 1.0);
    save_gray(clamped, a.out);
  }
  return kOk;
}

int cmd_features(const FeatureArgs& a, std::ostream& out) {
  const LoadedCheckpoint ckpt = load_checkpoint(a.ckpt);
  const std::vector<std::string> stages =
      a.stage == "all" ? feature_stage_tags() : std::vector<std::string>{a.stage};
  ForwardTrace trace;
  super_resolve(load_image(a.in), ckpt.weights, &trace);
  fs::create_directories(a.out_dir);
  std::size_t written = 0;
  for (const auto& stage : stages) {
    for (const FeatureMap& m : dump_features(trace, stage)) {
      Plane p(m.height, m.width);
      p.values = m.values;
      save_gray(p, fs::path(a.out_dir) / (m.name + ".pgm"));
      ++written;
    }
  }
  out << written << " feature maps written to " << a.out_dir << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"HSRNet super-resolution toolkit", "hsr"};
  app.require_subcommand(1);

  TrainArgs train_a;
  auto* train = app.add_subcommand("train", "Train a network from a JSON config");
  train->add_option("--config", train_a.config, "Training config (JSON)")->required();

  InferArgs infer_a;
  auto* infer = app.add_subcommand("infer", "Super-resolve one image");
  infer->add_option("--ckpt", infer_a.ckpt, "Checkpoint file")->required();
  infer->add_option("--in", infer_a.in, "Low-resolution input (.png/.ppm)")->required();
  infer->add_option("--out", infer_a.out, "Output image (.png/.ppm)")->required();

  DegradeArgs deg_a;
  auto* degrade = app.add_subcommand("degrade", "Bicubic downscale (BI degradation)");
  degrade->add_option("--in", deg_a.in, "High-resolution input")->required();
  degrade->add_option("--out", deg_a.out, "Low-resolution output")->required();
  degrade->add_option("--scale", deg_a.scale, "Downscaling factor")
      ->capture_default_str()
      ->check(CLI::Range(1, 16));

  EvalArgs eval_a;
  auto* eval = app.add_subcommand("eval", "PSNR/SSIM/LSS of a checkpoint over an HR directory");
  eval->add_option("--ckpt", eval_a.ckpt, "Checkpoint file")->required();
  eval->add_option("--hr-dir", eval_a.hr_dir, "Directory of HR images")->required();
  eval->add_option("--scale", eval_a.scale, "Scale factor")->capture_default_str()->check(CLI::Range(2, 4));
  eval->add_flag("--y-only", eval_a.y_only, "Measure on studio-swing luma (default)");
  eval->add_flag("--rgb", eval_a.rgb, "Measure on RGB instead of luma");
  eval->add_option("--crop", eval_a.crop, "Border pixels to ignore (default: scale)");
  eval->add_option("--csv", eval_a.csv, "Per-image CSV output");

  LssArgs lss_a;
  auto* lss = app.add_subcommand("lss", "Image-level local self-similarity");
  lss->add_option("--in", lss_a.in, "Input image")->required();

  ParamsArgs params_a;
  auto* params = app.add_subcommand("params", "Parameter count of a model or training config");
  params->add_option("--config", params_a.config, "Config (JSON)")->required();

  GradArgs grad_a;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference checks of every op");
  grad->add_option("--cases", grad_a.cases, "Random cases per op")->capture_default_str();
  grad->add_option("--seed", grad_a.seed, "Seed (HSR_SEED overrides)")->capture_default_str();
  grad->add_option("--tolerance", grad_a.tolerance, "Relative error bound")->capture_default_str();

  HqsArgs hqs_a;
  auto* hqs = app.add_subcommand("hqs-demo", "Classical HQS recovery of a degraded image");
  hqs->add_option("--in", hqs_a.in, "Ground-truth image")->required();
  hqs->add_option("--scale", hqs_a.scale, "Decimation factor")->capture_default_str()->check(CLI::Range(1, 8));
  hqs->add_option("--iters", hqs_a.iters, "HQS rounds")->capture_default_str();
  hqs->add_option("--kernel", hqs_a.kernel, "Gaussian blur size (odd)")->capture_default_str();
  hqs->add_option("--sigma", hqs_a.sigma, "Gaussian blur sigma")->capture_default_str();
  hqs->add_option("--lambda", hqs_a.lambda, "Smoothness prior weight")->capture_default_str();
  hqs->add_option("--history", hqs_a.history, "CSV of step,beta,objective");
  hqs->add_option("--out", hqs_a.out, "Recovered luma (.pgm/.png)");

  FeatureArgs feat_a;
  auto* features = app.add_subcommand("features", "Dump channel-max feature maps");
  features->add_option("--ckpt", feat_a.ckpt, "Checkpoint file")->required();
  features->add_option("--in", feat_a.in, "Low-resolution input")->required();
  features->add_option("--out-dir", feat_a.out_dir, "Directory for .pgm maps")->required();
  features->add_option("--stage", feat_a.stage, "Stage tag or 'all'")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return cmd_train(train_a, out);
    if (*infer) return cmd_infer(infer_a, out);
    if (*degrade) return cmd_degrade(deg_a, out);
    if (*eval) return cmd_eval(eval_a, out);
    if (*lss) return cmd_lss(lss_a, out);
    if (*params) return cmd_params(params_a, out);
    if (*grad) return cmd_gradcheck(grad_a, out);
    if (*hqs) return cmd_hqs_demo(hqs_a, out);
    if (*features) return cmd_features(feat_a, out);
  } catch (const NumericError& e) {
    err << "hsr: numeric failure: " << e.what() << "\n";
    return kNumericFailure;
  } catch (const std::exception& e) {
    err << "hsr: " << e.what() << "\n";
    return kDataError;
  }
  err << app.help();
  return kUsage;
}

}  // namespace hsr::cli
