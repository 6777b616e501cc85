#include "hsr/model.hpp"

#include <cmath>
#include <random>

#include "hsr/error.hpp"
#include "hsr/ops.hpp"

namespace hsr {
namespace {

constexpr std::size_t kImageChannels = 3;

void add_conv(ParameterSet& ps, const std::string& name, std::size_t in_c, std::size_t out_c,
              std::size_t k) {
  ps.add(name + ".weight", {out_c, in_c, k, k});
  ps.add(name + ".bias", {1, out_c, 1, 1});
}

// "Same" convolution with the registered weights of `name`.
Tensor conv(const NetworkWeights& w, const std::string& name, const Tensor& x) {
  const Tensor& weight = w.params.get(name + ".weight");
  const std::size_t k = weight.shape().h;
  return conv2d(x, weight, w.params.get(name + ".bias"), 1, (k - 1) / 2);
}

// f(.) of the exploration stages: conv followed by LeakyReLU.
Tensor explore(const NetworkWeights& w, const std::string& name, const Tensor& x) {
  return leaky_relu(conv(w, name, x), w.config.leaky_slope);
}

void register_heb(ParameterSet& ps, const HsrConfig& cfg, const std::string& prefix) {
  const std::size_t c = cfg.channels;
  const std::size_t part = c / HsrConfig::kHebBranches;
  add_conv(ps, prefix + ".explore", c, c, 3);
  for (std::size_t i = 2; i <= HsrConfig::kHebBranches; ++i) {
    for (std::size_t j = 1; j < i; ++j) {
      add_conv(ps, prefix + ".branch" + std::to_string(i) + ".conv" + std::to_string(j), part,
               part, 3);
    }
    add_conv(ps, prefix + ".merge" + std::to_string(i), 2 * part, part, cfg.heb_merge_kernel);
  }
  add_conv(ps, prefix + ".fuse", c, c, cfg.heb_fuse_kernel);
}

void register_msa(ParameterSet& ps, const HsrConfig& cfg, const std::string& prefix) {
  const std::size_t c = cfg.channels;
  const std::size_t part = c / 4;
  add_conv(ps, prefix + ".entry", c, HsrConfig::kMsaLevels * part, 1);
  for (std::size_t l = 1; l <= HsrConfig::kMsaLevels; ++l) {
    add_conv(ps, prefix + ".level" + std::to_string(l), part, part, 3);
  }
  add_conv(ps, prefix + ".fuse", HsrConfig::kMsaLevels * part, c, 1);
}

std::string block_prefix(const std::string& denoiser, std::size_t b) {
  return denoiser + ".block" + std::to_string(b);
}

}  // namespace

void HsrConfig::validate() const {
  if (channels == 0 || channels % 16 != 0) {
    throw ShapeError("channels must be a positive multiple of 16, got " + std::to_string(channels));
  }
  if (n_blocks == 0) throw ShapeError("n_blocks must be at least 1");
  if (iterations == 0) throw ShapeError("iterations must be at least 1");
  if (scale < 2 || scale > 4) throw ShapeError("scale must be 2, 3 or 4, got " + std::to_string(scale));
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ShapeError("leaky_slope must be in (0,1)");
  for (std::size_t k : {heb_merge_kernel, heb_fuse_kernel}) {
    if (k % 2 == 0) throw ShapeError("HEB kernel sizes must be odd");
  }
}

void to_json(nlohmann::json& j, const HsrConfig& cfg) {
  j = nlohmann::json{{"channels", cfg.channels},
                     {"n_blocks", cfg.n_blocks},
                     {"iterations", cfg.iterations},
                     {"scale", cfg.scale},
                     {"leaky_slope", cfg.leaky_slope},
                     {"msa_enabled", cfg.msa_enabled},
                     {"msa_mode", cfg.msa_mode == MsaMode::kGate ? "gate" : "additive"},
                     {"share_iter_weights", cfg.share_iter_weights},
                     {"heb_merge_kernel", cfg.heb_merge_kernel},
                     {"heb_fuse_kernel", cfg.heb_fuse_kernel}};
}

void from_json(const nlohmann::json& j, HsrConfig& cfg) {
  static const char* known[] = {"channels",     "n_blocks",           "iterations",
                                "scale",        "leaky_slope",        "msa_enabled",
                                "msa_mode",     "share_iter_weights", "heb_merge_kernel",
                                "heb_fuse_kernel"};
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) throw ShapeError("unknown model config key '" + item.key() + "'");
  }
  HsrConfig out;
  out.channels = j.value("channels", out.channels);
  out.n_blocks = j.value("n_blocks", out.n_blocks);
  out.iterations = j.value("iterations", out.iterations);
  out.scale = j.value("scale", out.scale);
  out.leaky_slope = j.value("leaky_slope", out.leaky_slope);
  out.msa_enabled = j.value("msa_enabled", out.msa_enabled);
  const std::string mode = j.value("msa_mode", std::string("gate"));
  if (mode == "gate") {
    out.msa_mode = MsaMode::kGate;
  } else if (mode == "additive") {
    out.msa_mode = MsaMode::kAdditive;
  } else {
    throw ShapeError("msa_mode must be 'gate' or 'additive', got '" + mode + "'");
  }
  out.share_iter_weights = j.value("share_iter_weights", out.share_iter_weights);
  out.heb_merge_kernel = j.value("heb_merge_kernel", out.heb_merge_kernel);
  out.heb_fuse_kernel = j.value("heb_fuse_kernel", out.heb_fuse_kernel);
  out.validate();
  cfg = out;
}

std::string solver_prefix(const HsrConfig& cfg, std::size_t iteration) {
  return cfg.share_iter_weights ? "solver" : "iter" + std::to_string(iteration) + ".solver";
}

std::string denoiser_prefix(const HsrConfig& cfg, std::size_t iteration) {
  return cfg.share_iter_weights ? "denoiser" : "iter" + std::to_string(iteration) + ".denoiser";
}

NetworkWeights NetworkWeights::build(const HsrConfig& cfg) {
  cfg.validate();
  NetworkWeights w;
  w.config = cfg;
  auto& ps = w.params;
  const std::size_t c = cfg.channels;
  add_conv(ps, "entry", kImageChannels, c, 3);
  add_conv(ps, "trans.conv1", c, c, 3);
  add_conv(ps, "trans.conv2", c, c, 3);
  const std::size_t copies = cfg.share_iter_weights ? 1 : cfg.iterations;
  for (std::size_t k = 0; k < copies; ++k) {
    const std::string sp = solver_prefix(cfg, k);
    add_conv(ps, sp + ".conv1", 2 * c, c, 3);
    add_conv(ps, sp + ".conv2", c, c, 3);
    add_conv(ps, sp + ".conv3", c, c, 3);
  }
  for (std::size_t k = 0; k < copies; ++k) {
    const std::string dp = denoiser_prefix(cfg, k);
    for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
      if (cfg.msa_enabled) register_msa(ps, cfg, block_prefix(dp, b) + ".msa");
      register_heb(ps, cfg, block_prefix(dp, b) + ".heb");
    }
    add_conv(ps, dp + ".tail", c, c, 3);
  }
  add_conv(ps, "upscale.conv", c, kImageChannels * cfg.scale * cfg.scale, 3);
  return w;
}

void NetworkWeights::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& p : params.items()) {
    const std::string& name = p.name;
    const bool is_bias = name.size() > 5 && name.compare(name.size() - 5, 5, ".bias") == 0;
    // Biases share the fan-in of their weight.
    const std::string weight_name = is_bias ? name.substr(0, name.size() - 5) + ".weight" : name;
    const Shape& ws = params.get(weight_name).shape();
    const double fan_in = static_cast<double>(ws.c * ws.h * ws.w);
    std::uniform_real_distribution<double> dist(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
    for (auto& v : p.value.mutable_data()) v = dist(rng);
  }
}

void ForwardTrace::record(const std::string& stage, std::size_t iteration, std::size_t index,
                          const Tensor& t) {
  stages[stage].push_back({iteration, index, t.detach()});
}

Tensor feature_extract(const Tensor& image, const NetworkWeights& w) {
  if (image.shape().c != kImageChannels) {
    throw ShapeError("feature_extract: expected a 3-channel image, got " + image.shape().str());
  }
  return conv(w, "entry", image);
}

Tensor transposition(const Tensor& feat, const NetworkWeights& w) {
  return conv(w, "trans.conv2", explore(w, "trans.conv1", feat));
}

Tensor solver_ls(const Tensor& ht_i, const Tensor& u, const NetworkWeights& w,
                 std::size_t iteration) {
  if (ht_i.shape() != u.shape()) {
    throw ShapeError("solver_ls: input shapes differ " + ht_i.shape().str() + " vs " +
                     u.shape().str());
  }
  const std::string p = solver_prefix(w.config, iteration);
  Tensor x = explore(w, p + ".conv1", concat_channels({ht_i, u}));
  return conv(w, p + ".conv3", conv(w, p + ".conv2", x));
}

Tensor heb_forward(const Tensor& f_in, const NetworkWeights& w, const std::string& prefix,
                   ForwardTrace* trace, std::size_t iteration, std::size_t block) {
  if (f_in.shape().c % HsrConfig::kHebBranches != 0) {
    throw ShapeError("heb_forward: channel count of " + f_in.shape().str() +
                     " is not divisible by 4");
  }
  const Tensor feat = explore(w, prefix + ".explore", f_in);
  const std::vector<Tensor> parts = split_channels(feat, HsrConfig::kHebBranches);

  std::vector<Tensor> merged{parts[0]};
  for (std::size_t i = 2; i <= HsrConfig::kHebBranches; ++i) {
    Tensor g = parts[i - 1];
    for (std::size_t j = 1; j < i; ++j) {
      g = explore(w, prefix + ".branch" + std::to_string(i) + ".conv" + std::to_string(j), g);
    }
    merged.push_back(conv(w, prefix + ".merge" + std::to_string(i), concat_channels({g, merged.back()})));
  }
  if (trace) {
    for (std::size_t i = 0; i < merged.size(); ++i) {
      trace->record("heb_branch", iteration, block * HsrConfig::kHebBranches + i, merged[i]);
    }
  }
  return add(f_in, conv(w, prefix + ".fuse", concat_channels(merged)));
}

Tensor msa_forward(const Tensor& f_in, const NetworkWeights& w, const std::string& prefix,
                   ForwardTrace* trace, std::size_t iteration, std::size_t block) {
  const Shape& s = f_in.shape();
  if (s.h % 4 != 0 || s.w % 4 != 0) {
    throw ShapeError("msa_forward: spatial size of " + s.str() + " is not divisible by 4");
  }
  const std::vector<Tensor> parts =
      split_channels(conv(w, prefix + ".entry", f_in), HsrConfig::kMsaLevels);
  std::vector<Tensor> levels;
  levels.push_back(explore(w, prefix + ".level1", parts[0]));
  levels.push_back(bilinear_upsample(explore(w, prefix + ".level2", max_pool2d(parts[1], 2)), 2));
  levels.push_back(bilinear_upsample(explore(w, prefix + ".level3", max_pool2d(parts[2], 4)), 4));
  if (trace) {
    for (std::size_t l = 0; l < levels.size(); ++l) {
      trace->record("msa_attention", iteration, block * HsrConfig::kMsaLevels + l, levels[l]);
    }
  }
  const Tensor attention = sigmoid(conv(w, prefix + ".fuse", concat_channels(levels)));
  return w.config.msa_mode == MsaMode::kGate ? mul(f_in, attention) : add(f_in, attention);
}

Tensor denoiser_forward(const Tensor& i_hr, const NetworkWeights& w, std::size_t iteration,
                        ForwardTrace* trace) {
  const std::string dp = denoiser_prefix(w.config, iteration);
  Tensor x = i_hr;
  for (std::size_t b = 0; b < w.config.n_blocks; ++b) {
    const std::string bp = block_prefix(dp, b);
    if (w.config.msa_enabled) x = msa_forward(x, w, bp + ".msa", trace, iteration, b);
    x = heb_forward(x, w, bp + ".heb", trace, iteration, b);
  }
  return conv(w, dp + ".tail", x);
}

Tensor upscale(const Tensor& i_hr, const NetworkWeights& w) {
  const std::size_t s = w.config.scale;
  if (s < 2 || s > 4) throw ShapeError("upscale: scale must be 2, 3 or 4");
  return pixel_shuffle(conv(w, "upscale.conv", i_hr), s);
}

Tensor hsrnet_forward(const Tensor& lr, const NetworkWeights& w, ForwardTrace* trace) {
  const Shape& s = lr.shape();
  if (s.h < 8 || s.w < 8) throw ShapeError("hsrnet_forward: LR input must be at least 8x8, got " + s.str());
  const Tensor i_lr = feature_extract(lr, w);
  const Tensor ht_i = transposition(i_lr, w);
  if (trace) trace->record("lr_feat", 0, 0, i_lr);

  Tensor u = ht_i;
  Tensor i_hr;
  const std::size_t iterations = w.config.iterations;
  for (std::size_t k = 0; k < iterations; ++k) {
    if (trace) trace->record("solver_in", k, 0, u);
    i_hr = solver_ls(ht_i, u, w, k);
    if (trace) trace->record("denoiser_in", k, 0, i_hr);
    // The last denoiser pass does not reach the output; it only runs for tracing.
    if (k + 1 < iterations || trace) {
      u = denoiser_forward(i_hr, w, k, trace);
      if (trace) trace->record("denoiser_out", k, 0, u);
    }
  }
  return upscale(i_hr, w);
}

ParamCount param_count(const HsrConfig& cfg) {
  const NetworkWeights w = NetworkWeights::build(cfg);
  ParamCount out;
  for (const auto& p : w.params.items()) {
    std::string key;
    const std::string& n = p.name;
    if (n.rfind("entry", 0) == 0) {
      key = "entry";
    } else if (n.rfind("trans", 0) == 0) {
      key = "transposition";
    } else if (n.rfind("upscale", 0) == 0) {
      key = "upscale";
    } else if (n.find("solver") != std::string::npos) {
      key = "solver_ls";
    } else if (n.find(".msa.") != std::string::npos) {
      key = "denoiser.msa";
    } else if (n.find(".heb.") != std::string::npos) {
      key = "denoiser.heb";
    } else {
      key = "denoiser.tail";
    }
    out.breakdown[key] += p.value.numel();
    out.total += p.value.numel();
  }
  return out;
}

}  // namespace hsr
