#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "hsr/params.hpp"
#include "hsr/tensor.hpp"

namespace hsr {

enum class MsaMode {
  kGate,      // output = input * attention
  kAdditive,  // output = input + attention
};

struct HsrConfig {
  static constexpr std::size_t kHebBranches = 4;
  static constexpr std::size_t kMsaLevels = 3;

  std::size_t channels = 64;
  std::size_t n_blocks = 10;
  std::size_t iterations = 3;
  std::size_t scale = 4;
  double leaky_slope = 0.1;
  bool msa_enabled = true;
  MsaMode msa_mode = MsaMode::kGate;
  bool share_iter_weights = true;
  // Kernel of the convs that merge a branch with its predecessor in the HEB.
  std::size_t heb_merge_kernel = 1;
  // Kernel of the conv that fuses the concatenated HEB branches.
  std::size_t heb_fuse_kernel = 3;

  void validate() const;
  bool operator==(const HsrConfig&) const = default;
};

void to_json(nlohmann::json& j, const HsrConfig& cfg);
void from_json(const nlohmann::json& j, HsrConfig& cfg);

/// Architecture config plus the parameters it implies.
struct NetworkWeights {
  HsrConfig config;
  ParameterSet params;

  /// Registers every parameter (zero-filled) for `cfg`.
  static NetworkWeights build(const HsrConfig& cfg);

  /// Fan-in scaled uniform init: weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  void initialize(std::uint64_t seed);
};

/// Intermediate features kept by a traced forward pass.
struct TraceEntry {
  std::size_t iteration = 0;
  std::size_t index = 0;
  Tensor value;
};

struct ForwardTrace {
  std::map<std::string, std::vector<TraceEntry>> stages;
  void record(const std::string& stage, std::size_t iteration, std::size_t index, const Tensor& t);
};

// Building blocks. `prefix` selects the parameter namespace.
Tensor feature_extract(const Tensor& image, const NetworkWeights& w);
Tensor transposition(const Tensor& feat, const NetworkWeights& w);
Tensor solver_ls(const Tensor& ht_i, const Tensor& u, const NetworkWeights& w,
                 std::size_t iteration = 0);
Tensor heb_forward(const Tensor& f_in, const NetworkWeights& w, const std::string& prefix,
                   ForwardTrace* trace = nullptr, std::size_t iteration = 0,
                   std::size_t block = 0);
Tensor msa_forward(const Tensor& f_in, const NetworkWeights& w, const std::string& prefix,
                   ForwardTrace* trace = nullptr, std::size_t iteration = 0,
                   std::size_t block = 0);
Tensor denoiser_forward(const Tensor& i_hr, const NetworkWeights& w, std::size_t iteration = 0,
                        ForwardTrace* trace = nullptr);
Tensor upscale(const Tensor& i_hr, const NetworkWeights& w);

/// Full network on a (b, 3, h, w) LR tensor; h and w must be multiples of 4
/// when MSA is enabled. Returns (b, 3, s*h, s*w).
Tensor hsrnet_forward(const Tensor& lr, const NetworkWeights& w, ForwardTrace* trace = nullptr);

/// Parameter name prefixes of the per-iteration modules.
std::string solver_prefix(const HsrConfig& cfg, std::size_t iteration);
std::string denoiser_prefix(const HsrConfig& cfg, std::size_t iteration);

struct ParamCount {
  std::size_t total = 0;
  std::map<std::string, std::size_t> breakdown;
};

ParamCount param_count(const HsrConfig& cfg);

}  // namespace hsr
