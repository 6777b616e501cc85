#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hsr/model.hpp"
#include "hsr/params.hpp"

namespace hsr {

inline constexpr char kCheckpointMagic[4] = {'H', 'S', 'R', 'W'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything needed to continue training bit-exactly.
struct TrainingState {
  std::size_t step = 0;
  AdamState adam;
  std::string rng_state;
  // Full-precision parameter values in registry order.
  std::vector<std::vector<double>> master;
};

struct LoadedCheckpoint {
  NetworkWeights weights;  // parameters as stored (32-bit precision)
  std::optional<TrainingState> state;
};

/// Layout (little-endian):
///   "HSRW" | u32 version | u32 len + config JSON | u32 count |
///   count x (u32 len + name | 4 x u32 shape | f32 values) | sections...
/// A section is a 4-byte tag, a u64 payload length and the payload. The
/// optional "TRNS" section carries TrainingState; unknown tags are skipped.
std::string encode_checkpoint(const NetworkWeights& weights, const TrainingState* state = nullptr);
LoadedCheckpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const NetworkWeights& weights,
                     const TrainingState* state = nullptr);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hsr
