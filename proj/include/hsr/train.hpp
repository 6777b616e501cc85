#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hsr/checkpoint.hpp"
#include "hsr/image.hpp"
#include "hsr/model.hpp"

namespace hsr {

struct TrainConfig {
  double lr = 1e-4;
  std::size_t epochs = 1000;
  // Steps per epoch; 0 means ceil(pairs / batch_size).
  std::size_t steps_per_epoch = 0;
  std::size_t batch_size = 4;
  std::size_t patch_size = 48;  // LR patch side
  std::uint64_t seed = 0;
  std::uint64_t init_seed = 0;  // weight initialization
  std::string data_dir;
  std::string checkpoint_path = "hsrnet.ckpt";
  std::size_t checkpoint_interval = 0;  // steps; 0 writes only at the end
  std::string loss_log;                 // CSV `step,loss`; empty disables it
  std::string resume;                   // checkpoint to continue from
  bool augment = false;                 // reserved, must stay false
  HsrConfig model;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
/// Keys mirror the field names; "scale" is accepted at top level and must
/// agree with model.scale when both appear.
void from_json(const nlohmann::json& j, TrainConfig& cfg);
TrainConfig load_train_config(const std::filesystem::path& path);

/// HR image (cropped to a multiple of the scale) and its bicubic LR version.
struct TrainPair {
  std::string name;
  Image hr;
  Image lr;
};

/// Center-crops `hr` to a multiple of `scale` and derives the LR image by
/// antialiased bicubic downscaling.
TrainPair make_pair(std::string name, const Image& hr, std::size_t scale);
/// Every .png/.ppm in `hr_dir`, sorted by file name.
std::vector<TrainPair> build_pairs(const std::filesystem::path& hr_dir, std::size_t scale);

struct Batch {
  Tensor lr;  // (b, 3, p, p)
  Tensor hr;  // (b, 3, s*p, s*p)
};

/// Aligned random crops: the LR patch at (y, x) pairs with the HR patch at (s*y, s*x).
Batch sample_batch(const std::vector<TrainPair>& pairs, std::size_t batch_size,
                   std::size_t patch, std::size_t scale, std::mt19937_64& rng);

struct LossRecord {
  std::size_t step = 0;
  double loss = 0.0;
};

class Trainer {
 public:
  Trainer(TrainConfig cfg, std::vector<TrainPair> pairs);

  /// One optimizer step; returns the batch loss measured before the update.
  double step();
  /// Runs until `total_steps` steps have been taken, writing checkpoints and
  /// the loss log as configured.
  void run(std::size_t total_steps);
  /// epochs * steps_per_epoch.
  std::size_t planned_steps() const;

  void save(const std::filesystem::path& path) const;
  TrainingState training_state() const;

  const NetworkWeights& weights() const { return weights_; }
  NetworkWeights& weights() { return weights_; }
  const std::vector<LossRecord>& history() const { return history_; }
  std::size_t steps_done() const { return step_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  void restore(const LoadedCheckpoint& ckpt);

  TrainConfig cfg_;
  std::vector<TrainPair> pairs_;
  NetworkWeights weights_;
  AdamState adam_;
  std::mt19937_64 rng_;
  std::size_t step_ = 0;
  std::vector<LossRecord> history_;
  std::string last_checkpoint_;
};

/// CSV `step,loss` with full double precision.
std::string loss_csv(const std::vector<LossRecord>& history);

/// Trains per `cfg` (loading data from cfg.data_dir) and returns the trainer.
Trainer train(const TrainConfig& cfg);

/// Network inference on an arbitrary-size image: reflect-pads to a multiple of
/// 4, runs the network and crops the result to scale x the input size.
Image super_resolve(const Image& lr, const NetworkWeights& weights, ForwardTrace* trace = nullptr);

}  // namespace hsr
