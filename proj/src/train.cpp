#include "hsr/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hsr/atomic_file.hpp"
#include "hsr/error.hpp"
#include "hsr/ops.hpp"

namespace hsr {

void TrainConfig::validate() const {
  model.validate();
  if (!(lr >= 0.0)) throw ShapeError("lr must be non-negative");
  if (batch_size == 0) throw ShapeError("batch_size must be at least 1");
  if (patch_size < 8) throw ShapeError("patch_size must be at least 8");
  if (model.msa_enabled && patch_size % 4 != 0) {
    throw ShapeError("patch_size must be a multiple of 4 when MSA is enabled");
  }
  if (augment) throw ShapeError("augmentation is not implemented");
}

void to_json(nlohmann::json& j, const TrainConfig& cfg) {
  j = nlohmann::json{{"lr", cfg.lr},
                     {"epochs", cfg.epochs},
                     {"steps_per_epoch", cfg.steps_per_epoch},
                     {"batch_size", cfg.batch_size},
                     {"patch_size", cfg.patch_size},
                     {"scale", cfg.model.scale},
                     {"seed", cfg.seed},
                     {"init_seed", cfg.init_seed},
                     {"data_dir", cfg.data_dir},
                     {"checkpoint_path", cfg.checkpoint_path},
                     {"checkpoint_interval", cfg.checkpoint_interval},
                     {"loss_log", cfg.loss_log},
                     {"resume", cfg.resume},
                     {"augment", cfg.augment},
                     {"model", cfg.model}};
}

void from_json(const nlohmann::json& j, TrainConfig& cfg) {
  static const char* known[] = {"lr",         "epochs",          "steps_per_epoch",
                                "batch_size", "patch_size",      "scale",
                                "seed",       "init_seed",       "data_dir",
                                "checkpoint_path", "checkpoint_interval", "loss_log",
                                "resume",     "augment",         "model"};
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) throw ShapeError("unknown config key '" + item.key() + "'");
  }
  TrainConfig out;
  out.lr = j.value("lr", out.lr);
  out.epochs = j.value("epochs", out.epochs);
  out.steps_per_epoch = j.value("steps_per_epoch", out.steps_per_epoch);
  out.batch_size = j.value("batch_size", out.batch_size);
  out.patch_size = j.value("patch_size", out.patch_size);
  out.seed = j.value("seed", out.seed);
  out.init_seed = j.value("init_seed", out.init_seed);
  out.data_dir = j.value("data_dir", out.data_dir);
  out.checkpoint_path = j.value("checkpoint_path", out.checkpoint_path);
  out.checkpoint_interval = j.value("checkpoint_interval", out.checkpoint_interval);
  out.loss_log = j.value("loss_log", out.loss_log);
  out.resume = j.value("resume", out.resume);
  out.augment = j.value("augment", out.augment);
  if (j.contains("model")) out.model = j.at("model").get<HsrConfig>();
  if (j.contains("scale")) {
    const std::size_t s = j.at("scale").get<std::size_t>();
    if (j.contains("model") && j.at("model").contains("scale") && out.model.scale != s) {
      throw ShapeError("config 'scale' disagrees with 'model.scale'");
    }
    out.model.scale = s;
  }
  out.validate();
  cfg = out;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return nlohmann::json::parse(text).get<TrainConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("cannot parse config '" + path.string() + "': " + e.what());
  }
}

TrainPair make_pair(std::string name, const Image& hr, std::size_t scale) {
  const std::size_t h = hr.height() / scale * scale;
  const std::size_t w = hr.width() / scale * scale;
  if (h == 0 || w == 0) throw ShapeError("image '" + name + "' is smaller than the scale factor");
  Image cropped = crop(hr, (hr.height() - h) / 2, (hr.width() - w) / 2, h, w);
  Image lr = resize_bicubic(cropped, h / scale, w / scale, true);
  return {std::move(name), std::move(cropped), std::move(lr)};
}

std::vector<TrainPair> build_pairs(const std::filesystem::path& hr_dir, std::size_t scale) {
  if (!std::filesystem::is_directory(hr_dir)) {
    throw IoError("data directory '" + hr_dir.string() + "' does not exist");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(hr_dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".ppm") files.push_back(entry.path());
  }
  if (files.empty()) throw IoError("data directory '" + hr_dir.string() + "' holds no images");
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename() < b.filename(); });
  std::vector<TrainPair> pairs;
  for (const auto& f : files) pairs.push_back(make_pair(f.filename().string(), load_image(f), scale));
  return pairs;
}

Batch sample_batch(const std::vector<TrainPair>& pairs, std::size_t batch_size, std::size_t patch,
                   std::size_t scale, std::mt19937_64& rng) {
  if (pairs.empty()) throw ShapeError("sample_batch: empty dataset");
  for (const auto& p : pairs) {
    if (p.lr.height() < patch || p.lr.width() < patch) {
      throw ShapeError("sample_batch: patch " + std::to_string(patch) + " exceeds LR image '" +
                       p.name + "' (" + std::to_string(p.lr.height()) + "x" +
                       std::to_string(p.lr.width()) + ")");
    }
  }
  const std::size_t hp = patch * scale;
  std::vector<double> lr(batch_size * 3 * patch * patch);
  std::vector<double> hr(batch_size * 3 * hp * hp);
  for (std::size_t b = 0; b < batch_size; ++b) {
    const auto& pair = pairs[std::uniform_int_distribution<std::size_t>(0, pairs.size() - 1)(rng)];
    const std::size_t y = std::uniform_int_distribution<std::size_t>(0, pair.lr.height() - patch)(rng);
    const std::size_t x = std::uniform_int_distribution<std::size_t>(0, pair.lr.width() - patch)(rng);
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t i = 0; i < patch; ++i) {
        for (std::size_t j = 0; j < patch; ++j) {
          lr[((b * 3 + c) * patch + i) * patch + j] = pair.lr.at(y + i, x + j, c);
        }
      }
      for (std::size_t i = 0; i < hp; ++i) {
        for (std::size_t j = 0; j < hp; ++j) {
          hr[((b * 3 + c) * hp + i) * hp + j] = pair.hr.at(scale * y + i, scale * x + j, c);
        }
      }
    }
  }
  return {Tensor::from({batch_size, 3, patch, patch}, std::move(lr)),
          Tensor::from({batch_size, 3, hp, hp}, std::move(hr))};
}

Trainer::Trainer(TrainConfig cfg, std::vector<TrainPair> pairs)
    : cfg_(std::move(cfg)), pairs_(std::move(pairs)), rng_(cfg_.seed) {
  cfg_.validate();
  if (pairs_.empty()) throw ShapeError("trainer needs at least one training pair");
  adam_.lr = cfg_.lr;
  if (!cfg_.resume.empty()) {
    restore(load_checkpoint(cfg_.resume));
  } else {
    weights_ = NetworkWeights::build(cfg_.model);
    weights_.initialize(cfg_.init_seed);
  }
}

void Trainer::restore(const LoadedCheckpoint& ckpt) {
  if (!(ckpt.weights.config == cfg_.model)) {
    throw ShapeError("resume checkpoint was trained with a different model config");
  }
  if (!ckpt.state) throw IoError("resume checkpoint has no training state section");
  weights_ = NetworkWeights::build(cfg_.model);
  const TrainingState& st = *ckpt.state;
  auto& items = weights_.params.items();
  for (std::size_t k = 0; k < items.size(); ++k) {
    auto dst = items[k].value.mutable_data();
    std::copy(st.master[k].begin(), st.master[k].end(), dst.begin());
  }
  adam_ = st.adam;
  adam_.lr = cfg_.lr;
  std::istringstream is(st.rng_state);
  is >> rng_;
  step_ = st.step;
}

std::size_t Trainer::planned_steps() const {
  const std::size_t per_epoch =
      cfg_.steps_per_epoch ? cfg_.steps_per_epoch
                           : (pairs_.size() + cfg_.batch_size - 1) / cfg_.batch_size;
  return cfg_.epochs * per_epoch;
}

double Trainer::step() {
  const Batch batch = sample_batch(pairs_, cfg_.batch_size, cfg_.patch_size, cfg_.model.scale, rng_);
  weights_.params.zero_grad();
  const Tensor loss = l1_loss(hsrnet_forward(batch.lr, weights_), batch.hr);
  const double value = loss.item();
  if (!std::isfinite(value)) {
    throw NumericError("non-finite loss at step " + std::to_string(step_ + 1) +
                       (last_checkpoint_.empty() ? std::string("; no checkpoint written yet")
                                                 : "; last good checkpoint: " + last_checkpoint_));
  }
  backward(loss);
  adam_step(weights_.params, adam_);
  ++step_;
  history_.push_back({step_, value});
  return value;
}

TrainingState Trainer::training_state() const {
  TrainingState st;
  st.step = step_;
  st.adam = adam_;
  std::ostringstream os;
  os << rng_;
  st.rng_state = os.str();
  for (const auto& p : weights_.params.items()) {
    st.master.emplace_back(p.value.data().begin(), p.value.data().end());
  }
  return st;
}

void Trainer::save(const std::filesystem::path& path) const {
  const TrainingState st = training_state();
  save_checkpoint(path, weights_, &st);
}

void Trainer::run(std::size_t total_steps) {
  while (step_ < total_steps) {
    step();
    if (cfg_.checkpoint_interval && step_ % cfg_.checkpoint_interval == 0 && step_ < total_steps &&
        !cfg_.checkpoint_path.empty()) {
      save(cfg_.checkpoint_path);
      last_checkpoint_ = cfg_.checkpoint_path;
    }
  }
  if (!cfg_.checkpoint_path.empty()) {
    save(cfg_.checkpoint_path);
    last_checkpoint_ = cfg_.checkpoint_path;
  }
  if (!cfg_.loss_log.empty()) write_file_atomic(cfg_.loss_log, loss_csv(history_));
}

std::string loss_csv(const std::vector<LossRecord>& history) {
  std::ostringstream os;
  os.precision(17);
  os << "step,loss\n";
  for (const auto& r : history) os << r.step << "," << r.loss << "\n";
  return os.str();
}

Trainer train(const TrainConfig& cfg) {
  Trainer trainer(cfg, build_pairs(cfg.data_dir, cfg.model.scale));
  trainer.run(trainer.planned_steps());
  return trainer;
}

Image super_resolve(const Image& lr, const NetworkWeights& weights, ForwardTrace* trace) {
  NoGradGuard no_grad;
  auto target = [](std::size_t n) { return std::max<std::size_t>((n + 3) / 4 * 4, 8); };
  const Image padded = pad_reflect(lr, target(lr.height()), target(lr.width()));
  const Tensor out = hsrnet_forward(image_to_tensor(padded), weights, trace);
  const Image sr = tensor_to_image(out);
  const std::size_t s = weights.config.scale;
  return crop(sr, 0, 0, lr.height() * s, lr.width() * s);
}

}  // namespace hsr
