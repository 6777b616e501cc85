#include "hsr/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "hsr/atomic_file.hpp"
#include "hsr/error.hpp"

namespace hsr {
namespace {

constexpr char kTrainTag[4] = {'T', 'R', 'N', 'S'};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::string_view s) { out_.append(s); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  std::string& buffer() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string str() { return std::string(bytes(u32())); }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw IoError("checkpoint is truncated");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

TrainingState decode_training_state(std::string_view payload, const ParameterSet& params) {
  Reader r(payload);
  TrainingState st;
  st.step = r.u64();
  st.adam.lr = r.f64();
  st.adam.beta1 = r.f64();
  st.adam.beta2 = r.f64();
  st.adam.eps = r.f64();
  st.adam.t = r.u64();
  st.rng_state = r.str();
  const bool has_moments = r.u8() != 0;
  for (const auto& p : params.items()) {
    const std::size_t n = p.value.numel();
    std::vector<double> master(n);
    for (auto& v : master) v = r.f64();
    st.master.push_back(std::move(master));
    if (has_moments) {
      std::vector<double> m(n), v(n);
      for (auto& x : m) x = r.f64();
      for (auto& x : v) x = r.f64();
      st.adam.m.push_back(std::move(m));
      st.adam.v.push_back(std::move(v));
    }
  }
  return st;
}

}  // namespace

std::string encode_checkpoint(const NetworkWeights& weights, const TrainingState* state) {
  Writer w;
  w.bytes(std::string_view(kCheckpointMagic, 4));
  w.u32(kCheckpointVersion);
  w.str(nlohmann::json(weights.config).dump());
  const auto& items = weights.params.items();
  w.u32(static_cast<std::uint32_t>(items.size()));
  for (const auto& p : items) {
    w.str(p.name);
    const Shape& s = p.value.shape();
    for (std::size_t d : {s.n, s.c, s.h, s.w}) w.u32(static_cast<std::uint32_t>(d));
    for (double v : p.value.data()) w.f32(static_cast<float>(v));
  }
  if (state) {
    Writer section;
    section.u64(state->step);
    section.f64(state->adam.lr);
    section.f64(state->adam.beta1);
    section.f64(state->adam.beta2);
    section.f64(state->adam.eps);
    section.u64(state->adam.t);
    section.str(state->rng_state);
    const bool has_moments = !state->adam.m.empty();
    section.u8(has_moments ? 1 : 0);
    for (std::size_t k = 0; k < items.size(); ++k) {
      if (state->master.size() != items.size() || state->master[k].size() != items[k].value.numel()) {
        throw ShapeError("training state does not match the parameter table");
      }
      for (double v : state->master[k]) section.f64(v);
      if (has_moments) {
        for (double v : state->adam.m[k]) section.f64(v);
        for (double v : state->adam.v[k]) section.f64(v);
      }
    }
    w.bytes(std::string_view(kTrainTag, 4));
    w.u64(section.buffer().size());
    w.bytes(section.buffer());
  }
  return std::move(w.buffer());
}

LoadedCheckpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw IoError("bad magic: not an HSRW checkpoint");
  }
  r.bytes(4);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                  std::to_string(kCheckpointVersion) + ")");
  }
  HsrConfig cfg;
  try {
    cfg = nlohmann::json::parse(r.str()).get<HsrConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint config is malformed: ") + e.what());
  } catch (const ShapeError& e) {
    throw IoError(std::string("checkpoint config is invalid: ") + e.what());
  }

  LoadedCheckpoint out{NetworkWeights::build(cfg), std::nullopt};
  auto& items = out.weights.params.items();
  const std::uint32_t count = r.u32();
  if (count != items.size()) {
    throw IoError("checkpoint holds " + std::to_string(count) + " parameters but its config implies " +
                  std::to_string(items.size()));
  }
  for (auto& p : items) {
    const std::string name = r.str();
    Shape s;
    s.n = r.u32();
    s.c = r.u32();
    s.h = r.u32();
    s.w = r.u32();
    if (name != p.name || s != p.value.shape()) {
      throw IoError("checkpoint parameter '" + name + "' " + s.str() +
                    " disagrees with config entry '" + p.name + "' " + p.value.shape().str());
    }
    for (auto& v : p.value.mutable_data()) v = static_cast<double>(r.f32());
  }
  while (!r.done()) {
    const std::string tag(r.bytes(4));
    const std::uint64_t len = r.u64();
    const std::string_view payload = r.bytes(static_cast<std::size_t>(len));
    if (tag == std::string_view(kTrainTag, 4)) {
      out.state = decode_training_state(payload, out.weights.params);
    }
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const NetworkWeights& weights,
                     const TrainingState* state) {
  write_file_atomic(path, encode_checkpoint(weights, state));
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace hsr
