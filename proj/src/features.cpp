#include "hsr/features.hpp"

#include <algorithm>

#include "hsr/error.hpp"

namespace hsr {

std::vector<std::string> feature_stage_tags() {
  return {"lr_feat", "solver_in", "denoiser_in", "denoiser_out", "heb_branch", "msa_attention"};
}

FeatureMap reduce_feature(const Tensor& t, bool use_mean) {
  const Shape& s = t.shape();
  FeatureMap map;
  map.height = s.h;
  map.width = s.w;
  map.values.assign(s.plane(), 0.0);
  auto data = t.data();
  for (std::size_t i = 0; i < s.plane(); ++i) {
    double acc = data[i];
    for (std::size_t c = 1; c < s.c; ++c) {
      const double v = data[c * s.plane() + i];
      acc = use_mean ? acc + v : std::max(acc, v);
    }
    map.values[i] = use_mean ? acc / static_cast<double>(s.c) : acc;
  }
  const auto [lo, hi] = std::minmax_element(map.values.begin(), map.values.end());
  const double min = *lo;
  const double range = *hi - *lo;
  for (auto& v : map.values) v = range > 0.0 ? (v - min) / range : 0.0;
  return map;
}

std::vector<FeatureMap> dump_features(const ForwardTrace& trace, const std::string& stage) {
  const auto tags = feature_stage_tags();
  if (std::find(tags.begin(), tags.end(), stage) == tags.end()) {
    std::string valid;
    for (const auto& t : tags) valid += (valid.empty() ? "" : ", ") + t;
    throw ShapeError("unknown feature stage '" + stage + "'; valid stages: " + valid);
  }
  std::vector<FeatureMap> out;
  auto it = trace.stages.find(stage);
  if (it == trace.stages.end()) return out;
  for (const auto& entry : it->second) {
    FeatureMap map = reduce_feature(entry.value, stage == "lr_feat");
    map.name = stage + "_" + std::to_string(entry.iteration) + "_" + std::to_string(entry.index);
    out.push_back(std::move(map));
  }
  return out;
}

}  // namespace hsr
