#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hsr/model.hpp"

namespace hsr {

/// Grayscale visualization of one traced feature tensor, values in [0,1].
struct FeatureMap {
  std::string name;  // <stage>_<iter>_<index>
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;
};

/// Stage tags understood by dump_features.
std::vector<std::string> feature_stage_tags();

/// Channel-wise maximum of every traced tensor of `stage` (channel mean for
/// "lr_feat"), min-max normalized. A constant map normalizes to all zeros.
/// Only the first batch item is visualized.
std::vector<FeatureMap> dump_features(const ForwardTrace& trace, const std::string& stage);

/// Channel reduction and normalization of a single tensor.
FeatureMap reduce_feature(const Tensor& t, bool use_mean);

}  // namespace hsr
