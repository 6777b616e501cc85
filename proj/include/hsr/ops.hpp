#pragma once

#include <cstddef>
#include <vector>

#include "hsr/tensor.hpp"

namespace hsr {

/// 2-D cross-correlation with zero padding. `weight` is (out_ch, in_ch, kh, kw)
/// and `bias` is (1, out_ch, 1, 1).
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              std::size_t stride = 1, std::size_t pad = 0);

/// max(x, slope * x); the subgradient at 0 is `slope`.
Tensor leaky_relu(const Tensor& x, double slope);

Tensor sigmoid(const Tensor& x);

/// Non-overlapping k x k max pooling. Height and width must be multiples of k.
/// Ties route the gradient to the first maximum in scan order.
Tensor max_pool2d(const Tensor& x, std::size_t k);

/// Bilinear upsampling with half-pixel centers and edge clamping.
Tensor bilinear_upsample(const Tensor& x, std::size_t factor);

/// (b, c*r*r, h, w) -> (b, c, h*r, w*r). Input channel c*r*r + i*r + j lands
/// on sub-pixel (i, j) of output channel c.
Tensor pixel_shuffle(const Tensor& x, std::size_t r);

/// Inverse rearrangement of pixel_shuffle.
Tensor pixel_unshuffle(const Tensor& x, std::size_t r);

Tensor concat_channels(const std::vector<Tensor>& xs);
std::vector<Tensor> split_channels(const Tensor& x, std::size_t parts);
Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

/// Sum of all elements as a (1,1,1,1) tensor.
Tensor sum(const Tensor& x);

/// Mean absolute difference over all elements as a (1,1,1,1) tensor.
Tensor l1_loss(const Tensor& pred, const Tensor& target);

}  // namespace hsr
