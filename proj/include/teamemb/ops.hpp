#pragma once

#include <span>

#include "teamemb/autograd.hpp"

namespace teamemb::ops {

enum class UpsampleMode { kBilinear, kNearest };

// input [C_in,H,W], weight [C_out,C_in,kH,kW], bias [C_out] or undefined.
template <typename T>
BasicVar<T> conv2d(const BasicVar<T>& input, const BasicVar<T>& weight, const BasicVar<T>& bias, int stride, int pad);

template <typename T>
BasicVar<T> relu(const BasicVar<T>& x);
// x for x > 0, e^x - 1 otherwise. Continuous first derivative.
template <typename T>
BasicVar<T> elu(const BasicVar<T>& x);
template <typename T>
BasicVar<T> sigmoid(const BasicVar<T>& x);
template <typename T>
BasicVar<T> add(const BasicVar<T>& a, const BasicVar<T>& b);
template <typename T>
BasicVar<T> scale(const BasicVar<T>& x, T factor);

// [C,H,W] + [C,1,1] broadcast over space.
template <typename T>
BasicVar<T> add_channelwise(const BasicVar<T>& x, const BasicVar<T>& per_channel);

template <typename T>
BasicVar<T> upsample(const BasicVar<T>& x, int factor, UpsampleMode mode);
template <typename T>
BasicVar<T> avg_pool(const BasicVar<T>& x, int factor);
template <typename T>
BasicVar<T> max_pool(const BasicVar<T>& x, int factor);
template <typename T>
BasicVar<T> global_avg_pool(const BasicVar<T>& x);

// Channels [begin, end) of a [C,H,W] tensor.
template <typename T>
BasicVar<T> slice_channels(const BasicVar<T>& x, int begin, int end);

// Σ weights[i] · terms[i] over single-element terms.
template <typename T>
BasicVar<T> weighted_sum(std::span<const BasicVar<T>> terms, std::span<const T> weights);

// Plain-tensor versions used outside training graphs.
template <typename T>
BasicTensor<T> upsample(const BasicTensor<T>& x, int factor, UpsampleMode mode);
template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x);

}  // namespace teamemb::ops
