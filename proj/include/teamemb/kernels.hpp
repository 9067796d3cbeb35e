#pragma once

#include <span>

namespace teamemb::kernels {

struct ConvGeometry {
  int in_channels = 0;
  int in_height = 0;
  int in_width = 0;
  int out_channels = 0;
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  int pad = 0;

  int out_height() const { return (in_height + 2 * pad - kernel_h) / stride + 1; }
  int out_width() const { return (in_width + 2 * pad - kernel_w) / stride + 1; }
  int patch_size() const { return in_channels * kernel_h * kernel_w; }
};

// Two implementations of every hot loop: `serial` is the straightforward
// reference used by the tests, `parallel` is the OpenMP im2col/GEMM path the
// network runs on. Backward functions accumulate into their outputs; empty
// spans are skipped. `bias` may be empty.
namespace serial {

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> input,
                    std::span<const T> weight, std::span<const T> bias,
                    std::span<T> output);
template <typename T>
void conv2d_backward(const ConvGeometry& g, std::span<const T> input,
                     std::span<const T> weight, std::span<const T> grad_output,
                     std::span<T> grad_input, std::span<T> grad_weight,
                     std::span<T> grad_bias);

template <typename T>
void upsample_bilinear_forward(int channels, int height, int width, int factor,
                               std::span<const T> input, std::span<T> output);
template <typename T>
void upsample_bilinear_backward(int channels, int height, int width, int factor,
                                std::span<const T> grad_output, std::span<T> grad_input);

}  // namespace serial

namespace parallel {

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> input,
                    std::span<const T> weight, std::span<const T> bias,
                    std::span<T> output);
template <typename T>
void conv2d_backward(const ConvGeometry& g, std::span<const T> input,
                     std::span<const T> weight, std::span<const T> grad_output,
                     std::span<T> grad_input, std::span<T> grad_weight,
                     std::span<T> grad_bias);

template <typename T>
void upsample_bilinear_forward(int channels, int height, int width, int factor,
                               std::span<const T> input, std::span<T> output);
template <typename T>
void upsample_bilinear_backward(int channels, int height, int width, int factor,
                                std::span<const T> grad_output, std::span<T> grad_input);

}  // namespace parallel

// Source index and weight of the lower neighbour for align-corners-false
// sampling: src = (dst + 0.5) / factor - 0.5, clamped to the valid range.
struct BilinearTap {
  int lo;
  int hi;
  double w_hi;
};
BilinearTap bilinear_tap(int dst, int factor, int src_extent);

}  // namespace teamemb::kernels
