#include <algorithm>
#include <cmath>
#include <cstddef>

#include "teamemb/kernels.hpp"

namespace teamemb::kernels {

BilinearTap bilinear_tap(int dst, int factor, int src_extent) {
  double src = (static_cast<double>(dst) + 0.5) / static_cast<double>(factor) - 0.5;
  if (src < 0.0) src = 0.0;
  int lo = static_cast<int>(std::floor(src));
  if (lo > src_extent - 1) lo = src_extent - 1;
  int hi = std::min(lo + 1, src_extent - 1);
  double w_hi = src - static_cast<double>(lo);
  if (hi == lo) w_hi = 0.0;
  return {lo, hi, w_hi};
}

namespace serial {

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> input,
                    std::span<const T> weight, std::span<const T> bias,
                    std::span<T> output) {
  const int oh = g.out_height();
  const int ow = g.out_width();
  for (int co = 0; co < g.out_channels; ++co) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        T acc = bias.empty() ? T(0) : bias[co];
        for (int ci = 0; ci < g.in_channels; ++ci) {
          for (int ky = 0; ky < g.kernel_h; ++ky) {
            const int iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.in_height) continue;
            for (int kx = 0; kx < g.kernel_w; ++kx) {
              const int ix = ox * g.stride - g.pad + kx;
              if (ix < 0 || ix >= g.in_width) continue;
              acc += input[(static_cast<std::size_t>(ci) * g.in_height + iy) * g.in_width + ix] *
                     weight[((static_cast<std::size_t>(co) * g.in_channels + ci) * g.kernel_h + ky) *
                                g.kernel_w +
                            kx];
            }
          }
        }
        output[(static_cast<std::size_t>(co) * oh + oy) * ow + ox] = acc;
      }
    }
  }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, std::span<const T> input,
                     std::span<const T> weight, std::span<const T> grad_output,
                     std::span<T> grad_input, std::span<T> grad_weight,
                     std::span<T> grad_bias) {
  const int oh = g.out_height();
  const int ow = g.out_width();
  for (int co = 0; co < g.out_channels; ++co) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const T go = grad_output[(static_cast<std::size_t>(co) * oh + oy) * ow + ox];
        if (!grad_bias.empty()) grad_bias[co] += go;
        for (int ci = 0; ci < g.in_channels; ++ci) {
          for (int ky = 0; ky < g.kernel_h; ++ky) {
            const int iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.in_height) continue;
            for (int kx = 0; kx < g.kernel_w; ++kx) {
              const int ix = ox * g.stride - g.pad + kx;
              if (ix < 0 || ix >= g.in_width) continue;
              const std::size_t in_idx =
                  (static_cast<std::size_t>(ci) * g.in_height + iy) * g.in_width + ix;
              const std::size_t w_idx =
                  ((static_cast<std::size_t>(co) * g.in_channels + ci) * g.kernel_h + ky) *
                      g.kernel_w +
                  kx;
              if (!grad_weight.empty()) grad_weight[w_idx] += go * input[in_idx];
              if (!grad_input.empty()) grad_input[in_idx] += go * weight[w_idx];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void upsample_bilinear_forward(int channels, int height, int width, int factor,
                               std::span<const T> input, std::span<T> output) {
  const int oh = height * factor;
  const int ow = width * factor;
  for (int c = 0; c < channels; ++c) {
    const T* src = input.data() + static_cast<std::size_t>(c) * height * width;
    T* dst = output.data() + static_cast<std::size_t>(c) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      const BilinearTap ty = bilinear_tap(y, factor, height);
      for (int x = 0; x < ow; ++x) {
        const BilinearTap tx = bilinear_tap(x, factor, width);
        const T top = src[ty.lo * width + tx.lo] * (T(1) - static_cast<T>(tx.w_hi)) + src[ty.lo * width + tx.hi] * static_cast<T>(tx.w_hi);
        const T bot = src[ty.hi * width + tx.lo] * (T(1) - static_cast<T>(tx.w_hi)) + src[ty.hi * width + tx.hi] * static_cast<T>(tx.w_hi);
        dst[y * ow + x] = top * (T(1) - static_cast<T>(ty.w_hi)) + bot * static_cast<T>(ty.w_hi);
      }
    }
  }
}

template <typename T>
void upsample_bilinear_backward(int channels, int height, int width, int factor,
                                std::span<const T> grad_output, std::span<T> grad_input) {
  const int oh = height * factor;
  const int ow = width * factor;
  for (int c = 0; c < channels; ++c) {
    const T* g = grad_output.data() + static_cast<std::size_t>(c) * oh * ow;
    T* gi = grad_input.data() + static_cast<std::size_t>(c) * height * width;
    for (int y = 0; y < oh; ++y) {
      const BilinearTap ty = bilinear_tap(y, factor, height);
      for (int x = 0; x < ow; ++x) {
        const BilinearTap tx = bilinear_tap(x, factor, width);
        const T v = g[y * ow + x];
        gi[ty.lo * width + tx.lo] += v * (T(1) - static_cast<T>(ty.w_hi)) * (T(1) - static_cast<T>(tx.w_hi));
        gi[ty.lo * width + tx.hi] += v * (T(1) - static_cast<T>(ty.w_hi)) * static_cast<T>(tx.w_hi);
        gi[ty.hi * width + tx.lo] += v * static_cast<T>(ty.w_hi) * (T(1) - static_cast<T>(tx.w_hi));
        gi[ty.hi * width + tx.hi] += v * static_cast<T>(ty.w_hi) * static_cast<T>(tx.w_hi);
      }
    }
  }
}


#define TEAMEMB_INSTANTIATE(T)                                                            \
  template void conv2d_forward<T>(const ConvGeometry&, std::span<const T>,              \
                                  std::span<const T>, std::span<const T>, std::span<T>); \
  template void conv2d_backward<T>(const ConvGeometry&, std::span<const T>,             \
                                   std::span<const T>, std::span<const T>, std::span<T>, \
                                   std::span<T>, std::span<T>);                          \
  template void upsample_bilinear_forward<T>(int, int, int, int, std::span<const T>,    \
                                             std::span<T>);                              \
  template void upsample_bilinear_backward<T>(int, int, int, int, std::span<const T>,   \
                                              std::span<T>);
TEAMEMB_INSTANTIATE(float)
TEAMEMB_INSTANTIATE(double)
#undef TEAMEMB_INSTANTIATE

}  // namespace serial
}  // namespace teamemb::kernels
