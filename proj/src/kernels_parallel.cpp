#include <algorithm>
#include <cstddef>
#include <vector>

#include "teamemb/kernels.hpp"

namespace teamemb::kernels::parallel {
namespace {

bool is_pointwise(const ConvGeometry& g) {
  return g.kernel_h == 1 && g.kernel_w == 1 && g.stride == 1 && g.pad == 0;
}

// col[k, p] for output rows [y0, y1), with k = (ci * kh + ky) * kw + kx and
// p = (oy - y0) * ow + ox.
template <typename T>
void im2col(const ConvGeometry& g, const T* input, int y0, int y1, T* col) {
  const int ow = g.out_width();
  const int band = (y1 - y0) * ow;
  const int patch = g.patch_size();
#pragma omp parallel for schedule(static)
  for (int k = 0; k < patch; ++k) {
    const int kx = k % g.kernel_w;
    const int ky = (k / g.kernel_w) % g.kernel_h;
    const int ci = k / (g.kernel_w * g.kernel_h);
    const T* plane = input + static_cast<std::size_t>(ci) * g.in_height * g.in_width;
    T* row = col + static_cast<std::size_t>(k) * band;
    for (int oy = y0; oy < y1; ++oy) {
      const int iy = oy * g.stride - g.pad + ky;
      T* dst = row + static_cast<std::size_t>(oy - y0) * ow;
      if (iy < 0 || iy >= g.in_height) {
        std::fill(dst, dst + ow, T(0));
        continue;
      }
      const T* src = plane + static_cast<std::size_t>(iy) * g.in_width;
      for (int ox = 0; ox < ow; ++ox) {
        const int ix = ox * g.stride - g.pad + kx;
        dst[ox] = (ix >= 0 && ix < g.in_width) ? src[ix] : T(0);
      }
    }
  }
}

// Scatter-add of a band of col back onto the input image. Each input channel
// owns a contiguous block of col rows, so channels are independent.
template <typename T>
void col2im_add(const ConvGeometry& g, const T* col, int y0, int y1, T* grad_input) {
  const int ow = g.out_width();
  const int band = (y1 - y0) * ow;
  const int taps = g.kernel_h * g.kernel_w;
#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < g.in_channels; ++ci) {
    T* plane = grad_input + static_cast<std::size_t>(ci) * g.in_height * g.in_width;
    for (int t = 0; t < taps; ++t) {
      const int ky = t / g.kernel_w;
      const int kx = t % g.kernel_w;
      const T* row = col + static_cast<std::size_t>(ci * taps + t) * band;
      for (int oy = y0; oy < y1; ++oy) {
        const int iy = oy * g.stride - g.pad + ky;
        if (iy < 0 || iy >= g.in_height) continue;
        T* dst = plane + static_cast<std::size_t>(iy) * g.in_width;
        const T* src = row + static_cast<std::size_t>(oy - y0) * ow;
        for (int ox = 0; ox < ow; ++ox) {
          const int ix = ox * g.stride - g.pad + kx;
          if (ix >= 0 && ix < g.in_width) dst[ix] += src[ox];
        }
      }
    }
  }
}

// Output rows per band so that one band of col stays around 256 KB.
template <typename T>
int band_rows(const ConvGeometry& g) {
  const std::size_t row_bytes = sizeof(T) * g.patch_size() * g.out_width();
  return static_cast<int>(std::clamp<std::size_t>((256u << 10) / row_bytes, 1, g.out_height()));
}

// C[m * ldc + n] += sum_r A(m, r) * B[r * ldb + n]. A is packed into panels of
// kMb rows so the inner loop keeps a kMb x kNb accumulator tile in registers.
template <typename T, typename AAt>
void gemm_acc(int M, int N, int R, AAt a_at, const T* B, int ldb, T* C, int ldc) {
  constexpr int kMb = 4;
  constexpr int kNb = 64 / static_cast<int>(sizeof(T));
  const int mblocks = (M + kMb - 1) / kMb;
  const int nblocks = (N + kNb - 1) / kNb;
  std::vector<T> packed(static_cast<std::size_t>(mblocks) * R * kMb);
#pragma omp parallel for schedule(static)
  for (int mb = 0; mb < mblocks; ++mb) {
    T* panel = packed.data() + static_cast<std::size_t>(mb) * R * kMb;
    for (int r = 0; r < R; ++r)
      for (int i = 0; i < kMb; ++i) {
        const int m = mb * kMb + i;
        panel[static_cast<std::size_t>(r) * kMb + i] = m < M ? a_at(m, r) : T(0);
      }
  }
#pragma omp parallel for collapse(2) schedule(static)
  for (int mb = 0; mb < mblocks; ++mb) {
    for (int nb = 0; nb < nblocks; ++nb) {
      const T* panel = packed.data() + static_cast<std::size_t>(mb) * R * kMb;
      const int n0 = nb * kNb;
      const int width = std::min(kNb, N - n0);
      T acc[kMb][kNb] = {};
      if (width == kNb) {
        for (int r = 0; r < R; ++r) {
          const T* b = B + static_cast<std::size_t>(r) * ldb + n0;
          const T* a = panel + static_cast<std::size_t>(r) * kMb;
          for (int i = 0; i < kMb; ++i)
#pragma omp simd
            for (int j = 0; j < kNb; ++j) acc[i][j] += a[i] * b[j];
        }
      } else {
        for (int r = 0; r < R; ++r) {
          const T* b = B + static_cast<std::size_t>(r) * ldb + n0;
          const T* a = panel + static_cast<std::size_t>(r) * kMb;
          for (int i = 0; i < kMb; ++i)
            for (int j = 0; j < width; ++j) acc[i][j] += a[i] * b[j];
        }
      }
      for (int i = 0; i < kMb && mb * kMb + i < M; ++i) {
        T* c = C + static_cast<std::size_t>(mb * kMb + i) * ldc + n0;
        for (int j = 0; j < width; ++j) c[j] += acc[i][j];
      }
    }
  }
}

// C[m * ldc + n] += sum_r A[m * lda + r] * B[n * ldb + r]: both operands are
// read along contiguous rows, accumulating a 4 x 2 tile of vector lanes.
template <typename T>
void gemm_nt_acc(int M, int N, int R, const T* A, int lda, const T* B, int ldb, T* C, int ldc) {
  constexpr int kMb = 4, kNb = 2, kV = 32 / static_cast<int>(sizeof(T));
  const int mblocks = (M + kMb - 1) / kMb, nblocks = (N + kNb - 1) / kNb;
  const int rv = R / kV * kV;
#pragma omp parallel for collapse(2) schedule(static)
  for (int mb = 0; mb < mblocks; ++mb) {
    for (int nb = 0; nb < nblocks; ++nb) {
      const T* a[kMb];
      const T* b[kNb];
      for (int i = 0; i < kMb; ++i) a[i] = A + static_cast<std::size_t>(std::min(mb * kMb + i, M - 1)) * lda;
      for (int j = 0; j < kNb; ++j) b[j] = B + static_cast<std::size_t>(std::min(nb * kNb + j, N - 1)) * ldb;
      T acc[kMb][kNb][kV] = {};
      for (int r = 0; r < rv; r += kV)
        for (int i = 0; i < kMb; ++i)
          for (int j = 0; j < kNb; ++j)
#pragma omp simd
            for (int v = 0; v < kV; ++v) acc[i][j][v] += a[i][r + v] * b[j][r + v];
      for (int i = 0; i < kMb && mb * kMb + i < M; ++i)
        for (int j = 0; j < kNb && nb * kNb + j < N; ++j) {
          T s = 0;
          for (int v = 0; v < kV; ++v) s += acc[i][j][v];
          for (int r = rv; r < R; ++r) s += a[i][r] * b[j][r];
          C[static_cast<std::size_t>(mb * kMb + i) * ldc + nb * kNb + j] += s;
        }
    }
  }
}

}  // namespace

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> input,
                    std::span<const T> weight, std::span<const T> bias,
                    std::span<T> output) {
  const int pixels = g.out_height() * g.out_width();
  const int patch = g.patch_size();
  for (int co = 0; co < g.out_channels; ++co) {
    T* out = output.data() + static_cast<std::size_t>(co) * pixels;
    std::fill(out, out + pixels, bias.empty() ? T(0) : bias[co]);
  }
  const T* w = weight.data();
  auto w_at = [w, patch](int co, int k) { return w[static_cast<std::size_t>(co) * patch + k]; };
  if (is_pointwise(g)) {
    gemm_acc<T>(g.out_channels, pixels, patch, w_at, input.data(), pixels, output.data(), pixels);
    return;
  }
  const int ow = g.out_width(), rows = band_rows<T>(g);
  std::vector<T> col(static_cast<std::size_t>(patch) * rows * ow);
  for (int y0 = 0; y0 < g.out_height(); y0 += rows) {
    const int y1 = std::min(g.out_height(), y0 + rows), band = (y1 - y0) * ow;
    im2col(g, input.data(), y0, y1, col.data());
    gemm_acc<T>(g.out_channels, band, patch, w_at, col.data(), band, output.data() + y0 * ow, pixels);
  }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, std::span<const T> input,
                     std::span<const T> weight, std::span<const T> grad_output,
                     std::span<T> grad_input, std::span<T> grad_weight,
                     std::span<T> grad_bias) {
  const int pixels = g.out_height() * g.out_width();
  const int patch = g.patch_size();
  const int cout = g.out_channels;
  const bool pointwise = is_pointwise(g);
  const T* go = grad_output.data();
  const T* w = weight.data();

  if (!grad_bias.empty()) {
#pragma omp parallel for schedule(static)
    for (int co = 0; co < cout; ++co) {
      const T* row = go + static_cast<std::size_t>(co) * pixels;
      T s = 0;
#pragma omp simd reduction(+ : s)
      for (int p = 0; p < pixels; ++p) s += row[p];
      grad_bias[co] += s;
    }
  }

  auto w_t = [w, patch](int k, int co) { return w[static_cast<std::size_t>(co) * patch + k]; };

  if (pointwise) {
    const T* x = input.data();
    if (!grad_weight.empty())
      gemm_nt_acc<T>(cout, patch, pixels, go, pixels, x, pixels, grad_weight.data(), patch);
    if (!grad_input.empty()) gemm_acc<T>(patch, pixels, cout, w_t, go, pixels, grad_input.data(), pixels);
  } else {
    const int ow = g.out_width(), rows = band_rows<T>(g);
    std::vector<T> col(static_cast<std::size_t>(patch) * rows * ow);
    for (int y0 = 0; y0 < g.out_height(); y0 += rows) {
      const int y1 = std::min(g.out_height(), y0 + rows), band = (y1 - y0) * ow;
      if (!grad_weight.empty()) {
        im2col(g, input.data(), y0, y1, col.data());
        gemm_nt_acc<T>(cout, patch, band, go + y0 * ow, pixels, col.data(), band, grad_weight.data(), patch);
      }
      if (!grad_input.empty()) {
        std::fill(col.begin(), col.begin() + static_cast<std::size_t>(patch) * band, T(0));
        // go rows of this band are strided by `pixels` across channels.
        std::vector<T> go_band(static_cast<std::size_t>(cout) * band);
        for (int co = 0; co < cout; ++co)
          std::copy_n(go + static_cast<std::size_t>(co) * pixels + y0 * ow, band,
                      go_band.data() + static_cast<std::size_t>(co) * band);
        gemm_acc<T>(patch, band, cout, w_t, go_band.data(), band, col.data(), band);
        col2im_add(g, col.data(), y0, y1, grad_input.data());
      }
    }
  }
}

template <typename T>
void upsample_bilinear_forward(int channels, int height, int width, int factor,
                               std::span<const T> input, std::span<T> output) {
  const int oh = height * factor;
  const int ow = width * factor;
  std::vector<BilinearTap> xs(ow);
  for (int x = 0; x < ow; ++x) xs[x] = bilinear_tap(x, factor, width);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    const T* src = input.data() + static_cast<std::size_t>(c) * height * width;
    T* dst = output.data() + static_cast<std::size_t>(c) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      const BilinearTap ty = bilinear_tap(y, factor, height);
      const T* r0 = src + ty.lo * width;
      const T* r1 = src + ty.hi * width;
      for (int x = 0; x < ow; ++x) {
        const BilinearTap& tx = xs[x];
        const T top = r0[tx.lo] * (T(1) - static_cast<T>(tx.w_hi)) + r0[tx.hi] * static_cast<T>(tx.w_hi);
        const T bot = r1[tx.lo] * (T(1) - static_cast<T>(tx.w_hi)) + r1[tx.hi] * static_cast<T>(tx.w_hi);
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
  std::vector<BilinearTap> xs(ow);
  for (int x = 0; x < ow; ++x) xs[x] = bilinear_tap(x, factor, width);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    const T* g = grad_output.data() + static_cast<std::size_t>(c) * oh * ow;
    T* gi = grad_input.data() + static_cast<std::size_t>(c) * height * width;
    for (int y = 0; y < oh; ++y) {
      const BilinearTap ty = bilinear_tap(y, factor, height);
      T* r0 = gi + ty.lo * width;
      T* r1 = gi + ty.hi * width;
      for (int x = 0; x < ow; ++x) {
        const BilinearTap& tx = xs[x];
        const T v = g[y * ow + x];
        const T top = v * (T(1) - static_cast<T>(ty.w_hi));
        const T bot = v * static_cast<T>(ty.w_hi);
        r0[tx.lo] += top * (T(1) - static_cast<T>(tx.w_hi));
        r0[tx.hi] += top * static_cast<T>(tx.w_hi);
        r1[tx.lo] += bot * (T(1) - static_cast<T>(tx.w_hi));
        r1[tx.hi] += bot * static_cast<T>(tx.w_hi);
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

}  // namespace teamemb::kernels::parallel
