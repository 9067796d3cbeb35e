#include "teamemb/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "teamemb/kernels.hpp"

namespace teamemb::ops {
namespace {

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

template <typename T>
T sigmoid_scalar(T v) {
  if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
  const T e = std::exp(v);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
BasicVar<T> conv2d(const BasicVar<T>& input, const BasicVar<T>& weight, const BasicVar<T>& bias, int stride, int pad) {
  const BasicTensor<T>& x = input.value();
  const BasicTensor<T>& w = weight.value();
  require_rank(x, 3, "conv2d input");
  require_rank(w, 4, "conv2d kernel");
  if (x.dim(0) != w.dim(1)) {
    throw DimensionError("conv2d: input has " + std::to_string(x.dim(0)) +
                         " channels but kernel expects " + std::to_string(w.dim(1)));
  }
  if (w.dim(2) % 2 == 0 || w.dim(3) % 2 == 0) {
    throw DimensionError("conv2d: kernel height and width must be odd");
  }
  if (stride < 1 || pad < 0) throw std::invalid_argument("conv2d: stride >= 1 and pad >= 0 required");
  if (bias.defined() && (bias.value().rank() != 1 || bias.value().dim(0) != w.dim(0))) {
    throw DimensionError("conv2d: bias length must equal output channels");
  }

  kernels::ConvGeometry g;
  g.in_channels = x.dim(0);
  g.in_height = x.dim(1);
  g.in_width = x.dim(2);
  g.out_channels = w.dim(0);
  g.kernel_h = w.dim(2);
  g.kernel_w = w.dim(3);
  g.stride = stride;
  g.pad = pad;
  if (g.out_height() < 1 || g.out_width() < 1) {
    throw DimensionError("conv2d: kernel larger than padded input " + shape_string(x.shape()));
  }

  BasicTensor<T> out = BasicTensor<T>::chw(g.out_channels, g.out_height(), g.out_width());
  std::span<const T> b = bias.defined() ? bias.value().data() : std::span<const T>{};
  kernels::parallel::conv2d_forward<T>(g, x.data(), w.data(), b, out.data());

  std::vector<BasicVar<T>> parents{input, weight};
  if (bias.defined()) parents.push_back(bias);
  const bool has_bias = bias.defined();
  return BasicVar<T>::from_op(std::move(out), std::move(parents), [g, has_bias](typename BasicVar<T>::Node& self) {
    kernels::parallel::conv2d_backward<T>(
        g, self.parent_value(0).data(), self.parent_value(1).data(), self.value.grad(),
        self.parent_grad(0), self.parent_grad(1),
        has_bias ? self.parent_grad(2) : std::span<T>{});
  });
}

template <typename T>
BasicVar<T> relu(const BasicVar<T>& x) {
  BasicTensor<T> out = x.value();
  out.drop_grad();
  for (T& v : out.data()) v = std::max(v, T(0));
  return BasicVar<T>::from_op(std::move(out), {x}, [](typename BasicVar<T>::Node& self) {
    auto gi = self.parent_grad(0);
    auto go = self.value.grad();
    auto y = self.value.data();
    for (std::size_t i = 0; i < gi.size(); ++i) {
      if (y[i] > T(0)) gi[i] += go[i];
    }
  });
}

template <typename T>
BasicVar<T> elu(const BasicVar<T>& x) {
  BasicTensor<T> out = x.value();
  out.drop_grad();
  for (T& v : out.data()) v = v > T(0) ? v : std::expm1(v);
  return BasicVar<T>::from_op(std::move(out), {x}, [](typename BasicVar<T>::Node& self) {
    auto gi = self.parent_grad(0);
    auto go = self.value.grad();
    auto y = self.value.data();
    // For x <= 0, d/dx (e^x - 1) = y + 1.
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += y[i] > T(0) ? go[i] : go[i] * (y[i] + T(1));
  });
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  BasicTensor<T> out(x.shape());
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = sigmoid_scalar<T>(src[i]);
  return out;
}

template <typename T>
BasicVar<T> sigmoid(const BasicVar<T>& x) {
  return BasicVar<T>::from_op(sigmoid(x.value()), {x}, [](typename BasicVar<T>::Node& self) {
    auto gi = self.parent_grad(0);
    auto go = self.value.grad();
    auto y = self.value.data();
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += go[i] * y[i] * (T(1) - y[i]);
  });
}

template <typename T>
BasicVar<T> add(const BasicVar<T>& a, const BasicVar<T>& b) {
  require_same_shape(a.value(), b.value(), "add");
  BasicTensor<T> out(a.value().shape());
  auto pa = a.value().data();
  auto pb = b.value().data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = pa[i] + pb[i];
  return BasicVar<T>::from_op(std::move(out), {a, b}, [](typename BasicVar<T>::Node& self) {
    auto go = self.value.grad();
    for (std::size_t p = 0; p < 2; ++p) {
      auto gi = self.parent_grad(p);
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += go[i];
    }
  });
}

template <typename T>
BasicVar<T> scale(const BasicVar<T>& x, T factor) {
  BasicTensor<T> out(x.value().shape());
  auto src = x.value().data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i] * factor;
  return BasicVar<T>::from_op(std::move(out), {x}, [factor](typename BasicVar<T>::Node& self) {
    auto gi = self.parent_grad(0);
    auto go = self.value.grad();
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += go[i] * factor;
  });
}

template <typename T>
BasicVar<T> add_channelwise(const BasicVar<T>& x, const BasicVar<T>& per_channel) {
  const BasicTensor<T>& t = x.value();
  require_rank(t, 3, "add_channelwise input");
  const BasicTensor<T>& v = per_channel.value();
  if (v.size() != static_cast<std::size_t>(t.dim(0))) {
    throw DimensionError("add_channelwise: per-channel term " + shape_string(v.shape()) +
                         " does not match " + shape_string(t.shape()));
  }
  const int channels = t.dim(0);
  const std::size_t plane = static_cast<std::size_t>(t.dim(1)) * t.dim(2);
  BasicTensor<T> out = t;
  out.drop_grad();
  for (int c = 0; c < channels; ++c) {
    T* dst = out.data().data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] += v[c];
  }
  return BasicVar<T>::from_op(std::move(out), {x, per_channel}, [channels, plane](typename BasicVar<T>::Node& self) {
    auto go = self.value.grad();
    auto gx = self.parent_grad(0);
    auto gv = self.parent_grad(1);
    for (int c = 0; c < channels; ++c) {
      T s = 0;
      for (std::size_t i = 0; i < plane; ++i) {
        const T g = go[c * plane + i];
        if (!gx.empty()) gx[c * plane + i] += g;
        s += g;
      }
      if (!gv.empty()) gv[c] += s;
    }
  });
}

template <typename T>
BasicTensor<T> upsample(const BasicTensor<T>& x, int factor, UpsampleMode mode) {
  require_rank(x, 3, "upsample input");
  if (factor < 1) throw std::invalid_argument("upsample: factor must be >= 1");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  BasicTensor<T> out = BasicTensor<T>::chw(c, h * factor, w * factor);
  if (mode == UpsampleMode::kBilinear) {
    kernels::parallel::upsample_bilinear_forward<T>(c, h, w, factor, x.data(), out.data());
  } else {
    const int ow = w * factor;
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < h * factor; ++y) {
        for (int xo = 0; xo < ow; ++xo) out.at(ch, y, xo) = x.at(ch, y / factor, xo / factor);
      }
    }
  }
  return out;
}

template <typename T>
BasicVar<T> upsample(const BasicVar<T>& x, int factor, UpsampleMode mode) {
  BasicTensor<T> out = upsample(x.value(), factor, mode);
  const int c = x.value().dim(0), h = x.value().dim(1), w = x.value().dim(2);
  return BasicVar<T>::from_op(std::move(out), {x}, [c, h, w, factor, mode](typename BasicVar<T>::Node& self) {
    auto gi = self.parent_grad(0);
    if (mode == UpsampleMode::kBilinear) {
      kernels::parallel::upsample_bilinear_backward<T>(c, h, w, factor, self.value.grad(), gi);
      return;
    }
    const BasicTensor<T>& out = self.value;
    auto go = out.grad();
    const int oh = h * factor, ow = w * factor;
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < oh; ++y) {
        for (int xo = 0; xo < ow; ++xo) {
          gi[(static_cast<std::size_t>(ch) * h + y / factor) * w + xo / factor] +=
              go[(static_cast<std::size_t>(ch) * oh + y) * ow + xo];
        }
      }
    }
  });
}

template <typename T>
BasicVar<T> avg_pool(const BasicVar<T>& x, int factor) {
  const BasicTensor<T>& t = x.value();
  require_rank(t, 3, "avg_pool input");
  if (factor < 1 || t.dim(1) % factor != 0 || t.dim(2) % factor != 0) {
    throw DimensionError("avg_pool: dims " + shape_string(t.shape()) + " not divisible by " +
                         std::to_string(factor));
  }
  const int c = t.dim(0), oh = t.dim(1) / factor, ow = t.dim(2) / factor;
  const T inv = T(1) / static_cast<T>(factor * factor);
  BasicTensor<T> out = BasicTensor<T>::chw(c, oh, ow);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < oh * factor; ++y) {
      for (int xi = 0; xi < ow * factor; ++xi) out.at(ch, y / factor, xi / factor) += t.at(ch, y, xi);
    }
  }
  for (T& v : out.data()) v *= inv;
  return BasicVar<T>::from_op(std::move(out), {x}, [c, oh, ow, factor, inv](typename BasicVar<T>::Node& self) {
    auto gi = self.parent_grad(0);
    const BasicTensor<T>& o = self.value;
    const int w = ow * factor, h = oh * factor;
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < h; ++y) {
        for (int xi = 0; xi < w; ++xi) {
          gi[(static_cast<std::size_t>(ch) * h + y) * w + xi] +=
              o.grad()[(static_cast<std::size_t>(ch) * oh + y / factor) * ow + xi / factor] * inv;
        }
      }
    }
  });
}

template <typename T>
BasicVar<T> max_pool(const BasicVar<T>& x, int factor) {
  const BasicTensor<T>& t = x.value();
  require_rank(t, 3, "max_pool input");
  if (factor < 1 || t.dim(1) % factor != 0 || t.dim(2) % factor != 0) {
    throw DimensionError("max_pool: dims " + shape_string(t.shape()) + " not divisible by " +
                         std::to_string(factor));
  }
  const int c = t.dim(0), h = t.dim(1), w = t.dim(2), oh = h / factor, ow = w / factor;
  BasicTensor<T> out = BasicTensor<T>::chw(c, oh, ow, -std::numeric_limits<T>::infinity());
  std::vector<std::size_t> argmax(out.size(), 0);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y) {
      for (int xi = 0; xi < w; ++xi) {
        const std::size_t o = (static_cast<std::size_t>(ch) * oh + y / factor) * ow + xi / factor;
        const std::size_t i = (static_cast<std::size_t>(ch) * h + y) * w + xi;
        if (t[i] > out[o]) {
          out[o] = t[i];
          argmax[o] = i;
        }
      }
    }
  }
  return BasicVar<T>::from_op(std::move(out), {x}, [argmax = std::move(argmax)](typename BasicVar<T>::Node& self) {
    auto gi = self.parent_grad(0);
    auto go = self.value.grad();
    for (std::size_t o = 0; o < go.size(); ++o) gi[argmax[o]] += go[o];
  });
}

template <typename T>
BasicVar<T> global_avg_pool(const BasicVar<T>& x) {
  const BasicTensor<T>& t = x.value();
  require_rank(t, 3, "global_avg_pool input");
  const int c = t.dim(0);
  const std::size_t plane = static_cast<std::size_t>(t.dim(1)) * t.dim(2);
  BasicTensor<T> out = BasicTensor<T>::chw(c, 1, 1);
  for (int ch = 0; ch < c; ++ch) {
    T s = 0;
    for (std::size_t i = 0; i < plane; ++i) s += t[ch * plane + i];
    out[ch] = s / static_cast<T>(plane);
  }
  return BasicVar<T>::from_op(std::move(out), {x}, [c, plane](typename BasicVar<T>::Node& self) {
    auto gi = self.parent_grad(0);
    auto go = self.value.grad();
    const T inv = T(1) / static_cast<T>(plane);
    for (int ch = 0; ch < c; ++ch) {
      for (std::size_t i = 0; i < plane; ++i) gi[ch * plane + i] += go[ch] * inv;
    }
  });
}

template <typename T>
BasicVar<T> slice_channels(const BasicVar<T>& x, int begin, int end) {
  const BasicTensor<T>& t = x.value();
  require_rank(t, 3, "slice_channels input");
  if (begin < 0 || end > t.dim(0) || begin >= end) {
    throw DimensionError("slice_channels: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") invalid for " + shape_string(t.shape()));
  }
  const std::size_t plane = static_cast<std::size_t>(t.dim(1)) * t.dim(2);
  auto src = t.data().subspan(begin * plane, (end - begin) * plane);
  BasicTensor<T> out({end - begin, t.dim(1), t.dim(2)}, std::vector<T>(src.begin(), src.end()));
  return BasicVar<T>::from_op(std::move(out), {x}, [begin, plane](typename BasicVar<T>::Node& self) {
    auto gi = self.parent_grad(0);
    auto go = self.value.grad();
    for (std::size_t i = 0; i < go.size(); ++i) gi[begin * plane + i] += go[i];
  });
}

template <typename T>
BasicVar<T> weighted_sum(std::span<const BasicVar<T>> terms, std::span<const T> weights) {
  if (terms.size() != weights.size()) throw DimensionError("weighted_sum: size mismatch");
  T total = 0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].value().size() != 1) throw DimensionError("weighted_sum: terms must be scalars");
    total += weights[i] * terms[i].value()[0];
  }
  std::vector<T> w(weights.begin(), weights.end());
  return BasicVar<T>::from_op(BasicTensor<T>({1}, {total}), std::vector<BasicVar<T>>(terms.begin(), terms.end()),
                      [w = std::move(w)](typename BasicVar<T>::Node& self) {
                        const T go = self.value.grad()[0];
                        for (std::size_t i = 0; i < w.size(); ++i) {
                          auto gi = self.parent_grad(i);
                          if (!gi.empty()) gi[0] += go * w[i];
                        }
                      });
}


#define TEAMEMB_INSTANTIATE(T)                                                                   \
  template BasicVar<T> conv2d(const BasicVar<T>&, const BasicVar<T>&, const BasicVar<T>&, int, \
                              int);                                                            \
  template BasicVar<T> relu(const BasicVar<T>&);                                               \
  template BasicVar<T> elu(const BasicVar<T>&);                                                \
  template BasicVar<T> sigmoid(const BasicVar<T>&);                                            \
  template BasicVar<T> add(const BasicVar<T>&, const BasicVar<T>&);                            \
  template BasicVar<T> scale(const BasicVar<T>&, T);                                           \
  template BasicVar<T> add_channelwise(const BasicVar<T>&, const BasicVar<T>&);                \
  template BasicVar<T> upsample(const BasicVar<T>&, int, UpsampleMode);                        \
  template BasicVar<T> avg_pool(const BasicVar<T>&, int);                                      \
  template BasicVar<T> max_pool(const BasicVar<T>&, int);                                      \
  template BasicVar<T> global_avg_pool(const BasicVar<T>&);                                    \
  template BasicVar<T> slice_channels(const BasicVar<T>&, int, int);                           \
  template BasicVar<T> weighted_sum(std::span<const BasicVar<T>>, std::span<const T>);         \
  template BasicTensor<T> upsample(const BasicTensor<T>&, int, UpsampleMode);                  \
  template BasicTensor<T> sigmoid(const BasicTensor<T>&);
TEAMEMB_INSTANTIATE(float)
TEAMEMB_INSTANTIATE(double)
#undef TEAMEMB_INSTANTIATE

}  // namespace teamemb::ops
