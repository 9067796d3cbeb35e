#pragma once

#include <random>

#include "teamemb/losses.hpp"
#include "teamemb/ops.hpp"

namespace teamemb::test_support {

template <typename T>
BasicTensor<T> uniform(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  BasicTensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (T& v : t.data()) v = static_cast<T>(u(rng));
  return t;
}

inline losses::TeamPixelSets random_sets(int h, int w, std::mt19937_64& rng) {
  losses::TeamPixelSets s;
  std::uniform_int_distribution<int> pick(0, 2);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int k = pick(rng);
      if (k > 0) s.teams[k - 1].push_back({y, x});
    }
  return s;
}

// Random targets matching the output pyramid of a network on an h x w input.
template <typename T>
losses::LossTargets<T> random_targets(int fine_h, int fine_w, std::mt19937_64& rng) {
  losses::LossTargets<T> tg;
  for (int s = 0; s < 3; ++s) {
    const int f = 1 << s;
    tg.seg[s] = uniform<T>({1, fine_h / f, fine_w / f}, rng, 0, 1);
  }
  tg.teams = random_sets(fine_h, fine_w, rng);
  return tg;
}

// Two-layer network: 3x3 conv + ReLU, then a 1x1 head. The fine outputs stay
// at input resolution; the mid and coarse heads are average-pooled logits.
template <typename T>
struct ToyNet {
  std::vector<BasicVar<T>> params;
  int dim;

  ToyNet(int hidden, int d, std::mt19937_64& rng) : dim(d) {
    params.push_back(BasicVar<T>::parameter(uniform<T>({hidden, 3, 3, 3}, rng, -0.5, 0.5)));
    params.push_back(BasicVar<T>::parameter(uniform<T>({hidden}, rng, -0.1, 0.1)));
    params.push_back(BasicVar<T>::parameter(uniform<T>({1 + d, hidden, 1, 1}, rng, -0.5, 0.5)));
    params.push_back(BasicVar<T>::parameter(uniform<T>({1 + d}, rng, -0.1, 0.1)));
  }

  NetOutputs<T> forward(const BasicTensor<T>& image) const {
    const BasicVar<T> x = BasicVar<T>::constant(image);
    const BasicVar<T> h = ops::relu(ops::conv2d(x, params[0], params[1], 1, 1));
    const BasicVar<T> head = ops::conv2d(h, params[2], params[3], 1, 0);
    NetOutputs<T> out;
    out.fine_logits = ops::slice_channels(head, 0, 1);
    out.embedding = ops::slice_channels(head, 1, 1 + dim);
    out.seg[kFine] = ops::sigmoid(out.fine_logits);
    out.seg[kMid] = ops::sigmoid(ops::avg_pool(out.fine_logits, 2));
    out.seg[kCoarse] = ops::sigmoid(ops::avg_pool(out.fine_logits, 4));
    return out;
  }
};

}  // namespace teamemb::test_support
