#include "teamemb/losses.hpp"

#include <algorithm>
#include <cmath>

#include "teamemb/ops.hpp"

namespace teamemb::losses {
namespace {

struct MapDims {
  int channels;
  int height;
  int width;
  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  std::size_t index(int c, const Pixel& p) const {
    return static_cast<std::size_t>(c) * plane() + static_cast<std::size_t>(p.y) * width + p.x;
  }
};

template <typename T>
MapDims embedding_dims(const BasicTensor<T>& t) {
  require_rank(t, 3, "embedding map");
  return {t.dim(0), t.dim(1), t.dim(2)};
}

template <typename T>
double squared_distance(const BasicTensor<T>& t, const MapDims& d, const Pixel& p,
                        const std::vector<T>& centre) {
  double s = 0.0;
  for (int c = 0; c < d.channels; ++c) {
    const double diff = static_cast<double>(t[d.index(c, p)]) - static_cast<double>(centre[c]);
    s += diff * diff;
  }
  return s;
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {seg_fine, seg_mid, seg_coarse, pull, push}) {
    if (!std::isfinite(w) || w < 0.0) {
      throw std::invalid_argument("loss weights must be finite and non-negative");
    }
  }
}

void TeamPixelSets::validate(int height, int width) const {
  std::vector<char> owner(static_cast<std::size_t>(height) * width, 0);
  for (int n = 0; n < 2; ++n) {
    for (const Pixel& p : teams[n]) {
      if (p.y < 0 || p.y >= height || p.x < 0 || p.x >= width) {
        throw DimensionError("team pixel (" + std::to_string(p.y) + "," + std::to_string(p.x) +
                             ") outside " + std::to_string(height) + "x" + std::to_string(width));
      }
      char& o = owner[static_cast<std::size_t>(p.y) * width + p.x];
      if (o != 0 && o != n + 1) throw std::invalid_argument("team pixel sets overlap");
      o = static_cast<char>(n + 1);
    }
  }
}

template <typename T>
Centroids<T> team_centroids(const BasicTensor<T>& embedding, const TeamPixelSets& sets) {
  const MapDims d = embedding_dims(embedding);
  Centroids<T> out;
  for (int n = 0; n < 2; ++n) {
    const auto& pixels = sets.teams[n];
    if (pixels.empty()) continue;
    std::vector<double> acc(d.channels, 0.0);
    for (const Pixel& p : pixels) {
      for (int c = 0; c < d.channels; ++c) acc[c] += static_cast<double>(embedding[d.index(c, p)]);
    }
    out.mean[n].resize(d.channels);
    for (int c = 0; c < d.channels; ++c) {
      out.mean[n][c] = static_cast<T>(acc[c] / static_cast<double>(pixels.size()));
    }
    out.present[n] = true;
  }
  return out;
}

template <typename T>
BasicVar<T> seg_loss(const BasicVar<T>& predicted, const BasicTensor<T>& target) {
  const BasicTensor<T>& m = predicted.value();
  if (m.shape() != target.shape()) {
    throw DimensionError("seg_loss: prediction " + shape_string(m.shape()) + " vs target " +
                         shape_string(target.shape()));
  }
  require_rank(m, 3, "seg_loss prediction");
  const double area = static_cast<double>(m.dim(1)) * m.dim(2);
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double diff = static_cast<double>(m[i]) - static_cast<double>(target[i]);
    s += diff * diff;
  }
  const T scale = static_cast<T>(2.0 / area);
  return BasicVar<T>::from_op(
      BasicTensor<T>({1}, {static_cast<T>(s / area)}), {predicted},
      [target, scale](typename BasicVar<T>::Node& self) {
        auto gi = self.parent_grad(0);
        const T go = self.value.grad()[0];
        const auto& pred = self.parent_value(0);
        for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += go * scale * (pred[i] - target[i]);
      });
}

template <typename T>
PullResult<T> pull_loss(const BasicVar<T>& embedding, const TeamPixelSets& sets) {
  const BasicTensor<T>& t = embedding.value();
  const MapDims d = embedding_dims(t);
  sets.validate(d.height, d.width);
  PullResult<T> result;
  result.centroids = team_centroids(t, sets);
  const double area = static_cast<double>(d.plane());

  double s = 0.0;
  for (int n = 0; n < 2; ++n) {
    if (!result.centroids.present[n]) continue;
    for (const Pixel& p : sets.teams[n]) s += squared_distance(t, d, p, result.centroids.mean[n]);
  }

  const T scale = static_cast<T>(2.0 / area);
  result.loss = BasicVar<T>::from_op(
      BasicTensor<T>({1}, {static_cast<T>(s / area)}), {embedding},
      [sets, d, scale, cents = result.centroids](typename BasicVar<T>::Node& self) {
        auto gi = self.parent_grad(0);
        const T go = self.value.grad()[0];
        const auto& emb = self.parent_value(0);
        // The centroid path contributes Σ_q (t_q − T_n) = 0, so only the
        // direct term remains.
        for (int n = 0; n < 2; ++n) {
          if (!cents.present[n]) continue;
          for (const Pixel& p : sets.teams[n]) {
            for (int c = 0; c < d.channels; ++c) {
              const std::size_t i = d.index(c, p);
              gi[i] += go * scale * (emb[i] - cents.mean[n][c]);
            }
          }
        }
      });
  return result;
}

template <typename T>
BasicVar<T> push_loss(const BasicVar<T>& embedding, const TeamPixelSets& sets,
                      const Centroids<T>& centroids) {
  const BasicTensor<T>& t = embedding.value();
  const MapDims d = embedding_dims(t);
  if (!(centroids.present[0] && centroids.present[1])) {
    return BasicVar<T>::from_op(BasicTensor<T>({1}, {T(0)}), {embedding},
                                [](typename BasicVar<T>::Node&) {});
  }
  for (int n = 0; n < 2; ++n) {
    if (static_cast<int>(centroids.mean[n].size()) != d.channels) {
      throw DimensionError("push_loss: centroid dimension does not match embedding channels");
    }
    if (sets.teams[n].empty()) throw std::invalid_argument("push_loss: centroid for empty team");
  }
  const double area = static_cast<double>(d.plane());

  double s = 0.0;
  for (int n = 0; n < 2; ++n) {
    const auto& other = centroids.mean[1 - n];
    for (const Pixel& p : sets.teams[n]) s += std::max(0.0, 1.0 - squared_distance(t, d, p, other));
  }

  const T scale = static_cast<T>(2.0 / area);
  return BasicVar<T>::from_op(
      BasicTensor<T>({1}, {static_cast<T>(s / area)}), {embedding},
      [sets, d, scale, centroids](typename BasicVar<T>::Node& self) {
        auto gi = self.parent_grad(0);
        const T go = self.value.grad()[0];
        const auto& emb = self.parent_value(0);
        for (int n = 0; n < 2; ++n) {
          const int o = 1 - n;
          const auto& other = centroids.mean[o];
          // Gradient with respect to the opposing centroid, spread evenly over
          // that team's pixels since T_o is their mean.
          std::vector<T> centroid_grad(d.channels, T(0));
          for (const Pixel& p : sets.teams[n]) {
            if (squared_distance(emb, d, p, other) >= 1.0) continue;
            for (int c = 0; c < d.channels; ++c) {
              const std::size_t i = d.index(c, p);
              const T diff = emb[i] - other[c];
              gi[i] -= go * scale * diff;
              centroid_grad[c] += go * scale * diff;
            }
          }
          const T inv = T(1) / static_cast<T>(sets.teams[o].size());
          for (const Pixel& q : sets.teams[o]) {
            for (int c = 0; c < d.channels; ++c) gi[d.index(c, q)] += centroid_grad[c] * inv;
          }
        }
      });
}

double weighted_total(const LossComponents& c, const LossWeights& w) {
  return w.seg_fine * c.seg_fine + w.seg_mid * c.seg_mid + w.seg_coarse * c.seg_coarse +
         w.pull * c.pull + w.push * c.push;
}

template <typename T>
TotalLoss<T> total_loss(const NetOutputs<T>& outputs, const LossTargets<T>& targets,
                        const LossWeights& weights) {
  weights.validate();
  const BasicVar<T> l_fine = seg_loss(outputs.seg[kFine], targets.seg[kFine]);
  const BasicVar<T> l_mid = seg_loss(outputs.seg[kMid], targets.seg[kMid]);
  const BasicVar<T> l_coarse = seg_loss(outputs.seg[kCoarse], targets.seg[kCoarse]);
  PullResult<T> pull = pull_loss(outputs.embedding, targets.teams);
  const BasicVar<T> l_push = push_loss(outputs.embedding, targets.teams, pull.centroids);

  TotalLoss<T> out;
  LossComponents& c = out.components;
  c.seg_fine = static_cast<double>(l_fine.value()[0]);
  c.seg_mid = static_cast<double>(l_mid.value()[0]);
  c.seg_coarse = static_cast<double>(l_coarse.value()[0]);
  c.pull = static_cast<double>(pull.loss.value()[0]);
  c.push = static_cast<double>(l_push.value()[0]);
  const std::array<std::pair<const char*, double>, 5> named{{{"L124", c.seg_fine},
                                                             {"L24", c.seg_mid},
                                                             {"L4", c.seg_coarse},
                                                             {"Lpull", c.pull},
                                                             {"Lpush", c.push}}};
  for (const auto& [name, value] : named) {
    if (!std::isfinite(value)) throw NonFiniteLoss(name);
  }

  const std::array<BasicVar<T>, 5> terms{l_fine, l_mid, l_coarse, pull.loss, l_push};
  const std::array<T, 5> w{static_cast<T>(weights.seg_fine), static_cast<T>(weights.seg_mid),
                           static_cast<T>(weights.seg_coarse), static_cast<T>(weights.pull),
                           static_cast<T>(weights.push)};
  out.total = ops::weighted_sum<T>(terms, w);
  c.total = weighted_total(c, weights);
  if (!std::isfinite(c.total)) throw NonFiniteLoss("total");
  return out;
}

#define TEAMEMB_INSTANTIATE(T)                                                               \
  template Centroids<T> team_centroids(const BasicTensor<T>&, const TeamPixelSets&);        \
  template BasicVar<T> seg_loss(const BasicVar<T>&, const BasicTensor<T>&);                 \
  template PullResult<T> pull_loss(const BasicVar<T>&, const TeamPixelSets&);               \
  template BasicVar<T> push_loss(const BasicVar<T>&, const TeamPixelSets&,                  \
                                 const Centroids<T>&);                                      \
  template TotalLoss<T> total_loss(const NetOutputs<T>&, const LossTargets<T>&,             \
                                   const LossWeights&);
TEAMEMB_INSTANTIATE(float)
TEAMEMB_INSTANTIATE(double)
#undef TEAMEMB_INSTANTIATE

}  // namespace teamemb::losses
