#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "teamemb/autograd.hpp"
#include "teamemb/image.hpp"
#include "teamemb/net.hpp"

namespace teamemb::losses {

struct LossWeights {
  double seg_fine = 1.0;
  double seg_mid = 0.4;
  double seg_coarse = 0.4;
  double pull = 4.0;
  double push = 4.0;

  void validate() const;
};

using teamemb::Pixel;

// Ground-truth pixels of team 1 and team 2 at the fine supervised scale.
struct TeamPixelSets {
  std::array<std::vector<Pixel>, 2> teams;

  // Disjoint and inside a height x width map, or throws.
  void validate(int height, int width) const;
};

template <typename T>
struct Centroids {
  std::array<std::vector<T>, 2> mean;
  std::array<bool, 2> present{false, false};
};

template <typename T>
struct PullResult {
  BasicVar<T> loss;
  Centroids<T> centroids;
};

// (1/HW) Σ (m̂ - m)² over a [1,H,W] map.
template <typename T>
BasicVar<T> seg_loss(const BasicVar<T>& predicted, const BasicTensor<T>& target);

// (1/HW) Σ_n Σ_{p∈M_n} ‖t_p − T_n‖², T_n the mean embedding of team n.
template <typename T>
PullResult<T> pull_loss(const BasicVar<T>& embedding, const TeamPixelSets& sets);

// (1/HW) Σ_n Σ_{p∈M_n} max(0, 1 − ‖t_p − T_{other}‖²); zero unless both teams
// are present. Gradients also flow through the opposing centroid.
template <typename T>
BasicVar<T> push_loss(const BasicVar<T>& embedding, const TeamPixelSets& sets,
                      const Centroids<T>& centroids);

template <typename T>
Centroids<T> team_centroids(const BasicTensor<T>& embedding, const TeamPixelSets& sets);

struct LossComponents {
  double seg_fine = 0.0;
  double seg_mid = 0.0;
  double seg_coarse = 0.0;
  double pull = 0.0;
  double push = 0.0;
  double total = 0.0;
};

double weighted_total(const LossComponents& c, const LossWeights& w);

template <typename T>
struct LossTargets {
  std::array<BasicTensor<T>, 3> seg;  // soft masks per supervised scale, finest first
  TeamPixelSets teams;                // at the fine scale
};

template <typename T>
struct TotalLoss {
  BasicVar<T> total;
  LossComponents components;
};

class NonFiniteLoss : public std::runtime_error {
 public:
  explicit NonFiniteLoss(const std::string& component)
      : std::runtime_error("non-finite loss component: " + component), component_(component) {}
  const std::string& component() const { return component_; }

 private:
  std::string component_;
};

template <typename T>
TotalLoss<T> total_loss(const NetOutputs<T>& outputs, const LossTargets<T>& targets,
                        const LossWeights& weights);

}  // namespace teamemb::losses
