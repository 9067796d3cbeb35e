#pragma once

#include <array>
#include <vector>

#include "teamemb/image.hpp"
#include "teamemb/tensor.hpp"

namespace teamemb {

// Mean squared embedding distance from each mask pixel to its 8-connected
// mask neighbours. +inf for isolated mask pixels, NaN off the mask.
struct VarianceMap {
  int height = 0;
  int width = 0;
  std::vector<double> values;
  double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

VarianceMap neighborhood_variance(const Tensor& embedding, const LabelMap& mask);

// {m > 0.5} as a 0/1 map from a [1,H,W] probability map.
LabelMap threshold_mask(const Tensor& seg);

struct TeamCluster {
  Pixel seed;
  std::vector<double> seed_embedding;
  std::vector<Pixel> first_members;  // radius-1 ball around the seed, within R
  std::vector<double> centroid;      // mean of first_members
  std::vector<Pixel> members;        // radius-1 ball around the centroid, within R
};

struct ClusterResult {
  LabelMap occupancy;              // 0 background, 1..teams.size()
  std::vector<TeamCluster> teams;  // at most two, in discovery order
  // Squared distance to each centroid over mask pixels; 0 elsewhere or when
  // the team was not found.
  std::array<std::vector<double>, 2> distance;
};

// Greedy two-team clustering of the predicted player pixels. seg [1,H,W],
// embedding [D,H,W] at the same resolution.
ClusterResult cluster_teams(const Tensor& seg, const Tensor& embedding);

// Final step of the clustering on its own: every mask pixel gets 1 + the index
// of its nearest centroid (first wins ties), or 1 when there is one centroid.
LabelMap assign_to_centroids(const LabelMap& mask, const Tensor& embedding,
                             const std::vector<std::vector<double>>& centroids);

}  // namespace teamemb
