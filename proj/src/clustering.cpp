#include "teamemb/clustering.hpp"

#include <limits>

namespace teamemb {
namespace {

struct EmbeddingView {
  const Tensor& t;
  int dim;
  std::size_t plane;

  explicit EmbeddingView(const Tensor& e)
      : t(e), dim(e.dim(0)), plane(static_cast<std::size_t>(e.dim(1)) * e.dim(2)) {}

  double sq_dist(std::size_t a, std::size_t b) const {
    double s = 0.0;
    for (int c = 0; c < dim; ++c) {
      const double d = static_cast<double>(t[c * plane + a]) - t[c * plane + b];
      s += d * d;
    }
    return s;
  }
  double sq_dist(std::size_t a, const std::vector<double>& v) const {
    double s = 0.0;
    for (int c = 0; c < dim; ++c) {
      const double d = static_cast<double>(t[c * plane + a]) - v[c];
      s += d * d;
    }
    return s;
  }
  std::vector<double> vec(std::size_t a) const {
    std::vector<double> v(dim);
    for (int c = 0; c < dim; ++c) v[c] = t[c * plane + a];
    return v;
  }
};

void check_aligned(const LabelMap& mask, const Tensor& embedding) {
  require_rank(embedding, 3, "embedding map");
  if (embedding.dim(1) != mask.height || embedding.dim(2) != mask.width) {
    throw DimensionError("embedding " + shape_string(embedding.shape()) + " does not match mask " +
                         std::to_string(mask.height) + "x" + std::to_string(mask.width));
  }
}

std::vector<Pixel> ball(const EmbeddingView& e, const std::vector<std::size_t>& remaining,
                        const std::vector<double>& centre, int width) {
  std::vector<Pixel> out;
  for (std::size_t i : remaining) {
    if (e.sq_dist(i, centre) < 1.0) out.push_back({static_cast<int>(i / width), static_cast<int>(i % width)});
  }
  return out;
}

}  // namespace

VarianceMap neighborhood_variance(const Tensor& embedding, const LabelMap& mask) {
  check_aligned(mask, embedding);
  const EmbeddingView e(embedding);
  VarianceMap v{mask.height, mask.width,
                std::vector<double>(e.plane, std::numeric_limits<double>::quiet_NaN())};
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(y, x)) continue;
      const std::size_t i = static_cast<std::size_t>(y) * mask.width + x;
      double sum = 0.0;
      int n = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dy == 0 && dx == 0) || !mask.contains(y + dy, x + dx) || !mask.at(y + dy, x + dx)) {
            continue;
          }
          sum += e.sq_dist(i, i + dy * static_cast<std::ptrdiff_t>(mask.width) + dx);
          ++n;
        }
      v.values[i] = n > 0 ? sum / n : std::numeric_limits<double>::infinity();
    }
  return v;
}

LabelMap threshold_mask(const Tensor& seg) {
  require_rank(seg, 3, "segmentation map");
  if (seg.dim(0) != 1) throw DimensionError("segmentation map must have one channel");
  LabelMap m(seg.dim(1), seg.dim(2));
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = seg[i] > 0.5f ? 1 : 0;
  return m;
}

LabelMap assign_to_centroids(const LabelMap& mask, const Tensor& embedding,
                             const std::vector<std::vector<double>>& centroids) {
  check_aligned(mask, embedding);
  const EmbeddingView e(embedding);
  LabelMap out(mask.height, mask.width);
  if (centroids.empty()) return out;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (!mask.data[i]) continue;
    std::size_t best = 0;
    double best_d = e.sq_dist(i, centroids[0]);
    for (std::size_t n = 1; n < centroids.size(); ++n) {
      const double d = e.sq_dist(i, centroids[n]);
      if (d < best_d) best = n, best_d = d;
    }
    out.data[i] = static_cast<std::uint8_t>(best + 1);
  }
  return out;
}

ClusterResult cluster_teams(const Tensor& seg, const Tensor& embedding) {
  const LabelMap mask = threshold_mask(seg);
  check_aligned(mask, embedding);
  const EmbeddingView e(embedding);
  const VarianceMap variance = neighborhood_variance(embedding, mask);
  const int width = mask.width;

  ClusterResult result;
  result.distance[0].assign(e.plane, 0.0);
  result.distance[1].assign(e.plane, 0.0);

  std::vector<std::size_t> remaining;  // row-major
  for (std::size_t i = 0; i < e.plane; ++i)
    if (mask.data[i]) remaining.push_back(i);
  const std::vector<std::size_t> all = remaining;

  while (!remaining.empty() && result.teams.size() < 2) {
    // First minimum in row-major order; with every value +inf this is the
    // first remaining pixel.
    std::size_t seed = remaining.front();
    for (std::size_t i : remaining)
      if (variance.values[i] < variance.values[seed]) seed = i;

    TeamCluster team;
    team.seed = {static_cast<int>(seed / width), static_cast<int>(seed % width)};
    team.seed_embedding = e.vec(seed);
    team.first_members = ball(e, remaining, team.seed_embedding, width);

    team.centroid.assign(e.dim, 0.0);
    for (const Pixel& p : team.first_members) {
      const std::size_t i = static_cast<std::size_t>(p.y) * width + p.x;
      for (int c = 0; c < e.dim; ++c) team.centroid[c] += embedding[c * e.plane + i];
    }
    for (double& v : team.centroid) v /= static_cast<double>(team.first_members.size());
    team.members = ball(e, remaining, team.centroid, width);
    // The mean lowers the average squared distance below 1, so the second
    // ball is never empty in exact arithmetic; guard against rounding anyway.
    if (team.members.empty()) {
      team.centroid = team.seed_embedding;
      team.members = team.first_members;
    }

    std::vector<char> taken(e.plane, 0);
    for (const Pixel& p : team.members) taken[static_cast<std::size_t>(p.y) * width + p.x] = 1;
    std::erase_if(remaining, [&](std::size_t i) { return taken[i] != 0; });

    auto& dist = result.distance[result.teams.size()];
    for (std::size_t i : all) dist[i] = e.sq_dist(i, team.centroid);
    result.teams.push_back(std::move(team));
  }

  std::vector<std::vector<double>> centroids;
  for (const auto& t : result.teams) centroids.push_back(t.centroid);
  result.occupancy = assign_to_centroids(mask, embedding, centroids);
  return result;
}

}  // namespace teamemb
