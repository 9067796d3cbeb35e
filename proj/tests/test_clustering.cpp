#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "teamemb/clustering.hpp"

using namespace teamemb;

namespace {

// Same labelling up to swapping 1 and 2.
bool same_partition(const LabelMap& a, const LabelMap& b) {
  if (a.data.size() != b.data.size()) return false;
  for (int swap = 0; swap < 2; ++swap) {
    bool ok = true;
    for (std::size_t i = 0; i < a.data.size() && ok; ++i) {
      std::uint8_t v = b.data[i];
      if (swap && v) v = 3 - v;
      ok = a.data[i] == v;
    }
    if (ok) return true;
  }
  return false;
}

struct Planted {
  Tensor seg;
  Tensor embedding;
  LabelMap truth;  // 0, 1, 2
  std::array<std::vector<double>, 2> means;
};

// Two clusters of embeddings: centres at squared distance >= 4, every point
// within 0.3 of its centre, at most 200 mask pixels.
Planted plant(std::mt19937_64& rng, int h, int w, int d) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::normal_distribution<double> normal(0, 1);
  Planted p{Tensor({1, h, w}), Tensor({d, h, w}), LabelMap(h, w), {}};
  for (int n = 0; n < 2; ++n) p.means[n].resize(d);
  for (int c = 0; c < d; ++c) p.means[0][c] = 3 * u(rng);
  std::vector<double> dir(d);
  double norm = 0;
  for (double& v : dir) v = normal(rng), norm += v * v;
  const double sep = 2.0 + 2.0 * (u(rng) + 1);
  for (int c = 0; c < d; ++c) p.means[1][c] = p.means[0][c] + sep * dir[c] / std::sqrt(norm);

  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<std::size_t> order(plane);
  for (std::size_t i = 0; i < plane; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  const int count = std::uniform_int_distribution<int>(2, std::min<int>(200, plane))(rng);
  const bool blobs = rng() % 2;
  for (int k = 0; k < count; ++k) {
    const std::size_t i = order[k];
    int team = k < 2 ? k : static_cast<int>(rng() % 2);
    if (blobs && k >= 2) team = static_cast<int>(i % w) < w / 2 ? 0 : 1;
    p.truth.data[i] = static_cast<std::uint8_t>(team + 1);
    p.seg[i] = 0.9f;
    std::vector<double> off(d);
    double r = 0;
    for (double& v : off) v = normal(rng), r += v * v;
    const double radius = 0.3 * std::pow((u(rng) + 1) / 2, 1.0 / d) / std::sqrt(r);
    for (int c = 0; c < d; ++c) p.embedding[c * plane + i] = static_cast<float>(p.means[team][c] + off[c] * radius);
  }
  return p;
}

LabelMap oracle_nearest(const Tensor& embedding, const LabelMap& mask,
                        const std::array<std::vector<double>, 2>& means) {
  const int d = embedding.dim(0);
  const std::size_t plane = mask.data.size();
  LabelMap out(mask.height, mask.width);
  for (std::size_t i = 0; i < plane; ++i) {
    if (!mask.data[i]) continue;
    double best[2] = {0, 0};
    for (int n = 0; n < 2; ++n)
      for (int c = 0; c < d; ++c) {
        const double diff = embedding[c * plane + i] - means[n][c];
        best[n] += diff * diff;
      }
    out.data[i] = best[1] < best[0] ? 2 : 1;
  }
  return out;
}

Tensor flip_columns(const Tensor& t) {
  Tensor out(t.shape());
  for (int c = 0; c < t.dim(0); ++c)
    for (int y = 0; y < t.dim(1); ++y)
      for (int x = 0; x < t.dim(2); ++x) out.at(c, y, x) = t.at(c, y, t.dim(2) - 1 - x);
  return out;
}

LabelMap flip_columns(const LabelMap& m) {
  LabelMap out(m.height, m.width);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) out.at(y, x) = m.at(y, m.width - 1 - x);
  return out;
}

}  // namespace

TEST(NeighborhoodVariance, ConstantFieldIsZero) {
  LabelMap mask(4, 5, 1);
  mask.at(0, 0) = 0;
  const VarianceMap v = neighborhood_variance(Tensor({3, 4, 5}, 0.7f), mask);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 5; ++x) {
      if (mask.at(y, x)) EXPECT_EQ(v.at(y, x), 0.0);
      else EXPECT_TRUE(std::isnan(v.at(y, x)));
    }
}

TEST(NeighborhoodVariance, IsolatedPixelIsInfinite) {
  LabelMap mask(5, 5);
  mask.at(2, 2) = 1;
  mask.at(0, 4) = 1;
  const VarianceMap v = neighborhood_variance(Tensor({2, 5, 5}, 1.0f), mask);
  EXPECT_TRUE(std::isinf(v.at(2, 2)));
  EXPECT_TRUE(std::isinf(v.at(0, 4)));
}

TEST(NeighborhoodVariance, CentreAmongUnitNeighbours) {
  Tensor e({1, 3, 3}, 1.0f);
  e.at(0, 1, 1) = 0.0f;
  const VarianceMap v = neighborhood_variance(e, LabelMap(3, 3, 1));
  EXPECT_DOUBLE_EQ(v.at(1, 1), 1.0);
  // A corner sees two ones at distance 0 and the centre at distance 1.
  EXPECT_DOUBLE_EQ(v.at(0, 0), 1.0 / 3.0);
}

TEST(ClusterTeams, EmptyMaskGivesBackground) {
  const ClusterResult r = cluster_teams(Tensor({1, 6, 6}, 0.2f), Tensor({2, 6, 6}, 1.0f));
  EXPECT_EQ(r.occupancy.count(0), 36u);
  EXPECT_TRUE(r.teams.empty());
}

TEST(ClusterTeams, SingleConstantBlob) {
  Tensor seg({1, 6, 6});
  Tensor emb({2, 6, 6}, 5.0f);
  for (int y = 1; y < 4; ++y)
    for (int x = 2; x < 5; ++x) {
      seg.at(0, y, x) = 0.8f;
      emb.at(0, y, x) = 0.25f;
      emb.at(1, y, x) = -1.5f;
    }
  const ClusterResult r = cluster_teams(seg, emb);
  ASSERT_EQ(r.teams.size(), 1u);
  EXPECT_DOUBLE_EQ(r.teams[0].centroid[0], 0.25);
  EXPECT_DOUBLE_EQ(r.teams[0].centroid[1], -1.5);
  EXPECT_EQ(r.occupancy.count(1), 9u);
  EXPECT_EQ(r.occupancy.count(0), 27u);
}

TEST(ClusterTeams, ThresholdIsStrict) {
  Tensor seg({1, 1, 3}, {0.5f, 0.50001f, 1.0f});
  const ClusterResult r = cluster_teams(seg, Tensor({1, 1, 3}, 0.0f));
  EXPECT_EQ(r.occupancy.at(0, 0), 0);
  EXPECT_EQ(r.occupancy.at(0, 1), 1);
}

TEST(ClusterTeams, TwoBlobsMatchNearestMeanOracle) {
  Tensor seg({1, 8, 12});
  Tensor emb({2, 8, 12});
  LabelMap truth(8, 12);
  for (int k = 0; k < 10; ++k) {
    const int y = 1 + k / 5, x = 1 + k % 5;
    seg.at(0, y, x) = seg.at(0, y + 4, x + 6) = 1.0f;
    emb.at(0, y, x) = 1.0f, emb.at(1, y, x) = 1.0f;
    emb.at(0, y + 4, x + 6) = 1.0f, emb.at(1, y + 4, x + 6) = 4.0f;  // squared distance 9
    truth.at(y, x) = 1, truth.at(y + 4, x + 6) = 2;
  }
  const ClusterResult r = cluster_teams(seg, emb);
  ASSERT_EQ(r.teams.size(), 2u);
  EXPECT_TRUE(same_partition(r.occupancy, truth));
  EXPECT_EQ(r.occupancy, oracle_nearest(emb, threshold_mask(seg), {{{1.0, 1.0}, {1.0, 4.0}}}));
  EXPECT_EQ(r.teams[0].centroid, (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(r.teams[1].centroid, (std::vector<double>{1.0, 4.0}));
}

TEST(ClusterTeams, AllIsolatedSeedsFirstRowMajorPixel) {
  Tensor seg({1, 5, 5});
  Tensor emb({1, 5, 5});
  seg.at(0, 0, 3) = seg.at(0, 2, 0) = seg.at(0, 4, 4) = 1.0f;
  emb.at(0, 0, 3) = 7.0f, emb.at(0, 2, 0) = 0.0f, emb.at(0, 4, 4) = 0.5f;
  const ClusterResult r = cluster_teams(seg, emb);
  ASSERT_EQ(r.teams.size(), 2u);
  EXPECT_EQ(r.teams[0].seed, (Pixel{0, 3}));
  EXPECT_EQ(r.teams[1].seed, (Pixel{2, 0}));
  EXPECT_DOUBLE_EQ(r.teams[1].centroid[0], 0.25);
}

TEST(ClusterTeams, ResidualPixelsGoToNearestCentroid) {
  // A pixel outside both radius-1 balls is still labelled.
  Tensor seg({1, 1, 5}, 1.0f);
  Tensor emb({1, 1, 5}, {0.0f, 0.0f, 10.0f, 10.0f, 6.0f});
  const ClusterResult r = cluster_teams(seg, emb);
  ASSERT_EQ(r.teams.size(), 2u);
  EXPECT_EQ(r.occupancy.at(0, 4), r.occupancy.at(0, 2));
  EXPECT_NE(r.occupancy.at(0, 4), 0);
}

TEST(ClusterTeams, DistanceTieGoesToFirstCentroid) {
  const LabelMap mask(1, 1, 1);
  const LabelMap out = assign_to_centroids(mask, Tensor({1, 1, 1}, {1.0f}), {{0.0}, {2.0}});
  EXPECT_EQ(out.at(0, 0), 1);
}

TEST(ClusterTeams, PlantedClustersRecovered) {
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 500; ++trial) {
    const int d = 1 + trial % 5;
    const Planted p = plant(rng, 10 + trial % 11, 10 + trial % 13, d);
    const ClusterResult r = cluster_teams(p.seg, p.embedding);
    ASSERT_TRUE(same_partition(r.occupancy, p.truth)) << "trial " << trial;
    ASSERT_TRUE(same_partition(r.occupancy, oracle_nearest(p.embedding, threshold_mask(p.seg), p.means)))
        << "trial " << trial;
  }
}

TEST(ClusteringProperties, RefinedCentroidIsFirstPassMean) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor seg({1, 9, 9});
    Tensor emb({3, 9, 9});
    for (float& v : seg.data()) v = static_cast<float>(u(rng) + 0.5);
    for (float& v : emb.data()) v = static_cast<float>(u(rng));
    const ClusterResult r = cluster_teams(seg, emb);
    for (const TeamCluster& t : r.teams) {
      ASSERT_FALSE(t.first_members.empty());
      for (int c = 0; c < 3; ++c) {
        double mean = 0;
        for (const Pixel& p : t.first_members) mean += emb.at(c, p.y, p.x);
        EXPECT_NEAR(t.centroid[c], mean / t.first_members.size(), 1e-12);
      }
    }
  }
}

TEST(ClusteringProperties, AssignmentIdempotentAndComplete) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor seg({1, 8, 10});
    Tensor emb({2, 8, 10});
    for (float& v : seg.data()) v = static_cast<float>(u(rng) / 4 + 0.5);
    for (float& v : emb.data()) v = static_cast<float>(u(rng));
    const ClusterResult r = cluster_teams(seg, emb);
    std::vector<std::vector<double>> cents;
    for (const auto& t : r.teams) cents.push_back(t.centroid);
    const LabelMap mask = threshold_mask(seg);
    EXPECT_EQ(assign_to_centroids(mask, emb, cents), r.occupancy);
    for (std::size_t i = 0; i < mask.data.size(); ++i) {
      EXPECT_EQ(mask.data[i] != 0, r.occupancy.data[i] != 0);
      EXPECT_LE(r.occupancy.data[i], r.teams.size());
    }
  }
}

TEST(ClusteringProperties, DiscoveryOrderOnlyPermutesLabels) {
  // Mirroring the image changes which seed is met first in row-major order.
  std::mt19937_64 rng(9);
  int swapped = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Planted p = plant(rng, 12, 14, 2);
    const LabelMap a = cluster_teams(p.seg, p.embedding).occupancy;
    const LabelMap b = flip_columns(cluster_teams(flip_columns(p.seg), flip_columns(p.embedding)).occupancy);
    EXPECT_TRUE(same_partition(a, b));
    swapped += a != b;
  }
  EXPECT_GT(swapped, 0);
}

TEST(ClusteringProperties, TranslationEquivariance) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor seg({1, 8, 8});
    Tensor emb({3, 8, 8});
    for (float& v : seg.data()) v = static_cast<float>(u(rng) + 0.5);
    // Values on a 1/64 grid and integer shifts keep every sum exact.
    for (float& v : emb.data()) v = static_cast<float>(std::round(96 * u(rng)) / 64);
    Tensor moved = emb;
    for (int c = 0; c < 3; ++c) {
      const float s = static_cast<float>(4 * (trial % 3) - 4 + c);
      for (int i = 0; i < 64; ++i) moved[c * 64 + i] += s;
    }
    EXPECT_EQ(cluster_teams(seg, emb).occupancy, cluster_teams(seg, moved).occupancy);
  }
}

TEST(Occupancy, PalettePngRoundTrip) {
  LabelMap m(3, 4);
  m.at(0, 1) = 1;
  m.at(2, 3) = 2;
  const auto path = std::filesystem::temp_directory_path() / "teamemb_occ.png";
  write_label_png(path, m, true);
  EXPECT_EQ(read_label_png(path), m);
  const RgbImage rgb = read_image(path);
  EXPECT_EQ(rgb.at(0, 1)[0], 255);
  EXPECT_EQ(rgb.at(2, 3)[2], 255);
  EXPECT_EQ(rgb.at(0, 0)[0] + rgb.at(0, 0)[1] + rgb.at(0, 0)[2], 0);
  m.at(1, 1) = 3;
  EXPECT_THROW(write_label_png(path, m, true), ImageError);
  std::filesystem::remove(path);
}
