#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "support.hpp"
#include "teamemb/gradcheck.hpp"
#include "teamemb/losses.hpp"
#include "teamemb/net.hpp"

using namespace teamemb;
using teamemb::test_support::random_targets;
using teamemb::test_support::uniform;

namespace {

NetConfig small_config() {
  NetConfig c;
  c.embedding_dim = 2;
  c.resolution = 16;
  c.high_channels = 4;
  c.mid_channels = 4;
  c.low_channels = 4;
  c.fuse_channels = 4;
  return c;
}

}  // namespace

TEST(TeamNet, OutputShapesAt128) {
  TeamNet net;
  net.init(1);
  std::mt19937_64 rng(2);
  const auto out = net.forward(uniform<float>({3, 128, 128}, rng, 0, 1));
  EXPECT_EQ(out.seg[kFine].shape(), (Shape{1, 32, 32}));
  EXPECT_EQ(out.seg[kMid].shape(), (Shape{1, 16, 16}));
  EXPECT_EQ(out.seg[kCoarse].shape(), (Shape{1, 8, 8}));
  EXPECT_EQ(out.embedding.shape(), (Shape{5, 32, 32}));
  for (const auto& s : out.seg)
    for (float v : s.value().data()) {
      EXPECT_GT(v, 0.0f);
      EXPECT_LT(v, 1.0f);
    }
}

TEST(TeamNet, ZeroWeightsGiveHalfAndZero) {
  TeamNet net;
  std::mt19937_64 rng(3);
  const auto out = net.forward(uniform<float>({3, 32, 48}, rng, 0, 1));
  for (const auto& s : out.seg)
    for (float v : s.value().data()) EXPECT_EQ(v, 0.5f);
  for (float v : out.embedding.value().data()) EXPECT_EQ(v, 0.0f);
}

TEST(TeamNet, IndivisibleInputRejectedWithPadding) {
  TeamNet net;
  try {
    net.forward(Tensor({3, 40, 32}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("pad by 8 rows and 0 columns"), std::string::npos);
  }
  EXPECT_THROW(net.forward(Tensor({1, 32, 32})), DimensionError);
}

TEST(TeamNet, ConfigValidation) {
  NetConfig c;
  c.embedding_dim = 9;
  EXPECT_THROW(TeamNet{c}, std::invalid_argument);
  c.embedding_dim = 1;
  c.resolution = 100;
  EXPECT_THROW(TeamNet{c}, std::invalid_argument);
}

TEST(TeamNet, CoarseBranchSeesWholeImage) {
  // Changing one corner pixel must move the embedding at the opposite corner.
  TeamNet net;
  net.init(4);
  std::mt19937_64 rng(5);
  Tensor img = uniform<float>({3, 64, 64}, rng, 0, 1);
  const Tensor before = net.forward(img).embedding.value();
  for (int c = 0; c < 3; ++c) img.at(c, 0, 0) = 1.0f - img.at(c, 0, 0);
  const Tensor after = net.forward(img).embedding.value();
  double change = 0.0;
  for (int c = 0; c < 5; ++c) change += std::abs(after.at(c, 15, 15) - before.at(c, 15, 15));
  EXPECT_GT(change, 0.0);
}

TEST(TeamNet, GradientReachesNearlyEveryParameter) {
  TeamNet net;
  net.init(6);
  std::mt19937_64 rng(7);
  const Tensor img = uniform<float>({3, 64, 64}, rng, 0, 1);
  const auto targets = random_targets<float>(16, 16, rng);
  net.zero_grad();
  losses::total_loss(net.forward(img), targets, losses::LossWeights{}).total.backward();
  std::size_t nonzero = 0, total = 0;
  for (const Var& p : net.parameters()) {
    for (float g : p.grad()) nonzero += g != 0.0f;
    total += p.value().size();
  }
  EXPECT_GE(static_cast<double>(nonzero) / total, 0.99) << nonzero << " of " << total;
}

TEST(TeamNet, FullNetworkGradCheck) {
  TeamNetD net(small_config());
  net.init(8);
  std::mt19937_64 rng(9);
  // Check at a generic point rather than the zero-bias initialisation.
  for (auto& p : net.parameters())
    if (p.value().rank() == 1) p.mutable_value() = uniform<double>(p.shape(), rng, -0.2, 0.2);
  const TensorD img = uniform<double>({3, 16, 16}, rng, 0, 1);
  const auto targets = random_targets<double>(4, 4, rng);
  auto loss = [&] { return losses::total_loss(net.forward(img), targets, losses::LossWeights{}).total; };
  const GradCheckReport r = grad_check<double>(loss, net.parameters(), {1e-4, 0});
  EXPECT_TRUE(r.ok) << r.failure;
  EXPECT_LT(r.max_rel_error, 1e-3) << net.parameter_names()[r.worst_param] << "[" << r.worst_index << "]";
}

TEST(TeamNet, ToyNetGradCheckOn8x8) {
  std::mt19937_64 rng(10);
  test_support::ToyNet<double> toy(4, 3, rng);
  const TensorD img = uniform<double>({3, 8, 8}, rng, 0, 1);
  const auto targets = random_targets<double>(8, 8, rng);
  auto loss = [&] { return losses::total_loss(toy.forward(img), targets, losses::LossWeights{}).total; };
  const GradCheckReport r = grad_check<double>(loss, toy.params);
  EXPECT_LT(r.max_rel_error, 1e-3);
}

TEST(TeamNet, ZeroedFineBranchKeepsCoarseLossesFinite) {
  TeamNet net;
  net.init(11);
  for (std::size_t i = 0; i < net.parameters().size(); ++i) {
    const std::string& name = net.parameter_names()[i];
    if (name.starts_with("high.") || name.starts_with("fine.") || name.starts_with("fuse_fine.") ||
        name.starts_with("head.fine"))
      for (float& v : net.parameters()[i].mutable_value().data()) v = 0.0f;
  }
  std::mt19937_64 rng(12);
  const auto targets = random_targets<float>(8, 8, rng);
  const auto r = losses::total_loss(net.forward(uniform<float>({3, 32, 32}, rng, 0, 1)), targets,
                                    losses::LossWeights{});
  EXPECT_TRUE(std::isfinite(r.components.seg_mid));
  EXPECT_TRUE(std::isfinite(r.components.seg_coarse));
  EXPECT_GT(r.components.seg_mid, 0.0);
}

TEST(TeamNet, ForwardIsDeterministic) {
  TeamNet a, b;
  a.init(13);
  b.init(13);
  std::mt19937_64 rng(14);
  const Tensor img = uniform<float>({3, 32, 32}, rng, 0, 1);
  const auto oa = a.forward(img), ob = b.forward(img);
  for (std::size_t i = 0; i < oa.embedding.value().size(); ++i)
    ASSERT_EQ(oa.embedding.value()[i], ob.embedding.value()[i]);
  for (int s = 0; s < 3; ++s)
    for (std::size_t i = 0; i < oa.seg[s].value().size(); ++i)
      ASSERT_EQ(oa.seg[s].value()[i], ob.seg[s].value()[i]);
}

TEST(Infer, BlockConstantEmbeddingsAndOpenUnitSeg) {
  TeamNet net;
  net.init(15);
  std::mt19937_64 rng(16);
  const Inference r = infer(net, uniform<float>({3, 48, 32}, rng, 0, 1));
  ASSERT_EQ(r.seg.shape(), (Shape{1, 48, 32}));
  ASSERT_EQ(r.embedding.shape(), (Shape{5, 48, 32}));
  for (float v : r.seg.data()) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
  for (int c = 0; c < 5; ++c)
    for (int y = 0; y < 48; ++y)
      for (int x = 0; x < 32; ++x)
        ASSERT_EQ(r.embedding.at(c, y, x), r.embedding.at(c, y / 4 * 4, x / 4 * 4));
}

TEST(Infer, MatchesForwardThenUpsample) {
  TeamNet net;
  net.init(17);
  std::mt19937_64 rng(18);
  const Tensor img = uniform<float>({3, 32, 32}, rng, 0, 1);
  const Inference r = infer(net, img);
  const auto out = net.forward(img);
  const Tensor& logits = out.fine_logits.value();
  const Tensor& emb = out.embedding.value();
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      // Bilinear sample at the source-grid position of the output pixel centre.
      auto coord = [](int i, int n) {
        const double s = std::clamp((i + 0.5) / 4.0 - 0.5, 0.0, n - 1.0);
        const int lo = static_cast<int>(s);
        return std::tuple{lo, std::min(lo + 1, n - 1), s - lo};
      };
      const auto [y0, y1, fy] = coord(y, 8);
      const auto [x0, x1, fx] = coord(x, 8);
      const double l = (1 - fy) * ((1 - fx) * logits.at(0, y0, x0) + fx * logits.at(0, y0, x1)) +
                       fy * ((1 - fx) * logits.at(0, y1, x0) + fx * logits.at(0, y1, x1));
      EXPECT_NEAR(r.seg.at(0, y, x), 1.0 / (1.0 + std::exp(-l)), 1e-6);
      for (int c = 0; c < 5; ++c) EXPECT_EQ(r.embedding.at(c, y, x), emb.at(c, y / 4, x / 4));
    }
}

TEST(ModelFiles, SaveLoadRoundTrip) {
  NetConfig c;
  c.embedding_dim = 3;
  c.high_channels = 8;
  TeamNet net(c);
  net.init(19);
  const auto dir = std::filesystem::temp_directory_path() / "teamemb_test_net";
  std::filesystem::create_directories(dir);
  save_model(net, dir / "m.temb");
  ASSERT_TRUE(std::filesystem::exists(dir / "m.json"));
  const TeamNet back = load_model(dir / "m.temb");
  EXPECT_EQ(back.config().embedding_dim, 3);
  EXPECT_EQ(back.config().high_channels, 8);
  for (std::size_t i = 0; i < net.parameters().size(); ++i)
    for (std::size_t k = 0; k < net.parameters()[i].value().size(); ++k)
      ASSERT_EQ(back.parameters()[i].value()[k], net.parameters()[i].value()[k]);
  // A checkpoint from a different width does not load into this architecture.
  TeamNet other;
  EXPECT_THROW(other.load_state(net.state()), FormatError);
  std::filesystem::remove_all(dir);
}
