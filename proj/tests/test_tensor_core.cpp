#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "teamemb/checkpoint.hpp"
#include "teamemb/gradcheck.hpp"
#include "teamemb/kernels.hpp"
#include "teamemb/ops.hpp"
#include "teamemb/optim.hpp"

using namespace teamemb;

namespace {

template <typename T>
BasicTensor<T> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  BasicTensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (T& v : t.data()) v = static_cast<T>(u(rng));
  return t;
}

// Direct quadruple loop, independent of both kernel implementations.
std::vector<double> reference_conv(const Tensor& x, const Tensor& w, int stride, int pad) {
  const int cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int oh = (h + 2 * pad - kh) / stride + 1, ow = (wd + 2 * pad - kw) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(cout) * oh * ow, 0.0);
  for (int o = 0; o < cout; ++o)
    for (int y = 0; y < oh; ++y)
      for (int xx = 0; xx < ow; ++xx) {
        double s = 0.0;
        for (int c = 0; c < cin; ++c)
          for (int i = 0; i < kh; ++i)
            for (int j = 0; j < kw; ++j) {
              const int iy = y * stride + i - pad, ix = xx * stride + j - pad;
              if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
              s += static_cast<double>(x.at(c, iy, ix)) *
                   w[((static_cast<std::size_t>(o) * cin + c) * kh + i) * kw + j];
            }
        out[(static_cast<std::size_t>(o) * oh + y) * ow + xx] = s;
      }
  return out;
}

// Scalar probe Σ r_i y_i so every output element receives a distinct weight.
template <typename T>
BasicVar<T> probe(const BasicVar<T>& y, const BasicTensor<T>& r) {
  T s = 0;
  for (std::size_t i = 0; i < r.size(); ++i) s += r[i] * y.value()[i];
  return BasicVar<T>::from_op(BasicTensor<T>({1}, {s}), {y},
                              [r](typename BasicVar<T>::Node& self) {
                                auto g = self.parent_grad(0);
                                for (std::size_t i = 0; i < g.size(); ++i)
                                  g[i] += self.value.grad()[0] * r[i];
                              });
}

}  // namespace

TEST(Conv2d, IdentityKernelReturnsInput) {
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor<float>({1, 5, 7}, rng);
  const Var out = ops::conv2d(Var::constant(x), Var::constant(Tensor({1, 1, 1, 1}, 1.0f)), Var(), 1, 0);
  ASSERT_EQ(out.shape(), x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(out.value()[i], x[i]);
}

TEST(Conv2d, ConstantFieldWithOnesKernel) {
  const float c = 0.7f;
  const Var out = ops::conv2d(Var::constant(Tensor({1, 6, 6}, c)),
                              Var::constant(Tensor({1, 1, 3, 3}, 1.0f)), Var(), 1, 0);
  ASSERT_EQ(out.shape(), (Shape{1, 4, 4}));
  for (float v : out.value().data()) EXPECT_NEAR(v, 9.0f * c, 1e-6);
}

TEST(Conv2d, MatchesBruteForceLoop) {
  std::mt19937_64 rng(7);
  const Tensor x = random_tensor<float>({1, 5, 5}, rng);
  const Tensor w = random_tensor<float>({1, 1, 3, 3}, rng);
  const auto expected = reference_conv(x, w, 1, 0);
  const Var out = ops::conv2d(Var::constant(x), Var::constant(w), Var(), 1, 0);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_LT(relative_error(out.value()[i], expected[i]), 1e-6) << i;
  }
}

TEST(Conv2d, SerialAndParallelKernelsAgreeOnStridedPaddedShapes) {
  std::mt19937_64 rng(11);
  for (int stride : {1, 2}) {
    for (int pad : {0, 1}) {
      const Tensor x = random_tensor<float>({3, 9, 8}, rng);
      const Tensor w = random_tensor<float>({4, 3, 3, 3}, rng);
      const Tensor b = random_tensor<float>({4}, rng);
      kernels::ConvGeometry g{3, 9, 8, 4, 3, 3, stride, pad};
      const std::size_t n = static_cast<std::size_t>(4) * g.out_height() * g.out_width();
      std::vector<float> a(n), p(n);
      kernels::serial::conv2d_forward<float>(g, x.data(), w.data(), b.data(), a);
      kernels::parallel::conv2d_forward<float>(g, x.data(), w.data(), b.data(), p);
      const auto ref = reference_conv(x, w, stride, pad);
      for (std::size_t i = 0; i < n; ++i) {
        const double expected = ref[i] + b[i / (g.out_height() * g.out_width())];
        EXPECT_NEAR(a[i], expected, 1e-5);
        EXPECT_NEAR(p[i], expected, 1e-5);
      }

      std::vector<float> go(n);
      for (auto& v : go) v = std::uniform_real_distribution<float>(-1, 1)(rng);
      std::vector<float> gi_s(x.size()), gw_s(w.size()), gb_s(4), gi_p(x.size()), gw_p(w.size()), gb_p(4);
      kernels::serial::conv2d_backward<float>(g, x.data(), w.data(), go, gi_s, gw_s, gb_s);
      kernels::parallel::conv2d_backward<float>(g, x.data(), w.data(), go, gi_p, gw_p, gb_p);
      for (std::size_t i = 0; i < gi_s.size(); ++i) EXPECT_NEAR(gi_s[i], gi_p[i], 1e-5);
      for (std::size_t i = 0; i < gw_s.size(); ++i) EXPECT_NEAR(gw_s[i], gw_p[i], 1e-5);
      for (std::size_t i = 0; i < gb_s.size(); ++i) EXPECT_NEAR(gb_s[i], gb_p[i], 1e-5);
    }
  }
}

TEST(Conv2d, SerialAndParallelKernelsAgreeAcrossBandsAndTiles) {
  std::mt19937_64 rng(12);
  // 16 x 3 x 3 patches over 70 columns split the output into several row
  // bands; 6 output channels and 70 columns leave partial register tiles.
  const std::vector<kernels::ConvGeometry> shapes{{16, 70, 70, 6, 3, 3, 1, 1},
                                                  {16, 70, 70, 6, 3, 3, 2, 1},
                                                  {13, 33, 35, 7, 1, 1, 1, 0}};
  for (const auto& g : shapes) {
    const Tensor x = random_tensor<float>({g.in_channels, g.in_height, g.in_width}, rng);
    const Tensor w = random_tensor<float>({g.out_channels, g.in_channels, g.kernel_h, g.kernel_w}, rng);
    const Tensor b = random_tensor<float>({g.out_channels}, rng);
    const std::size_t n = static_cast<std::size_t>(g.out_channels) * g.out_height() * g.out_width();
    std::vector<float> a(n), p(n), go(n);
    kernels::serial::conv2d_forward<float>(g, x.data(), w.data(), b.data(), a);
    kernels::parallel::conv2d_forward<float>(g, x.data(), w.data(), b.data(), p);
    for (std::size_t i = 0; i < n; ++i) ASSERT_NEAR(a[i], p[i], 1e-4) << i;
    for (auto& v : go) v = std::uniform_real_distribution<float>(-1, 1)(rng);
    std::vector<float> gi_s(x.size()), gw_s(w.size()), gb_s(b.size()), gi_p(x.size()), gw_p(w.size()),
        gb_p(b.size());
    kernels::serial::conv2d_backward<float>(g, x.data(), w.data(), go, gi_s, gw_s, gb_s);
    kernels::parallel::conv2d_backward<float>(g, x.data(), w.data(), go, gi_p, gw_p, gb_p);
    for (std::size_t i = 0; i < gi_s.size(); ++i) ASSERT_NEAR(gi_s[i], gi_p[i], 1e-4) << i;
    for (std::size_t i = 0; i < gw_s.size(); ++i) ASSERT_NEAR(gw_s[i], gw_p[i], 2e-3 * (1 + std::abs(gw_s[i]))) << i;
    for (std::size_t i = 0; i < gb_s.size(); ++i) ASSERT_NEAR(gb_s[i], gb_p[i], 2e-3 * (1 + std::abs(gb_s[i]))) << i;
  }
}

TEST(Conv2d, IsLinearInItsInput) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = random_tensor<float>({2, 6, 6}, rng);
    const Tensor y = random_tensor<float>({2, 6, 6}, rng);
    const Tensor w = random_tensor<float>({3, 2, 3, 3}, rng);
    const float a = 0.3f + 0.1f * trial, b = -1.7f;
    Tensor mix({2, 6, 6});
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * x[i] + b * y[i];
    const auto conv = [&](const Tensor& t) {
      return ops::conv2d(Var::constant(t), Var::constant(w), Var(), 1, 1).value();
    };
    const Tensor lhs = conv(mix), cx = conv(x), cy = conv(y);
    for (std::size_t i = 0; i < lhs.size(); ++i) {
      const double rhs = a * cx[i] + b * cy[i];
      EXPECT_LE(std::abs(lhs[i] - rhs), 1e-5 * std::max(1.0, std::abs(rhs)));
    }
  }
}

TEST(Conv2d, RejectsChannelMismatchAndEvenKernels) {
  EXPECT_THROW(ops::conv2d(Var::constant(Tensor({2, 4, 4})), Var::constant(Tensor({1, 3, 3, 3})),
                           Var(), 1, 0),
               DimensionError);
  EXPECT_THROW(ops::conv2d(Var::constant(Tensor({1, 4, 4})), Var::constant(Tensor({1, 1, 2, 2})),
                           Var(), 1, 0),
               DimensionError);
}

TEST(Upsample, ConstantMapStaysConstant) {
  for (auto mode : {ops::UpsampleMode::kBilinear, ops::UpsampleMode::kNearest}) {
    for (int f : {1, 2, 3, 4}) {
      const Tensor out = ops::upsample(Tensor({2, 3, 5}, 0.25f), f, mode);
      ASSERT_EQ(out.shape(), (Shape{2, 3 * f, 5 * f}));
      for (float v : out.data()) EXPECT_FLOAT_EQ(v, 0.25f);
    }
  }
}

TEST(Upsample, FactorOneIsIdentity) {
  std::mt19937_64 rng(5);
  const Tensor x = random_tensor<float>({3, 4, 6}, rng);
  for (auto mode : {ops::UpsampleMode::kBilinear, ops::UpsampleMode::kNearest}) {
    const Tensor out = ops::upsample(x, 1, mode);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(out[i], x[i]);
  }
}

TEST(Upsample, BilinearTwoByTwoMatchesHandEvaluation) {
  // Source centres sit at (i + 0.5) / 2 - 0.5 = {-0.25, 0.25, 0.75, 1.25},
  // clamped to [0, 1]; the map 2r + c is linear so interpolation is exact.
  const Tensor x({1, 2, 2}, {0, 1, 2, 3});
  const float expected[4][4] = {{0.0f, 0.25f, 0.75f, 1.0f},
                                {0.5f, 0.75f, 1.25f, 1.5f},
                                {1.5f, 1.75f, 2.25f, 2.5f},
                                {2.0f, 2.25f, 2.75f, 3.0f}};
  const Tensor out = ops::upsample(x, 2, ops::UpsampleMode::kBilinear);
  for (int y = 0; y < 4; ++y)
    for (int c = 0; c < 4; ++c) EXPECT_NEAR(out.at(0, y, c), expected[y][c], 1e-7) << y << "," << c;
}

TEST(Upsample, NearestReplicatesClosestSource) {
  const Tensor x({1, 2, 2}, {0, 1, 2, 3});
  const Tensor out = ops::upsample(x, 4, ops::UpsampleMode::kNearest);
  for (int y = 0; y < 8; ++y)
    for (int c = 0; c < 8; ++c) EXPECT_EQ(out.at(0, y, c), x.at(0, y / 4, c / 4));
}

TEST(Upsample, RejectsFactorBelowOne) {
  EXPECT_THROW(ops::upsample(Tensor({1, 2, 2}), 0, ops::UpsampleMode::kBilinear),
               std::invalid_argument);
}

TEST(Upsample, SerialAndParallelAgree) {
  std::mt19937_64 rng(9);
  const Tensor x = random_tensor<float>({3, 5, 7}, rng);
  std::vector<float> a(3 * 20 * 28), b(a.size());
  kernels::serial::upsample_bilinear_forward<float>(3, 5, 7, 4, x.data(), a);
  kernels::parallel::upsample_bilinear_forward<float>(3, 5, 7, 4, x.data(), b);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6);
}

// Every differentiable op passes central differences at eps = 1e-3.
TEST(Backward, EveryOpPassesFiniteDifferences) {
  std::mt19937_64 rng(21);
  const GradCheckOptions opts{1e-3, 0};
  // Keep ReLU/max-pool inputs away from their kinks.
  auto away_from_zero = [&](Shape s) {
    TensorD t = random_tensor<double>(std::move(s), rng, 0.1, 1.0);
    std::bernoulli_distribution sign(0.5);
    for (double& v : t.data()) v = sign(rng) ? v : -v;
    return t;
  };

  struct Case {
    const char* name;
    std::function<VarD(std::vector<VarD>&)> fn;
    std::vector<TensorD> inputs;
  };
  std::vector<Case> cases;
  cases.push_back({"conv_s1_p1",
                   [](auto& p) { return ops::conv2d(p[0], p[1], p[2], 1, 1); },
                   {random_tensor<double>({2, 5, 5}, rng), random_tensor<double>({3, 2, 3, 3}, rng),
                    random_tensor<double>({3}, rng)}});
  cases.push_back({"conv_s2_p1",
                   [](auto& p) { return ops::conv2d(p[0], p[1], p[2], 2, 1); },
                   {random_tensor<double>({2, 6, 6}, rng), random_tensor<double>({2, 2, 3, 3}, rng),
                    random_tensor<double>({2}, rng)}});
  cases.push_back({"conv_1x1", [](auto& p) { return ops::conv2d(p[0], p[1], p[2], 1, 0); },
                   {random_tensor<double>({3, 4, 4}, rng), random_tensor<double>({2, 3, 1, 1}, rng),
                    random_tensor<double>({2}, rng)}});
  cases.push_back({"relu", [](auto& p) { return ops::relu(p[0]); }, {away_from_zero({2, 3, 3})}});
  cases.push_back({"elu", [](auto& p) { return ops::elu(p[0]); },
                   {random_tensor<double>({2, 3, 3}, rng, -2, 2)}});
  cases.push_back({"sigmoid", [](auto& p) { return ops::sigmoid(p[0]); },
                   {random_tensor<double>({2, 3, 3}, rng, -3, 3)}});
  cases.push_back({"add", [](auto& p) { return ops::add(p[0], p[1]); },
                   {random_tensor<double>({2, 3, 3}, rng), random_tensor<double>({2, 3, 3}, rng)}});
  cases.push_back({"scale", [](auto& p) { return ops::scale(p[0], -2.5); },
                   {random_tensor<double>({1, 3, 3}, rng)}});
  cases.push_back({"add_channelwise", [](auto& p) { return ops::add_channelwise(p[0], p[1]); },
                   {random_tensor<double>({3, 4, 4}, rng), random_tensor<double>({3, 1, 1}, rng)}});
  cases.push_back({"upsample_bilinear",
                   [](auto& p) { return ops::upsample(p[0], 2, ops::UpsampleMode::kBilinear); },
                   {random_tensor<double>({2, 3, 4}, rng)}});
  cases.push_back({"upsample_nearest",
                   [](auto& p) { return ops::upsample(p[0], 3, ops::UpsampleMode::kNearest); },
                   {random_tensor<double>({2, 3, 2}, rng)}});
  cases.push_back({"avg_pool", [](auto& p) { return ops::avg_pool(p[0], 2); },
                   {random_tensor<double>({2, 4, 6}, rng)}});
  {
    // Distinct values at least 0.01 apart keep the argmax stable under ±eps.
    TensorD t({2, 4, 4});
    std::vector<double> vals(t.size());
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 0.01 * static_cast<double>(i);
    std::shuffle(vals.begin(), vals.end(), rng);
    std::copy(vals.begin(), vals.end(), t.data().begin());
    cases.push_back({"max_pool", [](auto& p) { return ops::max_pool(p[0], 2); }, {t}});
  }
  cases.push_back({"global_avg_pool", [](auto& p) { return ops::global_avg_pool(p[0]); },
                   {random_tensor<double>({3, 4, 5}, rng)}});
  cases.push_back({"slice_channels", [](auto& p) { return ops::slice_channels(p[0], 1, 3); },
                   {random_tensor<double>({4, 3, 3}, rng)}});
  cases.push_back({"weighted_sum",
                   [](auto& p) {
                     const std::array<VarD, 2> terms{p[0], p[1]};
                     const std::array<double, 2> w{0.4, 4.0};
                     return ops::weighted_sum<double>(terms, w);
                   },
                   {random_tensor<double>({1}, rng), random_tensor<double>({1}, rng)}});

  for (auto& c : cases) {
    std::vector<VarD> params;
    for (auto& t : c.inputs) params.push_back(VarD::parameter(t));
    const TensorD r = random_tensor<double>(c.fn(params).shape(), rng);
    const GradCheckReport report =
        grad_check<double>([&] { return probe(c.fn(params), r); }, params, opts);
    EXPECT_TRUE(report.ok) << c.name << ": " << report.failure;
    EXPECT_LT(report.max_rel_error, 1e-4) << c.name;
  }
}

TEST(GradCheck, QuadraticMatchesExactly) {
  std::mt19937_64 rng(2);
  std::vector<VarD> params{VarD::parameter(random_tensor<double>({7}, rng))};
  auto loss = [&] {
    const auto& t = params[0].value();
    double s = 0;
    for (double v : t.data()) s += v * v;
    return VarD::from_op(TensorD({1}, {s}), {params[0]}, [](VarD::Node& self) {
      auto g = self.parent_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * self.parent_value(0)[i] * self.value.grad()[0];
    });
  };
  const auto report = grad_check<double>(loss, params, {1e-3, 0});
  EXPECT_TRUE(report.ok);
  EXPECT_LT(report.max_rel_error, 1e-6);
  EXPECT_EQ(report.coordinates_checked, 7u);
}

TEST(GradCheck, ReportsNonFiniteLossWithCoordinate) {
  std::vector<VarD> params{VarD::parameter(TensorD({2}, {1.0, 0.0}))};
  auto loss = [&] {
    const double v = params[0].value()[1];
    const double out = v > 0.0 ? std::log(-1.0) : 0.0;
    return VarD::from_op(TensorD({1}, {out}), {params[0]}, [](VarD::Node&) {});
  };
  const auto report = grad_check<double>(loss, params, {1e-3, 0});
  EXPECT_FALSE(report.ok);
  EXPECT_EQ(report.worst_param, 0u);
  EXPECT_EQ(report.worst_index, 1u);
}

TEST(GradCheck, RejectsEpsOutsideRange) {
  std::vector<VarD> params{VarD::parameter(TensorD({1}))};
  auto loss = [&] { return params[0]; };
  EXPECT_THROW(grad_check<double>(loss, params, {1e-6, 0}), std::invalid_argument);
}

TEST(Adam, ZeroGradientLeavesParametersAndMomentsUntouched) {
  std::vector<Var> params{Var::parameter(Tensor({3}, {1.0f, -2.0f, 0.5f}))};
  AdamState state;
  adam_step(params, state, 1e-3);
  EXPECT_EQ(params[0].value()[0], 1.0f);
  EXPECT_EQ(params[0].value()[1], -2.0f);
  EXPECT_EQ(params[0].value()[2], 0.5f);
  for (float m : state.first_moment[0]) EXPECT_EQ(m, 0.0f);
  for (float v : state.second_moment[0]) EXPECT_EQ(v, 0.0f);
  EXPECT_EQ(state.step, 1);
}

TEST(Adam, FirstStepOnUnitGradient) {
  std::vector<Var> params{Var::parameter(Tensor({1}, {0.0f}))};
  params[0].mutable_grad()[0] = 1.0f;
  AdamState state;
  adam_step(params, state, 0.1);
  EXPECT_NEAR(params[0].value()[0], -0.1 / (1.0 + 1e-8), 1e-6);
}

TEST(Adam, ThreeStepsMatchScriptedReference) {
  // f(θ) = (θ - 3)² / 2, so g = θ - 3. Reference Adam written out in double.
  double theta_ref = 0.5, m = 0, v = 0;
  const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<Var> params{Var::parameter(Tensor({1}, {0.5f}))};
  AdamState state;
  for (int k = 1; k <= 3; ++k) {
    const double g = theta_ref - 3.0;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    theta_ref -= lr * (m / (1 - std::pow(b1, k))) / (std::sqrt(v / (1 - std::pow(b2, k))) + eps);

    params[0].zero_grad();
    params[0].mutable_grad()[0] = params[0].value()[0] - 3.0f;
    adam_step(params, state, lr);
    EXPECT_NEAR(params[0].value()[0], theta_ref, 1e-6) << "step " << k;
  }
}

TEST(Adam, RejectsMissingGradient) {
  std::vector<Var> params{Var::constant(Tensor({2}))};
  AdamState state;
  EXPECT_THROW(adam_step(params, state, 1e-3), std::invalid_argument);
}

TEST(PolyLr, EndpointsAndMidpoint) {
  TrainSchedule s{1e-3, 0, 200, 0.9};
  EXPECT_DOUBLE_EQ(poly_lr(s), 1e-3);
  s.epoch = 200;
  EXPECT_DOUBLE_EQ(poly_lr(s), 0.0);
  s.epoch = 100;
  EXPECT_NEAR(poly_lr(s), 1e-3 * std::pow(0.5, 0.9), 1e-12);
  EXPECT_NEAR(poly_lr(s), 5.3589e-4, 1e-8);
}

TEST(PolyLr, RejectsZeroEpochBudgetAndOutOfRangeEpoch) {
  EXPECT_THROW(poly_lr({1e-3, 0, 0, 0.9}), std::invalid_argument);
  EXPECT_THROW(poly_lr({1e-3, 201, 200, 0.9}), std::invalid_argument);
}

TEST(Checkpoint, RoundTripsNamesShapesAndValues) {
  std::mt19937_64 rng(4);
  std::vector<NamedTensor> tensors{{"a.weight", random_tensor<float>({2, 3, 3, 3}, rng)},
                                   {"a.bias", random_tensor<float>({2}, rng)},
                                   {"ünïcode", Tensor({1}, {-0.0f})}};
  std::stringstream buf;
  write_checkpoint(buf, tensors);
  const std::string bytes = buf.str();
  EXPECT_EQ(bytes.substr(0, 4), "TEMB");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1u);  // little-endian version
  const auto back = read_checkpoint(buf);
  ASSERT_EQ(back.size(), tensors.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].name, tensors[i].name);
    EXPECT_EQ(back[i].tensor.shape(), tensors[i].tensor.shape());
    for (std::size_t k = 0; k < back[i].tensor.size(); ++k)
      EXPECT_EQ(std::bit_cast<std::uint32_t>(back[i].tensor[k]),
                std::bit_cast<std::uint32_t>(tensors[i].tensor[k]));
  }
}

TEST(Checkpoint, RejectsBadMagicAndTruncation) {
  std::stringstream bad("TDMP\x01\0\0\0");
  EXPECT_THROW(read_checkpoint(bad), FormatError);
  std::stringstream buf;
  const std::vector<NamedTensor> one{{"w", Tensor({4}, 1.0f)}};
  write_checkpoint(buf, one);
  std::string bytes = buf.str();
  bytes.resize(bytes.size() - 3);
  std::stringstream truncated(bytes);
  EXPECT_THROW(read_checkpoint(truncated), FormatError);
}

TEST(Dump, RoundTrip) {
  std::mt19937_64 rng(8);
  const Tensor t = random_tensor<float>({5, 4, 3}, rng);
  std::stringstream buf;
  write_dump(buf, t);
  EXPECT_EQ(buf.str().substr(0, 4), "TDMP");
  const Tensor back = read_dump(buf);
  EXPECT_EQ(back.shape(), t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(back[i], t[i]);
}

TEST(Tensor, RejectsMismatchedDataLength) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<float>(3)), DimensionError);
}
