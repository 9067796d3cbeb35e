#include "teamemb/verification.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "teamemb/gradcheck.hpp"
#include "teamemb/losses.hpp"
#include "teamemb/net.hpp"
#include "teamemb/ops.hpp"

namespace teamemb {
namespace {

using VarD = BasicVar<double>;

TensorD uniform(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  TensorD t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.data()) v = u(rng);
  return t;
}

losses::TeamPixelSets random_sets(int h, int w, std::mt19937_64& rng) {
  losses::TeamPixelSets s;
  std::uniform_int_distribution<int> pick(0, 2);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (const int k = pick(rng)) s.teams[k - 1].push_back({y, x});
  return s;
}

losses::LossTargets<double> random_targets(int h, int w, std::mt19937_64& rng) {
  losses::LossTargets<double> tg;
  for (int s = 0; s < 3; ++s) tg.seg[s] = uniform({1, h >> s, w >> s}, rng, 0, 1);
  tg.teams = random_sets(h, w, rng);
  return tg;
}

// The hinge is not differentiable at unit distance; skip draws that sit on it.
bool near_hinge(const TensorD& emb, const losses::TeamPixelSets& sets) {
  const auto c = losses::team_centroids(emb, sets);
  if (!c.present[0] || !c.present[1]) return false;
  const int d = emb.dim(0), w = emb.dim(2), plane = emb.dim(1) * w;
  for (int n = 0; n < 2; ++n)
    for (const Pixel& p : sets.teams[n]) {
      double s = 0;
      for (int k = 0; k < d; ++k) s += std::pow(emb[k * plane + p.y * w + p.x] - c.mean[1 - n][k], 2);
      if (std::abs(s - 1) < 1e-2) return true;
    }
  return false;
}

// 3x3 conv + ELU and a 1x1 head; mid and coarse outputs pool the fine logits.
struct ToyNet {
  std::vector<VarD> params;
  int dim;

  ToyNet(int hidden, int d, std::mt19937_64& rng) : dim(d) {
    params.push_back(VarD::parameter(uniform({hidden, 3, 3, 3}, rng, -0.5, 0.5)));
    params.push_back(VarD::parameter(uniform({hidden}, rng, -0.1, 0.1)));
    params.push_back(VarD::parameter(uniform({1 + d, hidden, 1, 1}, rng, -0.5, 0.5)));
    params.push_back(VarD::parameter(uniform({1 + d}, rng, -0.1, 0.1)));
  }

  NetOutputs<double> forward(const TensorD& image) const {
    const VarD h = ops::elu(ops::conv2d(VarD::constant(image), params[0], params[1], 1, 1));
    const VarD head = ops::conv2d(h, params[2], params[3], 1, 0);
    NetOutputs<double> out;
    out.fine_logits = ops::slice_channels(head, 0, 1);
    out.embedding = ops::slice_channels(head, 1, 1 + dim);
    out.seg[kFine] = ops::sigmoid(out.fine_logits);
    out.seg[kMid] = ops::sigmoid(ops::avg_pool(out.fine_logits, 2));
    out.seg[kCoarse] = ops::sigmoid(ops::avg_pool(out.fine_logits, 4));
    return out;
  }
};

void record(GradCheckEntry& e, const GradCheckReport& r) {
  e.max_rel_error = std::max(e.max_rel_error, r.ok ? r.max_rel_error : INFINITY);
  e.ok = e.max_rel_error < e.tolerance;
}

}  // namespace

std::vector<GradCheckEntry> run_gradcheck_suite(std::uint64_t seed, int loss_trials) {
  std::vector<GradCheckEntry> out{{"seg", 0, 1e-4}, {"pull", 0, 1e-4}, {"push", 0, 1e-4},
                                  {"total", 0, 1e-4}, {"toy_net_8x8", 0, 1e-3},
                                  {"team_net_16x16", 0, 1e-3}};
  std::mt19937_64 rng(seed);
  for (int done = 0; done < loss_trials;) {
    const losses::TeamPixelSets sets = random_sets(4, 4, rng);
    const TensorD emb = uniform({1 + done % 3, 4, 4}, rng, -0.6, 0.6);
    if (near_hinge(emb, sets)) continue;
    ++done;
    std::vector<VarD> e{VarD::parameter(emb)};
    record(out[1], grad_check<double>([&] { return losses::pull_loss(e[0], sets).loss; }, e));
    record(out[2], grad_check<double>(
                       [&] { return losses::push_loss(e[0], sets, losses::pull_loss(e[0], sets).centroids); },
                       e));

    std::vector<VarD> m{VarD::parameter(uniform({1, 4, 4}, rng, 0.05, 0.95))};
    const TensorD target = uniform({1, 4, 4}, rng, 0, 1);
    record(out[0], grad_check<double>([&] { return losses::seg_loss(m[0], target); }, m));

    losses::LossTargets<double> tg;
    tg.seg = {target, uniform({1, 2, 2}, rng, 0, 1), uniform({1, 1, 1}, rng, 0, 1)};
    tg.teams = sets;
    NetOutputs<double> o;
    o.seg = {VarD::parameter(uniform({1, 4, 4}, rng, 0.05, 0.95)),
             VarD::parameter(uniform({1, 2, 2}, rng, 0.05, 0.95)),
             VarD::parameter(uniform({1, 1, 1}, rng, 0.05, 0.95))};
    o.embedding = e[0];
    o.fine_logits = o.seg[0];
    std::vector<VarD> all{o.seg[0], o.seg[1], o.seg[2], o.embedding};
    record(out[3], grad_check<double>(
                       [&] { return losses::total_loss(o, tg, losses::LossWeights{}).total; }, all));
  }

  {
    ToyNet toy(4, 3, rng);
    const TensorD img = uniform({3, 8, 8}, rng, 0, 1);
    auto tg = random_targets(8, 8, rng);
    while (near_hinge(toy.forward(img).embedding.value(), tg.teams)) tg = random_targets(8, 8, rng);
    record(out[4], grad_check<double>(
                       [&] { return losses::total_loss(toy.forward(img), tg, losses::LossWeights{}).total; },
                       toy.params, {1e-4, 0}));
  }
  {
    NetConfig c;
    c.embedding_dim = 2;
    c.resolution = 16;
    c.high_channels = c.mid_channels = c.low_channels = c.fuse_channels = 4;
    TeamNetD net(c);
    net.init(seed);
    for (auto& p : net.parameters())
      if (p.value().rank() == 1) p.mutable_value() = uniform(p.shape(), rng, -0.2, 0.2);
    const TensorD img = uniform({3, 16, 16}, rng, 0, 1);
    auto tg = random_targets(4, 4, rng);
    while (near_hinge(net.forward(img).embedding.value(), tg.teams)) tg = random_targets(4, 4, rng);
    record(out[5], grad_check<double>(
                       [&] { return losses::total_loss(net.forward(img), tg, losses::LossWeights{}).total; },
                       net.parameters(), {1e-4, 0}));
  }
  return out;
}

}  // namespace teamemb
