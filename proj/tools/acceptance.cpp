// One PASS/FAIL line per acceptance criterion. The default run is sized for
// CI; --full runs the complete cross-game experiment for criterion 6.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "teamemb/baseline.hpp"
#include "teamemb/clustering.hpp"
#include "teamemb/color.hpp"
#include "teamemb/evaluation.hpp"
#include "teamemb/experiment.hpp"
#include "teamemb/losses.hpp"
#include "teamemb/optim.hpp"
#include "teamemb/synth.hpp"
#include "teamemb/verification.hpp"

using namespace teamemb;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

TensorD random_tensor(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  TensorD t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.data()) v = u(rng);
  return t;
}

losses::TeamPixelSets random_sets(int h, int w, std::mt19937_64& rng) {
  losses::TeamPixelSets s;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (const int k = static_cast<int>(rng() % 3)) s.teams[k - 1].push_back({y, x});
  return s;
}

double pull_of(const TensorD& e, const losses::TeamPixelSets& s) {
  return losses::pull_loss(BasicVar<double>::constant(e), s).loss.value()[0];
}

double push_of(const TensorD& e, const losses::TeamPixelSets& s) {
  const auto v = BasicVar<double>::constant(e);
  return losses::push_loss(v, s, losses::pull_loss(v, s).centroids).value()[0];
}

bool same_partition(const LabelMap& a, const LabelMap& b) {
  for (int swap = 0; swap < 2; ++swap) {
    bool ok = a.data.size() == b.data.size();
    for (std::size_t i = 0; i < a.data.size() && ok; ++i) {
      const int v = swap && b.data[i] ? 3 - b.data[i] : b.data[i];
      ok = a.data[i] == v;
    }
    if (ok) return true;
  }
  return false;
}

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto entries = run_gradcheck_suite(2024);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Outcome o{secs < 60, ""};
  double worst = 0;
  for (const auto& e : entries) {
    o.ok = o.ok && e.ok;
    worst = std::max(worst, e.max_rel_error / e.tolerance);
    if (!e.ok) o.detail += e.name + " failed; ";
  }
  o.detail += fmt("%.0f checks, worst error %.2g of tolerance, %.1f s", static_cast<double>(entries.size()), worst, secs);
  return o;
}

Outcome loss_examples() {
  using losses::TeamPixelSets;
  const auto near = [](double a, double b) { return std::abs(a - b) <= 1e-6; };
  const Tensor diag({1, 2, 2}, {1, 0, 0, 1});
  const double s0 = losses::seg_loss(Var::constant(diag), diag).value()[0];
  const double s1 = losses::seg_loss(Var::constant(Tensor({1, 3, 3}, 0.0f)), Tensor({1, 3, 3}, 1.0f)).value()[0];
  const double s2 =
      losses::seg_loss(Var::constant(Tensor({1, 2, 2}, 0.5f)), Tensor({1, 2, 2}, {1, 0, 0, 0})).value()[0];

  TeamPixelSets one;
  one.teams[0] = {{0, 0}, {1, 1}};
  const double pull = losses::pull_loss(Var::constant(Tensor({1, 2, 2}, {0, 7, 7, 2})), one).loss.value()[0];

  TeamPixelSets two;
  two.teams[0] = {{0, 0}, {0, 1}, {3, 3}};
  two.teams[1] = {{2, 2}, {1, 3}};
  const Var flat = Var::constant(Tensor({4, 4, 4}, 0.3f));
  const double push = losses::push_loss(flat, two, losses::pull_loss(flat, two).centroids).value()[0];

  losses::LossComponents c;
  c.seg_fine = 0.1, c.seg_mid = 0.2, c.seg_coarse = 0.3, c.pull = 0.05, c.push = 0.04;
  const double total = losses::weighted_total(c, losses::LossWeights{});

  const bool ok = near(s0, 0) && near(s1, 1) && near(s2, 0.25) && near(pull, 0.5) && near(push, 0.3125) &&
                  near(total, 0.66);
  return {ok, fmt("seg %.6g/%.6g/%.6g pull %.6g", s0, s1, s2, pull) + fmt(" push %.6g total %.6g", push, total)};
}

Outcome planted_clusters() {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1, 1);
  std::normal_distribution<double> normal(0, 1);
  int good = 0;
  const int trials = 500;
  for (int trial = 0; trial < trials; ++trial) {
    const int d = 1 + trial % 5, h = 10 + trial % 11, w = 10 + trial % 13;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::array<std::vector<double>, 2> mean{std::vector<double>(d), std::vector<double>(d)};
    std::vector<double> dir(d);
    double norm = 0;
    for (int c = 0; c < d; ++c) mean[0][c] = 3 * u(rng), dir[c] = normal(rng), norm += dir[c] * dir[c];
    const double sep = 2.0 + 2.0 * (u(rng) + 1);  // squared distance >= 4
    for (int c = 0; c < d; ++c) mean[1][c] = mean[0][c] + sep * dir[c] / std::sqrt(norm);

    Tensor seg({1, h, w}), emb({d, h, w});
    std::vector<std::size_t> order(plane);
    for (std::size_t i = 0; i < plane; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    const int count = std::uniform_int_distribution<int>(2, std::min<int>(200, static_cast<int>(plane)))(rng);
    for (int k = 0; k < count; ++k) {
      const std::size_t i = order[k];
      const int team = k < 2 ? k : static_cast<int>(rng() % 2);
      seg[i] = 0.9f;
      std::vector<double> off(d);
      double r = 0;
      for (double& v : off) v = normal(rng), r += v * v;
      const double radius = 0.3 * std::pow((u(rng) + 1) / 2, 1.0 / d) / std::sqrt(r);
      for (int c = 0; c < d; ++c) emb[c * plane + i] = static_cast<float>(mean[team][c] + off[c] * radius);
    }
    // Oracle: nearest of the two true means.
    LabelMap truth(h, w);
    for (std::size_t i = 0; i < plane; ++i) {
      if (seg[i] <= 0.5f) continue;
      double dist[2] = {0, 0};
      for (int n = 0; n < 2; ++n)
        for (int c = 0; c < d; ++c) dist[n] += std::pow(emb[c * plane + i] - mean[n][c], 2);
      truth.data[i] = dist[1] < dist[0] ? 2 : 1;
    }
    good += same_partition(cluster_teams(seg, emb).occupancy, truth);
  }
  return {good == trials, fmt("%.0f of %.0f instances match the oracle", good, trials)};
}

Outcome poly_schedule() {
  double worst = 0;
  for (int k : {0, 50, 100, 150, 200}) {
    const double direct = 1e-3 * std::pow(1.0 - k / 200.0, 0.9);
    worst = std::max(worst, std::abs(poly_lr({1e-3, k, 200, 0.9}) - direct));
  }
  const double mid = poly_lr({1e-3, 100, 200, 0.9});
  return {worst <= 1e-9 && std::abs(mid - 5.3589e-4) < 1e-8, fmt("max deviation %.2g, lr(100) = %.5e", worst, mid)};
}

Outcome metric_formulas() {
  std::mt19937_64 rng(5);
  int good = 0;
  for (int t = 0; t < 20; ++t) {
    const std::int64_t miss = rng() % 50, corr = rng() % 50, err = rng() % 50 + (miss + corr == 0);
    const Metrics m = compute_metrics({miss, corr, err, 0});
    const double r_miss = static_cast<double>(miss) / static_cast<double>(miss + corr + err);
    const bool cta_ok = corr + err == 0 ? !m.r_cta
                                        : m.r_cta && *m.r_cta == static_cast<double>(corr) / static_cast<double>(corr + err);
    good += m.r_miss == r_miss && cta_ok;
  }
  return {good == 20, fmt("%.0f of 20 triples exact", good)};
}

Outcome experiment(bool full) {
  ExperimentConfig cfg;
  if (!full) {
    cfg.corpus.scenes = 20;
    cfg.folds = 2;
    cfg.train.epochs = 3;
  }
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentReport a = run_experiment(cfg, [&](const std::string& line) {
    if (full) std::fprintf(stderr, "%s\n", line.c_str());
  });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream csv;
  write_report_csv(csv, a.all(), a.header);
  const bool formed = a.embedding.folds.size() == static_cast<std::size_t>(cfg.folds) &&
                      a.baseline.folds.size() == a.embedding.folds.size() && a.embedding_low && a.baseline_low;
  if (!full) {
    const ExperimentReport b = run_experiment(cfg);
    std::ostringstream again;
    write_report_csv(again, b.all(), b.header);
    return {formed && csv.str() == again.str(),
            fmt("smoke mode, structure and determinism only; %.0f folds in %.0f s", cfg.folds, secs)};
  }
  const double cta = a.embedding.mean_r_cta.value_or(0), miss = a.embedding.mean_r_miss;
  const double low = a.embedding_low->mean_r_cta.value_or(0), base_low = a.baseline_low->mean_r_cta.value_or(1);
  const bool ok = formed && cta >= 0.85 && miss <= 0.20 && low > base_low && secs <= 3600;
  return {ok, fmt("R_CTA %.3f R_miss %.3f; low contrast R_CTA %.3f vs baseline %.3f", cta, miss, low, base_low) +
                  fmt("; %.0f min", secs / 60)};
}

Outcome baseline_red_blue() {
  SceneConfig sc;
  sc.game = GameSpec{"red_blue", {color::Rgb8{255, 0, 0}, color::Rgb8{0, 0, 255}}};
  sc.arena = ArenaSpec{"gray", {128, 128, 128}, {240, 240, 240}, {{{90, 90, 90}, {150, 150, 150}, {60, 60, 60}}}};
  EvalCounts total;
  for (std::uint64_t seed = 0; seed < 20; ++seed) total += score_baseline(generate_scene(seed, sc), seed).counts;
  const double cta = compute_metrics(total).r_cta.value_or(0);
  return {cta >= 0.95, fmt("R_CTA %.3f over %.0f players", cta, static_cast<double>(total.scored()))};
}

Outcome invariances() {
  std::mt19937_64 rng(77);
  const int trials = 100;
  std::map<std::string, int> failures;

  for (int t = 0; t < trials; ++t) {
    const auto sets = random_sets(4, 4, rng);
    const TensorD e = random_tensor({3, 4, 4}, rng, -1, 1);
    TensorD moved = e;
    for (int c = 0; c < 3; ++c) {
      const double s = 10 * (static_cast<double>(rng() % 1000) / 1000 - 0.5);
      for (int i = 0; i < 16; ++i) moved[c * 16 + i] += s;
    }
    failures["translation"] += std::abs(pull_of(e, sets) - pull_of(moved, sets)) > 1e-9 ||
                               std::abs(push_of(e, sets) - push_of(moved, sets)) > 1e-9;
    losses::TeamPixelSets swapped;
    swapped.teams = {sets.teams[1], sets.teams[0]};
    failures["team_permutation"] += std::abs(pull_of(e, sets) - pull_of(e, swapped)) > 1e-12 ||
                                    std::abs(push_of(e, sets) - push_of(e, swapped)) > 1e-12;
  }

  // Mirroring changes which seed is met first, so labels may swap but the
  // partition must not change.
  for (int t = 0; t < trials; ++t) {
    const int h = 12, w = 14;
    Tensor seg({1, h, w}), emb({2, h, w});
    std::uniform_real_distribution<double> u(-1, 1);
    const double gap = 2 + u(rng);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (rng() % 3 == 0) continue;
        seg.at(0, y, x) = 0.9f;
        const int team = static_cast<int>(rng() % 2);
        for (int c = 0; c < 2; ++c) emb.at(c, y, x) = static_cast<float>(team * gap + 0.2 * u(rng));
      }
    Tensor seg_m({1, h, w}), emb_m({2, h, w});
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        seg_m.at(0, y, x) = seg.at(0, y, w - 1 - x);
        for (int c = 0; c < 2; ++c) emb_m.at(c, y, x) = emb.at(c, y, w - 1 - x);
      }
    const LabelMap a = cluster_teams(seg, emb).occupancy, mirrored = cluster_teams(seg_m, emb_m).occupancy;
    LabelMap b(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) b.at(y, x) = mirrored.at(y, w - 1 - x);
    failures["cluster_permutation"] += !same_partition(a, b);
  }

  SceneConfig sc;
  for (int t = 0; t < trials; ++t) {
    const Scene s = generate_scene(derive_seed(91, 0, static_cast<std::uint64_t>(t)), sc);
    const int h = s.image.height, w = s.image.width;
    const SceneMasks masks = compose_scene_masks(s.players, h, w);
    LabelMap pred(h, w), occ(h, w);
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
      pred.data[i] = masks.instances.data[i] && rng() % 10 < static_cast<unsigned>(3 + t % 7);
      occ.data[i] = pred.data[i] ? static_cast<std::uint8_t>(rng() % 3) : 0;
    }
    std::vector<Team> truth;
    for (const auto& p : s.players) truth.push_back(p.team);
    const EvalCounts c = score_image(match_scene(s, pred, occ), truth).counts;
    failures["conservation"] += c.scored() + c.excluded != static_cast<std::int64_t>(s.players.size());
  }

  for (int t = 0; t < trials; ++t) {
    const int groups = 3 + t % 20, n = groups + static_cast<int>(rng() % 200);
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back("g" + std::to_string(i < groups ? i : static_cast<int>(rng() % groups)));
    const int k = 2 + static_cast<int>(rng() % (groups - 1));
    const FoldSplit split = kfold_split(ids, k, FoldMode::kGame);
    bool ok = true;
    std::map<std::string, int> owner;
    std::vector<int> seen(n, 0);
    for (int f = 0; f < k; ++f)
      for (int i : split.folds[f]) {
        ++seen[i];
        ok = ok && owner.emplace(ids[i], f).first->second == f;
      }
    ok = ok && std::all_of(seen.begin(), seen.end(), [](int v) { return v == 1; });
    for (const Fold& it : split.iterations) {
      const std::set<int> test(it.test.begin(), it.test.end());
      for (int i : it.train) ok = ok && !test.count(i);
      for (int i : it.val) ok = ok && !test.count(i);
    }
    failures["fold_disjointness"] += !ok;
  }

  Outcome o{true, ""};
  for (const auto& [name, bad] : failures) {
    o.ok = o.ok && bad == 0;
    o.detail += name + " " + std::to_string(trials - bad) + "/" + std::to_string(trials) + " ";
  }
  o.detail.pop_back();
  return o;
}

Outcome colour_round_trip() {
  int worst = 0;
  for (int r = 0; r < 256; ++r)
    for (int g = 0; g < 256; ++g)
      for (int b = 0; b < 256; ++b) {
        const color::Rgb8 c{static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
        const color::Rgb8 back = color::lab_to_srgb8(color::lch_to_lab(color::lab_to_lch(color::srgb8_to_lab(c))));
        for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(back[i] - c[i]));
      }
  return {worst <= 1, fmt("all 16777216 colours, worst channel error %.0f/255", worst)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  bool full = false;
  std::set<int> only;
  app.add_flag("--full", full, "run the complete cross-game experiment for criterion 6");
  app.add_option("--only", only, "criteria to run (default: all)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient checks", gradients},
      {"loss worked examples", loss_examples},
      {"planted-cluster recovery", planted_clusters},
      {"poly learning-rate schedule", poly_schedule},
      {"metric formulas", metric_formulas},
      {"end-to-end experiment", [full] { return experiment(full); }},
      {"baseline on red vs blue", baseline_red_blue},
      {"invariance suite", invariances},
      {"colour round trip", colour_round_trip},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(static_cast<int>(i + 1))) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.ok;
    std::printf("%s %zu %s: %s\n", o.ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
