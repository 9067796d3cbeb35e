#include "teamemb/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "teamemb/clustering.hpp"
#include "teamemb/ops.hpp"
#include "teamemb/optim.hpp"

namespace teamemb {

ScenePrediction predict_scene(const TeamNet& model, const Scene& scene) {
  const Inference inf = infer(model, to_tensor(scene.image));
  ClusterResult c = cluster_teams(inf.seg, inf.embedding);
  return {threshold_mask(inf.seg), std::move(c.occupancy)};
}

double validation_iou(const TeamNet& model, const std::vector<const Scene*>& scenes) {
  double sum = 0;
  int count = 0;
  for (const Scene* s : scenes) {
    const ScenePrediction p = predict_scene(model, *s);
    const SceneMasks ref = compose_scene_masks(s->players, s->image.height, s->image.width);
    accumulate_team_iou(p.occupancy, ref.teams, sum, count);
  }
  return count ? sum / count : 0.0;
}

TrainResult train_model(const std::vector<const Scene*>& train, const std::vector<const Scene*>& val,
                        const TrainConfig& cfg, const std::function<void(const EpochLog&)>& on_epoch) {
  if (train.empty()) throw std::invalid_argument("train_model: empty training set");
  if (cfg.batch_size < 1 || cfg.epochs < 1) throw std::invalid_argument("train_model: bad schedule");
  cfg.weights.validate();
  TeamNet net(cfg.net);
  net.init(derive_seed(cfg.seed, 40));
  AdamState adam;
  TrainResult result{net.cast<float>(), -1, -1.0, {}};
  std::vector<std::size_t> order(train.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::mt19937_64 rng(derive_seed(cfg.seed, 41, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log;
    log.epoch = epoch;
    log.lr = poly_lr({cfg.base_lr, epoch, cfg.epochs, 0.9});
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      net.zero_grad();
      for (std::size_t j = start; j < end; ++j) {
        const Sample s = augment(*train[order[j]], cfg.augment, rng);
        const NetOutputs<float> out = net.forward(to_tensor(s.image));
        const auto loss = losses::total_loss(out, build_targets(s.masks), cfg.weights);
        ops::scale(loss.total, 1.0f / static_cast<float>(end - start)).backward();
        const double n = static_cast<double>(train.size());
        log.mean_loss.seg_fine += loss.components.seg_fine / n;
        log.mean_loss.seg_mid += loss.components.seg_mid / n;
        log.mean_loss.seg_coarse += loss.components.seg_coarse / n;
        log.mean_loss.pull += loss.components.pull / n;
        log.mean_loss.push += loss.components.push / n;
        log.mean_loss.total += loss.components.total / n;
      }
      adam_step(net.parameters(), adam, log.lr);
    }
    log.val_iou = validation_iou(net, val);
    if (log.val_iou > result.best_val_iou) {
      result.best_val_iou = log.val_iou;
      result.best_epoch = epoch;
      result.model = net.cast<float>();
    }
    result.history.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return result;
}

ImageScore score_embedding(const TeamNet& model, const Scene& scene) {
  const ScenePrediction p = predict_scene(model, scene);
  std::vector<Team> truth;
  for (const auto& pl : scene.players) truth.push_back(pl.team);
  return score_image(match_scene(scene, p.mask, p.occupancy), truth);
}

ImageScore score_baseline(const Scene& scene, std::uint64_t seed) {
  const std::vector<BaselineLabel> labels = baseline_assign(scene, seed);
  std::vector<MatchResult> matches;
  std::vector<Team> truth;
  for (std::size_t k = 0; k < scene.players.size(); ++k) {
    truth.push_back(scene.players[k].team);
    // The baseline is given ground-truth instances, so every player with
    // evaluation pixels counts as detected.
    matches.push_back(labels[k].flag == BaselineFlag::kEmpty
                          ? MatchResult{MatchStatus::kExcluded, 0}
                          : MatchResult{MatchStatus::kDetected, labels[k].label});
  }
  return score_image(matches, truth);
}

void write_loss_csv(std::ostream& out, const std::vector<EpochLog>& history) {
  out << "epoch,lr,seg_fine,seg_mid,seg_coarse,pull,push,total,val_iou\n";
  for (const EpochLog& e : history) {
    out << e.epoch << ',' << e.lr << ',' << e.mean_loss.seg_fine << ',' << e.mean_loss.seg_mid << ','
        << e.mean_loss.seg_coarse << ',' << e.mean_loss.pull << ',' << e.mean_loss.push << ','
        << e.mean_loss.total << ',' << e.val_iou << '\n';
  }
}

ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                const std::function<void(const std::string&)>& log) {
  const CorpusConfig corpus_cfg = cfg.low_contrast ? low_contrast(cfg.corpus) : cfg.corpus;
  const std::vector<Scene> corpus = generate_corpus(corpus_cfg);
  const FoldSplit split = kfold_split(corpus, cfg.folds, cfg.mode);
  const bool extra = cfg.low_contrast_test && !cfg.low_contrast;
  const std::vector<Scene> low = extra ? generate_corpus(low_contrast(cfg.corpus)) : std::vector<Scene>{};

  ExperimentReport report;
  report.header = {
      "corpus_seed=" + std::to_string(corpus_cfg.seed),
      "train_seed=" + std::to_string(cfg.train.seed),
      "scenes=" + std::to_string(corpus_cfg.scenes) + " games=" + std::to_string(corpus_cfg.games) +
          " arenas=" + std::to_string(corpus_cfg.arenas),
      "jersey_delta_e=[" + std::to_string(corpus_cfg.scene.min_delta_e) + "," +
          std::to_string(corpus_cfg.scene.max_delta_e) + "]",
      "folds=" + std::to_string(cfg.folds) + " mode=" + (cfg.mode == FoldMode::kGame ? "game" : "arena"),
      "epochs=" + std::to_string(cfg.train.epochs) + " batch=" + std::to_string(cfg.train.batch_size) +
          " lr=" + std::to_string(cfg.train.base_lr) + " dim=" + std::to_string(cfg.train.net.embedding_dim)};

  if (extra) {
    const CorpusConfig lc = low_contrast(cfg.corpus);
    report.header.push_back("low_contrast_test_delta_e=[" + std::to_string(lc.scene.min_delta_e) + "," +
                            std::to_string(lc.scene.max_delta_e) + "]");
  }

  std::vector<FoldMetrics> emb, base, emb_low, base_low;
  for (int f = 0; f < cfg.folds; ++f) {
    const Fold& fold = split.iterations[f];
    auto pick = [&](const std::vector<int>& idx) {
      std::vector<const Scene*> out;
      for (int i : idx) out.push_back(&corpus[i]);
      return out;
    };
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.train.seed, 50, static_cast<std::uint64_t>(f));
    TrainResult tr;
    try {
      tr = train_model(pick(fold.train), pick(fold.val), tc);
    } catch (const losses::NonFiniteLoss& e) {
      throw std::runtime_error("fold " + std::to_string(f) + " diverged: " + e.what());
    }
    report.best_epochs.push_back(tr.best_epoch);
    report.val_ious.push_back(tr.best_val_iou);
    EvalCounts ce, cb;
    for (int i : fold.test) {
      ce += score_embedding(tr.model, corpus[i]).counts;
      cb += score_baseline(corpus[i], derive_seed(cfg.train.seed, 60, static_cast<std::uint64_t>(i))).counts;
    }
    emb.push_back({f, ce, compute_metrics(ce)});
    base.push_back({f, cb, compute_metrics(cb)});
    std::string low_line;
    if (extra) {
      EvalCounts le, lb;
      for (int i : fold.test) {
        le += score_embedding(tr.model, low[i]).counts;
        lb += score_baseline(low[i], derive_seed(cfg.train.seed, 60, static_cast<std::uint64_t>(i))).counts;
      }
      emb_low.push_back({f, le, compute_metrics(le)});
      base_low.push_back({f, lb, compute_metrics(lb)});
      const auto cta = [](const Metrics& m) { return m.r_cta ? std::to_string(*m.r_cta) : std::string("NA"); };
      low_line = " | low contrast: embedding R_CTA " + cta(emb_low.back().metrics) + " baseline R_CTA " +
                 cta(base_low.back().metrics);
    }
    if (log) {
      const auto& m = emb.back().metrics;
      const auto& b = base.back().metrics;
      log("fold " + std::to_string(f) + ": best epoch " + std::to_string(tr.best_epoch) + " val IoU " +
          std::to_string(tr.best_val_iou) + " | embedding R_miss " + std::to_string(m.r_miss) +
          " R_CTA " + (m.r_cta ? std::to_string(*m.r_cta) : "NA") + " | baseline R_CTA " +
          (b.r_cta ? std::to_string(*b.r_cta) : "NA") + low_line);
    }
  }
  report.embedding = summarize("embedding", emb);
  report.baseline = summarize("baseline", base);
  if (extra) {
    report.embedding_low = summarize("embedding_low_contrast", emb_low);
    report.baseline_low = summarize("baseline_low_contrast", base_low);
  }
  return report;
}

std::vector<MetricsReport> ExperimentReport::all() const {
  std::vector<MetricsReport> out{embedding, baseline};
  if (embedding_low) out.push_back(*embedding_low);
  if (baseline_low) out.push_back(*baseline_low);
  return out;
}

}  // namespace teamemb
