#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "teamemb/augment.hpp"
#include "teamemb/baseline.hpp"
#include "teamemb/evaluation.hpp"
#include "teamemb/losses.hpp"
#include "teamemb/net.hpp"
#include "teamemb/synth.hpp"

namespace teamemb {

struct TrainConfig {
  NetConfig net;
  losses::LossWeights weights;
  AugmentConfig augment;
  int epochs = 40;
  int batch_size = 1;
  double base_lr = 1e-3;
  std::uint64_t seed = 1;
};

struct EpochLog {
  int epoch = 0;
  double lr = 0;
  losses::LossComponents mean_loss;  // averaged over the epoch's samples
  double val_iou = 0;
};

struct TrainResult {
  TeamNet model;       // parameters of the best validation epoch
  int best_epoch = -1;
  double best_val_iou = -1;
  std::vector<EpochLog> history;
};

// Adam with per-epoch poly decay; the epoch with the highest validation team
// IoU wins (earliest on ties). Throws losses::NonFiniteLoss on divergence.
TrainResult train_model(const std::vector<const Scene*>& train, const std::vector<const Scene*>& val,
                        const TrainConfig& config,
                        const std::function<void(const EpochLog&)>& on_epoch = {});

// Mean per-team IoU of the clustered prediction on full scenes.
double validation_iou(const TeamNet& model, const std::vector<const Scene*>& scenes);

struct ScenePrediction {
  LabelMap mask;       // {seg > 0.5}
  LabelMap occupancy;  // clustered teams
};

ScenePrediction predict_scene(const TeamNet& model, const Scene& scene);

// Counts for one scene from the embedding pipeline or the baseline.
ImageScore score_embedding(const TeamNet& model, const Scene& scene);
ImageScore score_baseline(const Scene& scene, std::uint64_t seed);

void write_loss_csv(std::ostream& out, const std::vector<EpochLog>& history);

struct ExperimentConfig {
  CorpusConfig corpus;
  TrainConfig train;
  int folds = 10;
  FoldMode mode = FoldMode::kGame;
  bool low_contrast = false;  // train and test on the low-contrast corpus
  // Also score each fold's test scenes as re-rendered with low-contrast
  // jerseys. Same games and layout, never trained on.
  bool low_contrast_test = true;
};

struct ExperimentReport {
  MetricsReport embedding;
  MetricsReport baseline;
  std::optional<MetricsReport> embedding_low, baseline_low;
  std::vector<int> best_epochs;
  std::vector<double> val_ious;
  std::vector<std::string> header;  // seeds and settings
  std::vector<MetricsReport> all() const;
};

// Any fold whose loss turns non-finite aborts the run; the error names it.
ExperimentReport run_experiment(const ExperimentConfig& config,
                                const std::function<void(const std::string&)>& log = {});

}  // namespace teamemb
