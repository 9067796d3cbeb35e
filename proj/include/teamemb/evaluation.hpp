#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "teamemb/image.hpp"
#include "teamemb/scene.hpp"

namespace teamemb {

struct EvalCounts {
  std::int64_t miss = 0;
  std::int64_t correct = 0;
  std::int64_t error = 0;
  std::int64_t excluded = 0;  // players with an empty evaluation pixel set
  EvalCounts& operator+=(const EvalCounts& o);
  std::int64_t scored() const { return miss + correct + error; }
  friend bool operator==(const EvalCounts&, const EvalCounts&) = default;
};

enum class MatchStatus { kMissed, kDetected, kExcluded };

struct MatchResult {
  MatchStatus status = MatchStatus::kMissed;
  int label = 0;  // occupancy label of a detected player; 0 if none
};

// Detected iff strictly more than half of `pixels` lie in `predicted`; the
// label is then the most frequent non-zero occupancy label over those pixels
// (the smaller label on a tie). An empty pixel set is excluded.
MatchResult match_player(const LabelMap& predicted, const LabelMap& occupancy,
                         const std::vector<Pixel>& pixels);

struct ImageScore {
  EvalCounts counts;
  bool swapped = false;  // label 1 -> team B, 2 -> team A
  std::int64_t correct_identity = 0;
  std::int64_t correct_swapped = 0;
};

// Counts for one image after choosing the label -> team correspondence (of
// the two possible) with more correct players; the identity wins ties.
ImageScore score_image(const std::vector<MatchResult>& matches, const std::vector<Team>& truth);

// Adds one match under a fixed correspondence.
EvalCounts accumulate(EvalCounts counts, const MatchResult& match, Team truth, bool swapped = false);

struct Metrics {
  double r_miss = 0;
  std::optional<double> r_cta;  // absent when nothing was detected
};

// Throws std::invalid_argument when no player was scored.
Metrics compute_metrics(const EvalCounts& counts);

// Per-player matches for a predicted mask and occupancy map of a full scene,
// evaluated on the axis-filtered ground-truth instance pixels.
std::vector<MatchResult> match_scene(const Scene& scene, const LabelMap& predicted,
                                     const LabelMap& occupancy);

enum class FoldMode { kGame, kArena };

struct Fold {
  std::vector<int> train, val, test;  // scene indices
};

struct FoldSplit {
  FoldMode mode = FoldMode::kGame;
  std::vector<std::vector<int>> folds;  // test set of each iteration
  std::vector<Fold> iterations;
};

// Groups go to folds largest first, each to the currently smallest fold.
// Iteration i tests fold i and validates on fold i + 1 (mod K); with K = 2
// there is no third fold, so validation reuses the training fold.
FoldSplit kfold_split(const std::vector<Scene>& corpus, int k, FoldMode mode);
FoldSplit kfold_split(const std::vector<std::string>& group_ids, int k, FoldMode mode);

struct FoldMetrics {
  int fold = 0;
  EvalCounts counts;
  Metrics metrics;
};

struct MetricsReport {
  std::string method;
  std::vector<FoldMetrics> folds;
  double mean_r_miss = 0, std_r_miss = 0;
  std::optional<double> mean_r_cta, std_r_cta;  // over folds where R_CTA is defined
};

// Population standard deviation over folds.
MetricsReport summarize(const std::string& method, const std::vector<FoldMetrics>& folds);

// One row per fold and a summary row; header lines start with '#'.
void write_report_csv(std::ostream& out, const std::vector<MetricsReport>& reports,
                      const std::vector<std::string>& header);
void write_report_text(std::ostream& out, const std::vector<MetricsReport>& reports,
                       const std::vector<std::string>& header);

// Mean over teams and images of per-team IoU between predicted occupancy and
// reference team masks, with the better label correspondence per image.
// Accumulates into `sum` and `count` so callers can average over a set.
void accumulate_team_iou(const LabelMap& occupancy, const LabelMap& reference, double& sum,
                         int& count);

}  // namespace teamemb
