#include "teamemb/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <stdexcept>
#include <tuple>

#include "teamemb/baseline.hpp"

namespace teamemb {

EvalCounts& EvalCounts::operator+=(const EvalCounts& o) {
  miss += o.miss;
  correct += o.correct;
  error += o.error;
  excluded += o.excluded;
  return *this;
}

MatchResult match_player(const LabelMap& predicted, const LabelMap& occupancy,
                         const std::vector<Pixel>& pixels) {
  if (pixels.empty()) return {MatchStatus::kExcluded, 0};
  std::size_t inside = 0, votes[3] = {0, 0, 0};
  for (const Pixel& p : pixels) {
    if (!predicted.at(p.y, p.x)) continue;
    ++inside;
    const int l = occupancy.at(p.y, p.x);
    if (l == 1 || l == 2) ++votes[l];
  }
  if (2 * inside <= pixels.size()) return {MatchStatus::kMissed, 0};
  int label = 0;
  if (votes[1] || votes[2]) label = votes[2] > votes[1] ? 2 : 1;
  return {MatchStatus::kDetected, label};
}

EvalCounts accumulate(EvalCounts c, const MatchResult& m, Team truth, bool swapped) {
  switch (m.status) {
    case MatchStatus::kExcluded:
      ++c.excluded;
      break;
    case MatchStatus::kMissed:
      ++c.miss;
      break;
    case MatchStatus::kDetected: {
      int label = m.label;
      if (swapped && label) label = 3 - label;
      if (label == team_label(truth)) ++c.correct;
      else ++c.error;
      break;
    }
  }
  return c;
}

ImageScore score_image(const std::vector<MatchResult>& matches, const std::vector<Team>& truth) {
  if (matches.size() != truth.size()) throw std::invalid_argument("score_image: size mismatch");
  EvalCounts id, sw;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    id = accumulate(id, matches[i], truth[i], false);
    sw = accumulate(sw, matches[i], truth[i], true);
  }
  ImageScore s;
  s.correct_identity = id.correct;
  s.correct_swapped = sw.correct;
  s.swapped = sw.correct > id.correct;
  s.counts = s.swapped ? sw : id;
  return s;
}

Metrics compute_metrics(const EvalCounts& c) {
  if (c.scored() <= 0) throw std::invalid_argument("compute_metrics: no scored players");
  Metrics m;
  m.r_miss = static_cast<double>(c.miss) / static_cast<double>(c.scored());
  if (c.correct + c.error > 0) {
    m.r_cta = static_cast<double>(c.correct) / static_cast<double>(c.correct + c.error);
  }
  return m;
}

std::vector<MatchResult> match_scene(const Scene& scene, const LabelMap& predicted,
                                     const LabelMap& occupancy) {
  const SceneMasks masks = compose_scene_masks(scene.players, scene.image.height, scene.image.width);
  std::vector<MatchResult> out;
  for (std::size_t k = 0; k < scene.players.size(); ++k) {
    out.push_back(match_player(predicted, occupancy,
                               axis_filtered_pixels(scene.players[k], masks.instances,
                                                    static_cast<std::uint8_t>(k + 1))));
  }
  return out;
}

FoldSplit kfold_split(const std::vector<Scene>& corpus, int k, FoldMode mode) {
  std::vector<std::string> ids;
  for (const Scene& s : corpus) ids.push_back(mode == FoldMode::kGame ? s.game_id : s.arena_id);
  return kfold_split(ids, k, mode);
}

FoldSplit kfold_split(const std::vector<std::string>& ids, int k, FoldMode mode) {
  if (k < 2) throw std::invalid_argument("kfold_split: need at least 2 folds");
  std::map<std::string, std::vector<int>> groups;
  for (std::size_t i = 0; i < ids.size(); ++i) groups[ids[i]].push_back(static_cast<int>(i));
  if (static_cast<int>(groups.size()) < k) {
    throw std::invalid_argument("kfold_split: " + std::to_string(groups.size()) + " distinct " +
                                (mode == FoldMode::kGame ? "games" : "arenas") + " for " +
                                std::to_string(k) + " folds");
  }
  std::vector<std::pair<std::string, std::vector<int>>> order(groups.begin(), groups.end());
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.second.size() > b.second.size(); });
  FoldSplit split;
  split.mode = mode;
  split.folds.resize(k);
  for (const auto& [id, members] : order) {
    auto& smallest = *std::min_element(split.folds.begin(), split.folds.end(),
                                       [](const auto& a, const auto& b) { return a.size() < b.size(); });
    smallest.insert(smallest.end(), members.begin(), members.end());
  }
  for (auto& f : split.folds) std::sort(f.begin(), f.end());
  for (int i = 0; i < k; ++i) {
    Fold it;
    it.test = split.folds[i];
    const int v = (i + 1) % k;
    for (int j = 0; j < k; ++j) {
      if (j == i || (j == v && k > 2)) continue;
      it.train.insert(it.train.end(), split.folds[j].begin(), split.folds[j].end());
    }
    it.val = k > 2 ? split.folds[v] : it.train;
    std::sort(it.train.begin(), it.train.end());
    split.iterations.push_back(std::move(it));
  }
  return split;
}

MetricsReport summarize(const std::string& method, const std::vector<FoldMetrics>& folds) {
  MetricsReport r;
  r.method = method;
  r.folds = folds;
  std::vector<double> miss, cta;
  for (const FoldMetrics& f : folds) {
    miss.push_back(f.metrics.r_miss);
    if (f.metrics.r_cta) cta.push_back(*f.metrics.r_cta);
  }
  auto mean_std = [](const std::vector<double>& v) {
    double m = 0, s = 0;
    for (double x : v) m += x / v.size();
    for (double x : v) s += (x - m) * (x - m) / v.size();
    return std::pair{m, std::sqrt(s)};
  };
  if (!miss.empty()) std::tie(r.mean_r_miss, r.std_r_miss) = mean_std(miss);
  if (!cta.empty()) {
    const auto [m, s] = mean_std(cta);
    r.mean_r_cta = m;
    r.std_r_cta = s;
  }
  return r;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}
std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "NA"; }

}  // namespace

void write_report_csv(std::ostream& out, const std::vector<MetricsReport>& reports,
                      const std::vector<std::string>& header) {
  for (const std::string& h : header) out << "# " << h << '\n';
  out << "method,fold,n_miss,n_corr,n_err,excluded,r_miss,r_cta,std_r_miss,std_r_cta\n";
  for (const MetricsReport& r : reports) {
    EvalCounts total;
    for (const FoldMetrics& f : r.folds) {
      total += f.counts;
      out << r.method << ',' << f.fold << ',' << f.counts.miss << ',' << f.counts.correct << ','
          << f.counts.error << ',' << f.counts.excluded << ',' << fmt(f.metrics.r_miss) << ','
          << fmt(f.metrics.r_cta) << ",,\n";
    }
    out << r.method << ",mean," << total.miss << ',' << total.correct << ',' << total.error << ','
        << total.excluded << ',' << fmt(r.mean_r_miss) << ',' << fmt(r.mean_r_cta) << ','
        << fmt(r.std_r_miss) << ',' << fmt(r.std_r_cta) << '\n';
  }
}

void write_report_text(std::ostream& out, const std::vector<MetricsReport>& reports,
                       const std::vector<std::string>& header) {
  for (const std::string& h : header) out << h << '\n';
  char line[160];
  for (const MetricsReport& r : reports) {
    out << '\n' << r.method << '\n';
    std::snprintf(line, sizeof line, "  %-6s %7s %7s %7s %8s %8s %8s\n", "fold", "miss", "corr",
                  "err", "excl", "R_miss", "R_CTA");
    out << line;
    for (const FoldMetrics& f : r.folds) {
      std::snprintf(line, sizeof line, "  %-6d %7lld %7lld %7lld %8lld %8.4f %8s\n", f.fold,
                    static_cast<long long>(f.counts.miss), static_cast<long long>(f.counts.correct),
                    static_cast<long long>(f.counts.error), static_cast<long long>(f.counts.excluded),
                    f.metrics.r_miss, f.metrics.r_cta ? fmt(*f.metrics.r_cta).substr(0, 6).c_str() : "NA");
      out << line;
    }
    out << "  R_miss " << fmt(r.mean_r_miss) << " +- " << fmt(r.std_r_miss) << "   R_CTA "
        << fmt(r.mean_r_cta) << " +- " << fmt(r.std_r_cta) << '\n';
  }
}

void accumulate_team_iou(const LabelMap& occ, const LabelMap& ref, double& sum, int& count) {
  std::int64_t inter[2][3] = {}, pred[3] = {}, truth[3] = {};
  for (std::size_t i = 0; i < occ.data.size(); ++i) {
    const int p = occ.data[i], t = ref.data[i];
    if (p == 1 || p == 2) ++pred[p];
    if (t == 1 || t == 2) ++truth[t];
    if ((p == 1 || p == 2) && (t == 1 || t == 2)) {
      if (p == t) ++inter[0][t];
      else ++inter[1][t];
    }
  }
  double best = -1;
  int n = 0;
  for (int swap = 0; swap < 2; ++swap) {
    double s = 0;
    int c = 0;
    for (int t = 1; t <= 2; ++t) {
      const int p = swap ? 3 - t : t;
      const std::int64_t uni = truth[t] + pred[p] - inter[swap][t];
      if (uni == 0) continue;
      s += static_cast<double>(inter[swap][t]) / static_cast<double>(uni);
      ++c;
    }
    if (s > best) best = s, n = c;
  }
  sum += best;
  count += n;
}

}  // namespace teamemb
