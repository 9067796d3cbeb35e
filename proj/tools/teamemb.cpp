#include <omp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "teamemb/baseline.hpp"
#include "teamemb/checkpoint.hpp"
#include "teamemb/clustering.hpp"
#include "teamemb/evaluation.hpp"
#include "teamemb/experiment.hpp"
#include "teamemb/synth.hpp"
#include "teamemb/verification.hpp"

namespace fs = std::filesystem;
using namespace teamemb;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Every recognised key with its default; the resolved set is written next to
// each run's outputs.
const std::vector<std::pair<std::string, std::string>> kDefaults = {
    {"seed", "1"},          {"scenes", "240"},       {"games", "24"},
    {"arenas", "8"},        {"low_contrast", "false"}, {"min_delta_e", "15"},
    {"epochs", "40"},       {"batch_size", "1"},     {"lr", "0.001"},
    {"dim", "5"},           {"resolution", "128"},   {"folds", "10"},
    {"mode", "game"},       {"mirror", "true"},      {"rotate", "true"},
    {"scale", "true"},      {"jitter", "true"},      {"w_seg_fine", "1"},
    {"w_seg_mid", "0.4"},   {"w_seg_coarse", "0.4"}, {"w_pull", "4"},
    {"w_push", "4"},        {"data", ""},            {"model", ""},
    {"pred", ""},           {"out", "."},
};

using Settings = std::map<std::string, std::string>;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

void read_config(const fs::path& path, Settings& s) {
  if (!fs::exists(path)) throw MissingInput("config file not found: " + path.string());
  std::ifstream in(path);
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(path.string() + ":" + std::to_string(n) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (!s.count(key)) throw UsageError(path.string() + ":" + std::to_string(n) + ": unknown key " + key);
    s[key] = trim(line.substr(eq + 1));
  }
}

long long as_int(const Settings& s, const std::string& k) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s.at(k), &used);
    if (used == s.at(k).size()) return v;
  } catch (const std::logic_error&) {
  }
  throw UsageError(k + ": expected an integer, got '" + s.at(k) + "'");
}

double as_double(const Settings& s, const std::string& k) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s.at(k), &used);
    if (used == s.at(k).size()) return v;
  } catch (const std::logic_error&) {
  }
  throw UsageError(k + ": expected a number, got '" + s.at(k) + "'");
}

bool as_bool(const Settings& s, const std::string& k) {
  const std::string& v = s.at(k);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw UsageError(k + ": expected true or false, got '" + v + "'");
}

CorpusConfig corpus_config(const Settings& s) {
  CorpusConfig c;
  c.seed = static_cast<std::uint64_t>(as_int(s, "seed"));
  c.scenes = static_cast<int>(as_int(s, "scenes"));
  c.games = static_cast<int>(as_int(s, "games"));
  c.arenas = static_cast<int>(as_int(s, "arenas"));
  c.scene.min_delta_e = as_double(s, "min_delta_e");
  if (c.scenes < 1 || c.games < 1 || c.arenas < 1) throw UsageError("scenes, games and arenas must be positive");
  return as_bool(s, "low_contrast") ? low_contrast(c) : c;
}

TrainConfig train_config(const Settings& s) {
  TrainConfig t;
  t.seed = static_cast<std::uint64_t>(as_int(s, "seed"));
  t.epochs = static_cast<int>(as_int(s, "epochs"));
  t.batch_size = static_cast<int>(as_int(s, "batch_size"));
  t.base_lr = as_double(s, "lr");
  t.net.embedding_dim = static_cast<int>(as_int(s, "dim"));
  t.net.resolution = static_cast<int>(as_int(s, "resolution"));
  t.augment.mirror = as_bool(s, "mirror");
  t.augment.rotate = as_bool(s, "rotate");
  t.augment.scale = as_bool(s, "scale");
  t.augment.jitter = as_bool(s, "jitter");
  t.augment.crop_size = t.net.resolution;
  t.weights = {as_double(s, "w_seg_fine"), as_double(s, "w_seg_mid"), as_double(s, "w_seg_coarse"),
               as_double(s, "w_pull"), as_double(s, "w_push")};
  if (t.epochs < 1 || t.batch_size < 1) throw UsageError("epochs and batch_size must be positive");
  try {
    t.net.validate();
    t.weights.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return t;
}

FoldMode fold_mode(const Settings& s) {
  if (s.at("mode") == "game") return FoldMode::kGame;
  if (s.at("mode") == "arena") return FoldMode::kArena;
  throw UsageError("mode: expected game or arena, got '" + s.at("mode") + "'");
}

fs::path out_dir(const Settings& s) {
  const fs::path p = s.at("out");
  fs::create_directories(p);
  return p;
}

void write_resolved(const Settings& s, const fs::path& dir, const std::string& command) {
  std::ofstream out(dir / "config.txt");
  out << "# teamemb " << command << " resolved configuration\n";
  for (const auto& [k, v] : kDefaults) out << k << " = " << s.at(k) << '\n';
}

fs::path require(const Settings& s, const std::string& key) {
  if (s.at(key).empty()) throw UsageError("--" + key + " is required");
  const fs::path p = s.at(key);
  if (!fs::exists(p)) throw MissingInput(key + " not found: " + p.string());
  return p;
}

// Annotation files of a corpus directory in name order, or a single file.
std::vector<fs::path> scene_files(const fs::path& p) {
  if (fs::is_regular_file(p)) return {p};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(p))
    if (e.path().extension() == ".json" && e.path().stem().extension().empty()) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw MissingInput("no scene annotations in " + p.string());
  return out;
}

std::vector<Scene> load_scenes(const std::vector<fs::path>& files) {
  std::vector<Scene> out;
  for (const fs::path& f : files) out.push_back(load_scene(f));
  return out;
}

std::string stem_of(const fs::path& p) { return p.stem().string(); }

int cmd_gen(const Settings& s) {
  const fs::path dir = out_dir(s);
  const std::vector<Scene> corpus = generate_corpus(corpus_config(s));
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%04zu", i);
    write_png(dir / (std::string(name) + ".png"), corpus[i].image);
    save_scene(corpus[i], dir / (std::string(name) + ".json"), dir / (std::string(name) + ".png"));
  }
  write_resolved(s, dir, "gen");
  std::cout << "wrote " << corpus.size() << " scenes to " << dir.string() << '\n';
  return 0;
}

int cmd_train(const Settings& s) {
  const fs::path dir = out_dir(s);
  std::vector<Scene> corpus = s.at("data").empty() ? generate_corpus(corpus_config(s))
                                                   : load_scenes(scene_files(require(s, "data")));
  const TrainConfig tc = train_config(s);
  // Fold 0 of the grouped split is held out for epoch selection.
  std::vector<std::string> ids;
  for (const Scene& sc : corpus) ids.push_back(fold_mode(s) == FoldMode::kGame ? sc.game_id : sc.arena_id);
  const std::set<std::string> groups(ids.begin(), ids.end());
  std::vector<const Scene*> train, val;
  if (groups.size() < 2) {
    for (const Scene& sc : corpus) train.push_back(&sc), val.push_back(&sc);
  } else {
    const FoldSplit split = kfold_split(ids, std::min<int>(static_cast<int>(as_int(s, "folds")),
                                                           static_cast<int>(groups.size())),
                                        fold_mode(s));
    const std::set<int> held(split.folds[0].begin(), split.folds[0].end());
    for (std::size_t i = 0; i < corpus.size(); ++i)
      (held.count(static_cast<int>(i)) ? val : train).push_back(&corpus[i]);
  }
  const TrainResult r = train_model(train, val, tc, [](const EpochLog& e) {
    std::fprintf(stderr, "epoch %d lr %.3e loss %.5f val IoU %.4f\n", e.epoch, e.lr, e.mean_loss.total,
                 e.val_iou);
  });
  save_model(r.model, dir / "model.bin");
  std::ofstream loss(dir / "loss.csv");
  write_loss_csv(loss, r.history);
  write_resolved(s, dir, "train");
  std::cout << "best epoch " << r.best_epoch << " val IoU " << r.best_val_iou << '\n';
  return 0;
}

int cmd_infer(const Settings& s) {
  const TeamNet model = load_model(require(s, "model"));
  const fs::path dir = out_dir(s);
  for (const fs::path& f : scene_files(require(s, "data"))) {
    const Scene sc = load_scene(f);
    const Inference inf = infer(model, to_tensor(sc.image));
    save_dump(dir / (stem_of(f) + ".seg.tdmp"), inf.seg);
    save_dump(dir / (stem_of(f) + ".emb.tdmp"), inf.embedding);
  }
  write_resolved(s, dir, "infer");
  return 0;
}

int cmd_cluster(const Settings& s) {
  const fs::path in = require(s, "pred");
  const fs::path dir = out_dir(s);
  int n = 0;
  for (const auto& e : fs::directory_iterator(in)) {
    const std::string name = e.path().filename().string();
    if (!name.ends_with(".seg.tdmp")) continue;
    const std::string stem = name.substr(0, name.size() - 9);
    const fs::path emb = in / (stem + ".emb.tdmp");
    if (!fs::exists(emb)) throw MissingInput("missing embedding dump " + emb.string());
    const Tensor seg = load_dump(e.path());
    const ClusterResult c = cluster_teams(seg, load_dump(emb));
    write_label_png(dir / (stem + ".mask.png"), threshold_mask(seg));
    write_label_png(dir / (stem + ".occupancy.png"), c.occupancy, true);
    ++n;
  }
  if (!n) throw MissingInput("no segmentation dumps in " + in.string());
  write_resolved(s, dir, "cluster");
  return 0;
}

int cmd_baseline(const Settings& s) {
  const fs::path dir = out_dir(s);
  std::vector<BaselineRow> rows;
  const auto seed = static_cast<std::uint64_t>(as_int(s, "seed"));
  for (const fs::path& f : scene_files(require(s, "data"))) {
    const Scene sc = load_scene(f);
    const auto labels = baseline_assign(sc, seed);
    for (std::size_t k = 0; k < labels.size(); ++k)
      rows.push_back({stem_of(f), static_cast<int>(k), sc.players[k].team, labels[k].label, labels[k].flag});
  }
  write_baseline_csv(dir / "baseline.csv", rows);
  write_resolved(s, dir, "baseline");
  return 0;
}

// Scores occupancy maps (and optional masks) against annotations; the mask
// defaults to the non-zero occupancy pixels.
int cmd_eval(const Settings& s) {
  const fs::path pred = require(s, "pred");
  const fs::path dir = out_dir(s);
  EvalCounts total;
  int scenes = 0;
  for (const fs::path& f : scene_files(require(s, "data"))) {
    const Scene sc = load_scene(f);
    const fs::path occ_path = pred / (stem_of(f) + ".occupancy.png");
    if (!fs::exists(occ_path)) throw MissingInput("missing occupancy map " + occ_path.string());
    const LabelMap occ = read_label_png(occ_path);
    LabelMap mask(occ.height, occ.width);
    const fs::path mask_path = pred / (stem_of(f) + ".mask.png");
    if (fs::exists(mask_path)) mask = read_label_png(mask_path);
    else
      for (std::size_t i = 0; i < occ.data.size(); ++i) mask.data[i] = occ.data[i] != 0;
    if (occ.height != sc.image.height || occ.width != sc.image.width || mask.height != occ.height ||
        mask.width != occ.width)
      throw std::runtime_error("size mismatch for " + stem_of(f));
    std::vector<Team> truth;
    for (const auto& p : sc.players) truth.push_back(p.team);
    total += score_image(match_scene(sc, mask, occ), truth).counts;
    ++scenes;
  }
  const MetricsReport r = summarize("embedding", {{0, total, compute_metrics(total)}});
  const std::vector<std::string> header{"scenes=" + std::to_string(scenes)};
  std::ofstream csv(dir / "eval.csv");
  write_report_csv(csv, {r}, header);
  write_report_text(std::cout, {r}, header);
  write_resolved(s, dir, "eval");
  return 0;
}

int cmd_kfold(const Settings& s) {
  const fs::path dir = out_dir(s);
  ExperimentConfig cfg;
  cfg.corpus = corpus_config(s);
  cfg.train = train_config(s);
  cfg.folds = static_cast<int>(as_int(s, "folds"));
  cfg.mode = fold_mode(s);
  cfg.low_contrast_test = !as_bool(s, "low_contrast");  // corpus_config already narrowed it
  const ExperimentReport r = run_experiment(cfg, [](const std::string& line) { std::cerr << line << '\n'; });
  std::ofstream csv(dir / "report.csv"), txt(dir / "report.txt");
  write_report_csv(csv, r.all(), r.header);
  write_report_text(txt, r.all(), r.header);
  write_report_text(std::cout, r.all(), r.header);
  write_resolved(s, dir, "kfold");
  return 0;
}

int cmd_gradcheck(const Settings& s) {
  bool ok = true;
  for (const GradCheckEntry& e : run_gradcheck_suite(static_cast<std::uint64_t>(as_int(s, "seed")))) {
    std::printf("%-16s max rel error %.3e (tolerance %.0e) %s\n", e.name.c_str(), e.max_rel_error,
                e.tolerance, e.ok ? "ok" : "FAIL");
    ok = ok && e.ok;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* t = std::getenv("TEAMEMB_THREADS")) {
    const int n = std::atoi(t);
    if (n > 0) omp_set_num_threads(n);
  }

  CLI::App app{"Team-aware player segmentation toolkit"};
  app.require_subcommand(1, 1);
  std::map<std::string, std::string> flags;
  std::string config_path;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"gen", "generate a synthetic corpus"},
      {"train", "train a model"},
      {"infer", "write segmentation and embedding dumps"},
      {"cluster", "cluster dumps into occupancy maps"},
      {"baseline", "colour-histogram baseline labels"},
      {"eval", "score occupancy maps against annotations"},
      {"kfold", "cross-validated experiment"},
      {"gradcheck", "finite-difference gradient checks"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "key = value configuration file");
    for (const std::string key : {"seed", "out", "scenes", "epochs", "dim", "folds", "mode", "resolution",
                                  "data", "model", "pred"}) {
      sub->add_option_function<std::string>("--" + key, [&flags, key](const std::string& v) { flags[key] = v; });
    }
    sub->add_flag_function("--low-contrast", [&flags](std::int64_t) { flags["low_contrast"] = "true"; },
                           "narrow jersey contrast");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    Settings s(kDefaults.begin(), kDefaults.end());
    if (!config_path.empty()) read_config(config_path, s);
    for (const auto& [k, v] : flags) s[k] = v;
    if (command == "gen") return cmd_gen(s);
    if (command == "train") return cmd_train(s);
    if (command == "infer") return cmd_infer(s);
    if (command == "cluster") return cmd_cluster(s);
    if (command == "baseline") return cmd_baseline(s);
    if (command == "eval") return cmd_eval(s);
    if (command == "kfold") return cmd_kfold(s);
    return cmd_gradcheck(s);
  } catch (const UsageError& e) {
    std::cerr << "teamemb " << command << ": " << e.what() << '\n' << app.get_subcommand(command)->help();
    return 2;
  } catch (const MissingInput& e) {
    std::cerr << "teamemb " << command << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "teamemb " << command << ": " << e.what() << '\n';
    return 1;
  }
}
