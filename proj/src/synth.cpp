#include "teamemb/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace teamemb {
namespace {

using color::Rgb8;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string hex(const Rgb8& c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}
int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

Rgb8 sample_lch(std::mt19937_64& rng, double l0, double l1, double c0, double c1, double h0,
                double h1) {
  const double h = uniform(rng, h0, h1) * std::numbers::pi / 180.0;
  return color::lab_to_srgb8(
      color::lch_to_lab({uniform(rng, l0, l1), uniform(rng, c0, c1), h}));
}

double delta_e8(const Rgb8& p, const Rgb8& q) {
  return color::delta_e(color::srgb8_to_lab(p), color::srgb8_to_lab(q));
}

struct Canvas {
  int height, width;
  std::vector<double> px;  // interleaved RGB, 8-bit scale

  Canvas(int h, int w) : height(h), width(w), px(static_cast<std::size_t>(h) * w * 3, 0.0) {}
  void set(int y, int x, const Rgb8& c, double shade = 1.0) {
    double* p = &px[(static_cast<std::size_t>(y) * width + x) * 3];
    for (int i = 0; i < 3; ++i) p[i] = c[i] * shade;
  }
};

void paint_ellipse(Canvas& canvas, const Ellipse& e, const Rgb8& c, double shade,
                   const std::vector<Rgb8>* stripes = nullptr) {
  const double r = std::max(e.semi_major, e.semi_minor);
  const int x0 = std::max(0, static_cast<int>(std::floor(e.centre.x - r)));
  const int x1 = std::min(canvas.width - 1, static_cast<int>(std::ceil(e.centre.x + r)));
  const int y0 = std::max(0, static_cast<int>(std::floor(e.centre.y - r)));
  const int y1 = std::min(canvas.height - 1, static_cast<int>(std::ceil(e.centre.y + r)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      if (!e.contains(x, y)) continue;
      if (stripes) {
        canvas.set(y, x, (*stripes)[static_cast<std::size_t>((x + 1000) / 2) % stripes->size()], shade);
      } else {
        canvas.set(y, x, c, shade);
      }
    }
}

struct Figure {
  PlayerAnnotation pose;
  Rgb8 jersey;
  Rgb8 skin;
  bool referee = false;
};

void paint_figure(Canvas& canvas, const Figure& f, double shade) {
  static const std::vector<Rgb8> kStripes{kRefereeLight, kRefereeDark};
  const auto parts = player_ellipses(f.pose);
  const Rgb8 shoe{30, 28, 26};
  paint_ellipse(canvas, parts[kLegLeft], f.skin, shade);
  paint_ellipse(canvas, parts[kLegRight], f.skin, shade);
  paint_ellipse(canvas, parts[kFootLeft], shoe, shade);
  paint_ellipse(canvas, parts[kFootRight], shoe, shade);
  if (f.referee) {
    paint_ellipse(canvas, parts[kPelvis], kRefereeDark, shade);
    paint_ellipse(canvas, parts[kBody], {}, shade, &kStripes);
  } else {
    paint_ellipse(canvas, parts[kPelvis], f.jersey, shade);
    paint_ellipse(canvas, parts[kBody], f.jersey, shade);
  }
  paint_ellipse(canvas, parts[kHead], f.skin, shade);
}

PlayerAnnotation sample_pose(std::mt19937_64& rng, const SceneConfig& cfg, double pelvis_x,
                             double pelvis_y) {
  const double h = cfg.height;
  // Mild perspective: players lower in the frame are larger.
  const double d = h * (0.075 + 0.035 * (pelvis_y / h)) * uniform(rng, 0.92, 1.08);
  PlayerAnnotation p;
  p.pelvis = {pelvis_x, pelvis_y};
  p.head = {pelvis_x + uniform(rng, -0.15, 0.15) * d, pelvis_y - d * uniform(rng, 0.95, 1.05)};
  const double stance = uniform(rng, 0.1, 0.45) * d;
  const double shift = uniform(rng, -0.15, 0.15) * d;
  p.foot_left = {pelvis_x - stance + shift, pelvis_y + d * uniform(rng, 1.0, 1.2)};
  p.foot_right = {pelvis_x + stance + shift, pelvis_y + d * uniform(rng, 1.0, 1.2)};
  return p;
}

const std::array<Rgb8, 4> kSkinTones{{{224, 172, 138}, {198, 134, 96}, {141, 85, 54}, {92, 58, 40}}};

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
  return splitmix(splitmix(splitmix(master) ^ (stream * 0x632be59bd9b4e019ULL)) + index);
}

ArenaSpec sample_arena(std::uint64_t seed, const std::string& id) {
  std::mt19937_64 rng(seed);
  ArenaSpec a;
  a.id = id;
  // Wood-like courts: warm, moderately light, low chroma.
  a.court = sample_lch(rng, 55, 75, 15, 35, 45, 85);
  a.lines = uniform(rng, 0, 1) < 0.6 ? Rgb8{240, 240, 235} : sample_lch(rng, 40, 70, 30, 60, 0, 360);
  for (Rgb8& b : a.band) b = sample_lch(rng, 30, 80, 20, 70, 0, 360);
  return a;
}

GameSpec sample_game(std::uint64_t seed, const SceneConfig& cfg, const ArenaSpec& arena,
                     const std::string& id) {
  std::mt19937_64 rng(seed);
  const bool narrow = std::isfinite(cfg.max_delta_e);
  auto clear_of_palette = [&](const Rgb8& c) {
    return delta_e8(c, arena.court) >= cfg.min_delta_e &&
           delta_e8(c, kRefereeLight) >= cfg.min_delta_e &&
           delta_e8(c, kRefereeDark) >= cfg.min_delta_e;
  };
  for (int attempt = 0; attempt < cfg.max_resample; ++attempt) {
    const Rgb8 a = sample_lch(rng, 30, 80, 25, 75, 0, 360);
    Rgb8 b;
    if (narrow) {
      // Step away from `a` in a random Lab direction by a distance inside the
      // allowed band; gamut clipping may move it, so re-check below.
      const color::Lab la = color::srgb8_to_lab(a);
      const double dist = uniform(rng, cfg.min_delta_e, cfg.max_delta_e);
      const double theta = uniform(rng, 0, 2 * std::numbers::pi);
      const double z = uniform(rng, -0.5, 0.5);
      const double r = std::sqrt(1 - z * z);
      b = color::lab_to_srgb8({la.L + dist * z, la.a + dist * r * std::cos(theta),
                               la.b + dist * r * std::sin(theta)});
    } else {
      b = sample_lch(rng, 30, 80, 25, 75, 0, 360);
    }
    const double de = delta_e8(a, b);
    if (de < cfg.min_delta_e || de > cfg.max_delta_e) continue;
    if (!clear_of_palette(a) || !clear_of_palette(b)) continue;
    return {id.empty() ? "g-" + hex(a) + "-" + hex(b) : id, {a, b}};
  }
  throw GenerationError("no jersey pair satisfies the colour constraints (seed " +
                        std::to_string(seed) + ")");
}

Scene generate_scene(std::uint64_t seed, const SceneConfig& cfg) {
  if (cfg.min_players_per_team < 0 || cfg.max_players_per_team < cfg.min_players_per_team ||
      cfg.min_distractors < 0 || cfg.max_distractors < cfg.min_distractors) {
    throw std::invalid_argument("scene config: invalid player or distractor range");
  }
  std::mt19937_64 rng(derive_seed(seed, 0));
  const ArenaSpec arena = cfg.arena ? *cfg.arena : sample_arena(derive_seed(seed, 1), "");
  const GameSpec game = cfg.game ? *cfg.game : sample_game(derive_seed(seed, 2), cfg, arena, "");
  const int h = cfg.height, w = cfg.width;

  // Court: planks of slightly varying brightness, a few lines, and a band of
  // advertising boards along the top.
  Canvas canvas(h, w);
  const int band_rows = static_cast<int>(std::round(0.12 * h));
  std::vector<double> plank(h);
  for (double& v : plank) v = uniform(rng, 0.94, 1.06);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) canvas.set(y, x, arena.court, plank[y / 3]);
  int x = 0;
  while (x < w) {
    const int len = uniform_int(rng, w / 8, w / 3);
    const Rgb8 c = arena.band[uniform_int(rng, 0, 2)];
    for (int y = 0; y < band_rows; ++y)
      for (int xx = x; xx < std::min(w, x + len); ++xx) canvas.set(y, xx, c);
    x += len;
  }
  const int line_y = uniform_int(rng, band_rows + 4, h / 2);
  for (int xx = 0; xx < w; ++xx) canvas.set(line_y, xx, arena.lines);
  const double arc_cx = uniform(rng, 0.3, 0.7) * w, arc_r = uniform(rng, 0.25, 0.45) * h;
  for (int xx = 0; xx < w; ++xx) {
    const double dx = xx - arc_cx;
    if (std::abs(dx) >= arc_r) continue;
    const int y = static_cast<int>(std::round(h - 1 - std::sqrt(arc_r * arc_r - dx * dx)));
    if (y > band_rows && y < h) canvas.set(y, xx, arena.lines);
  }

  // Figures. Referees are not annotated and are drawn behind the players.
  std::vector<Figure> figures;
  // One skin tone per scene, shared by every figure.
  const Rgb8 skin = kSkinTones[uniform_int(rng, 0, 3)];
  std::vector<Point> taken;
  auto place = [&](double min_gap) {
    Point p{};
    for (int attempt = 0; attempt < 50; ++attempt) {
      p = {uniform(rng, 0.03, 0.97) * w, uniform(rng, 0.42, 0.8) * h};
      bool ok = true;
      for (const Point& q : taken) ok &= std::hypot(p.x - q.x, p.y - q.y) >= min_gap;
      if (ok) break;
    }
    taken.push_back(p);
    return p;
  };
  const double gap = 0.1 * h;
  const int referees = uniform_int(rng, cfg.min_distractors, cfg.max_distractors);
  for (int r = 0; r < referees; ++r) {
    const Point p = place(gap);
    figures.push_back({sample_pose(rng, cfg, p.x, p.y), kRefereeLight,
                       skin, true});
  }
  std::vector<Figure> players;
  for (int team = 0; team < 2; ++team) {
    const int n = uniform_int(rng, cfg.min_players_per_team, cfg.max_players_per_team);
    for (int k = 0; k < n; ++k) {
      const Point p = place(gap);
      Figure f{sample_pose(rng, cfg, p.x, p.y), game.jersey[team], skin};
      f.pose.team = team == 0 ? Team::kA : Team::kB;
      players.push_back(f);
    }
  }
  // Depth from the feet: lower in the frame is nearer.
  std::vector<std::size_t> order(players.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto feet_y = [&](std::size_t i) {
    return std::max(players[i].pose.foot_left.y, players[i].pose.foot_right.y);
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return feet_y(a) > feet_y(b); });
  for (std::size_t rank = 0; rank < order.size(); ++rank) players[order[rank]].pose.depth_rank = static_cast<int>(rank);

  for (const Figure& f : figures) paint_figure(canvas, f, uniform(rng, 0.9, 1.05));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    paint_figure(canvas, players[*it], uniform(rng, 0.9, 1.05));
  }

  Scene scene;
  scene.game_id = game.id;
  scene.arena_id = arena.id.empty() ? "a-" + hex(arena.court) : arena.id;
  scene.image = RgbImage(h, w);
  std::normal_distribution<double> noise(0.0, cfg.noise);
  for (std::size_t i = 0; i < canvas.px.size(); ++i) {
    const double v = canvas.px[i] + (cfg.noise > 0 ? noise(rng) : 0.0);
    scene.image.data[i] = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
  }
  for (const Figure& f : players) scene.players.push_back(f.pose);
  return scene;
}

std::vector<Scene> generate_corpus(const CorpusConfig& config) {
  if (config.games < 1 || config.arenas < 1 || config.scenes < 0) {
    throw std::invalid_argument("corpus config: games and arenas must be >= 1");
  }
  std::vector<ArenaSpec> arenas;
  for (int a = 0; a < config.arenas; ++a) {
    arenas.push_back(sample_arena(derive_seed(config.seed, 11, a), "arena" + std::to_string(a)));
  }
  std::vector<GameSpec> games;
  for (int g = 0; g < config.games; ++g) {
    games.push_back(sample_game(derive_seed(config.seed, 12, g), config.scene,
                                arenas[g % config.arenas], "game" + std::to_string(g)));
  }
  std::vector<Scene> out;
  for (int i = 0; i < config.scenes; ++i) {
    SceneConfig sc = config.scene;
    const int g = i % config.games;
    sc.game = games[g];
    sc.arena = arenas[g % config.arenas];
    out.push_back(generate_scene(derive_seed(config.seed, 13, i), sc));
  }
  return out;
}

CorpusConfig low_contrast(CorpusConfig config) {
  config.scene.max_delta_e = config.scene.min_delta_e + 5.0;
  return config;
}

}  // namespace teamemb
