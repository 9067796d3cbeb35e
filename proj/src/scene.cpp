#include "teamemb/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "teamemb/checkpoint.hpp"
#include "teamemb/net.hpp"

namespace teamemb {
namespace {

using nlohmann::json;

json point_json(const Point& p) { return json::array({p.x, p.y}); }

Point json_point(const json& j, const char* key) {
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 2) {
    throw FormatError(std::string("annotation field '") + key + "' must be [x, y]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

Ellipse segment_ellipse(const Point& a, const Point& b, double half_width) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len = std::hypot(dx, dy);
  Ellipse e;
  e.centre = {(a.x + b.x) / 2, (a.y + b.y) / 2};
  e.semi_major = len / 2;
  e.semi_minor = half_width;
  e.axis = len > 0 ? Point{dx / len, dy / len} : Point{1, 0};
  return e;
}

Ellipse disc(const Point& c, double r) { return {c, r, r, {1, 0}}; }

}  // namespace

void save_scene(const Scene& scene, const std::filesystem::path& json_path,
                const std::filesystem::path& image_path) {
  json players = json::array();
  for (const PlayerAnnotation& p : scene.players) {
    players.push_back({{"head", point_json(p.head)},
                       {"pelvis", point_json(p.pelvis)},
                       {"foot_l", point_json(p.foot_left)},
                       {"foot_r", point_json(p.foot_right)},
                       {"team", p.team == Team::kA ? "A" : "B"},
                       {"depth", p.depth_rank}});
  }
  const json doc = {{"game_id", scene.game_id},
                    {"arena_id", scene.arena_id},
                    {"image", std::filesystem::relative(image_path, json_path.parent_path()).string()},
                    {"players", players}};
  std::ofstream out(json_path);
  if (!out) throw FormatError("cannot write " + json_path.string());
  out << doc.dump(1) << '\n';
}

Scene load_scene(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw FormatError("cannot open " + json_path.string());
  json doc;
  try {
    in >> doc;
    Scene s;
    s.game_id = doc.at("game_id").get<std::string>();
    s.arena_id = doc.at("arena_id").get<std::string>();
    for (const json& p : doc.at("players")) {
      PlayerAnnotation a;
      a.head = json_point(p, "head");
      a.pelvis = json_point(p, "pelvis");
      a.foot_left = json_point(p, "foot_l");
      a.foot_right = json_point(p, "foot_r");
      const std::string team = p.at("team").get<std::string>();
      if (team != "A" && team != "B") throw FormatError("team must be \"A\" or \"B\", got " + team);
      a.team = team == "A" ? Team::kA : Team::kB;
      a.depth_rank = p.at("depth").get<int>();
      s.players.push_back(a);
    }
    s.image = read_image(json_path.parent_path() / doc.at("image").get<std::string>());
    return s;
  } catch (const json::exception& e) {
    throw FormatError(json_path.string() + ": " + e.what());
  }
}

bool Ellipse::contains(double x, double y) const {
  const double dx = x - centre.x, dy = y - centre.y;
  const double u = dx * axis.x + dy * axis.y;
  const double v = -dx * axis.y + dy * axis.x;
  if (semi_major <= 0 || semi_minor <= 0) return dx == 0 && dy == 0;
  return (u * u) / (semi_major * semi_major) + (v * v) / (semi_minor * semi_minor) <= 1.0;
}

std::array<Ellipse, 7> player_ellipses(const PlayerAnnotation& p, const EllipseProportions& q) {
  const double d = std::hypot(p.head.x - p.pelvis.x, p.head.y - p.pelvis.y);
  if (!(d > 0)) throw std::invalid_argument("degenerate body axis: head and pelvis coincide");
  const double L = 2 * d;
  std::array<Ellipse, 7> e;
  e[kHead] = disc(p.head, q.head_radius * L);
  e[kBody] = segment_ellipse(p.head, p.pelvis, q.body_half_width * L);
  e[kPelvis] = disc(p.pelvis, q.pelvis_radius * L);
  e[kLegLeft] = segment_ellipse(p.pelvis, p.foot_left, q.leg_half_width * L);
  e[kLegRight] = segment_ellipse(p.pelvis, p.foot_right, q.leg_half_width * L);
  e[kFootLeft] = disc(p.foot_left, q.foot_radius * L);
  e[kFootRight] = disc(p.foot_right, q.foot_radius * L);
  return e;
}

LabelMap rasterize_player(const PlayerAnnotation& p, int height, int width) {
  const auto parts = player_ellipses(p);
  LabelMap m(height, width);
  for (const Ellipse& e : parts) {
    const double r = std::max(e.semi_major, e.semi_minor);
    const int x0 = std::max(0, static_cast<int>(std::floor(e.centre.x - r)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(e.centre.x + r)));
    const int y0 = std::max(0, static_cast<int>(std::floor(e.centre.y - r)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(e.centre.y + r)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if (e.contains(x, y)) m.at(y, x) = 1;
  }
  return m;
}

SceneMasks compose_scene_masks(const std::vector<PlayerAnnotation>& players, int height,
                               int width) {
  if (players.size() > 254) throw std::invalid_argument("too many players for 8-bit instance ids");
  std::set<int> ranks;
  for (const auto& p : players) {
    if (!ranks.insert(p.depth_rank).second) {
      throw std::invalid_argument("duplicate depth rank " + std::to_string(p.depth_rank));
    }
  }
  std::vector<std::size_t> order(players.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  // Farthest first so nearer players overwrite.
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return players[a].depth_rank > players[b].depth_rank;
  });
  SceneMasks out{LabelMap(height, width), LabelMap(height, width)};
  for (std::size_t k : order) {
    const LabelMap m = rasterize_player(players[k], height, width);
    for (std::size_t i = 0; i < m.data.size(); ++i) {
      if (!m.data[i]) continue;
      out.instances.data[i] = static_cast<std::uint8_t>(k + 1);
      out.teams.data[i] = static_cast<std::uint8_t>(team_label(players[k].team));
    }
  }
  return out;
}

Tensor downsample_mask(const Tensor& mask, int factor) {
  require_rank(mask, 3, "mask");
  if (factor < 1) throw std::invalid_argument("downsample factor must be >= 1");
  const int c = mask.dim(0), h = mask.dim(1), w = mask.dim(2);
  if (h % factor != 0 || w % factor != 0) {
    throw DimensionError("mask " + std::to_string(h) + "x" + std::to_string(w) +
                         " is not divisible by " + std::to_string(factor));
  }
  Tensor out({c, h / factor, w / factor});
  const double inv = 1.0 / (static_cast<double>(factor) * factor);
  for (int k = 0; k < c; ++k)
    for (int y = 0; y < h / factor; ++y)
      for (int x = 0; x < w / factor; ++x) {
        double s = 0;
        for (int dy = 0; dy < factor; ++dy)
          for (int dx = 0; dx < factor; ++dx) s += mask.at(k, y * factor + dy, x * factor + dx);
        out.at(k, y, x) = static_cast<float>(s * inv);
      }
  return out;
}

Tensor indicator(const LabelMap& labels, std::uint8_t value) {
  Tensor t({1, labels.height, labels.width});
  for (std::size_t i = 0; i < labels.data.size(); ++i) {
    t[i] = (value == 0 ? labels.data[i] != 0 : labels.data[i] == value) ? 1.0f : 0.0f;
  }
  return t;
}

losses::LossTargets<float> build_targets(const SceneMasks& masks) {
  losses::LossTargets<float> t;
  const Tensor players = indicator(masks.teams, 0);
  for (int s = 0; s < 3; ++s) t.seg[s] = downsample_mask(players, kScaleFactors[s]);
  const int f = kScaleFactors[kFine];
  for (int n = 0; n < 2; ++n) {
    const Tensor share = downsample_mask(indicator(masks.teams, static_cast<std::uint8_t>(n + 1)), f);
    for (int y = 0; y < share.dim(1); ++y)
      for (int x = 0; x < share.dim(2); ++x)
        if (share.at(0, y, x) > 0.5f) t.teams.teams[n].push_back({y, x});
  }
  return t;
}

}  // namespace teamemb
