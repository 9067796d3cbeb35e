#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "teamemb/image.hpp"
#include "teamemb/losses.hpp"
#include "teamemb/tensor.hpp"

namespace teamemb {

struct Point {
  double x = 0;
  double y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

enum class Team : int { kA = 0, kB = 1 };
inline int team_label(Team t) { return static_cast<int>(t) + 1; }  // 1 or 2

struct PlayerAnnotation {
  Point head, pelvis, foot_left, foot_right;
  Team team = Team::kA;
  int depth_rank = 0;  // smaller is nearer the camera
  friend bool operator==(const PlayerAnnotation&, const PlayerAnnotation&) = default;
};

struct Scene {
  RgbImage image;
  std::vector<PlayerAnnotation> players;
  std::string game_id;
  std::string arena_id;
};

// Annotation JSON next to an image file. `image` in the JSON is the image
// path relative to the JSON file.
void save_scene(const Scene& scene, const std::filesystem::path& json_path,
                const std::filesystem::path& image_path);
Scene load_scene(const std::filesystem::path& json_path);

// Pixel (x, y) is tested at the point (x, y): pixel centres sit on integer
// coordinates, as do keypoints.
struct Ellipse {
  Point centre;
  double semi_major = 0;  // along `axis`
  double semi_minor = 0;
  Point axis{1, 0};       // unit vector
  bool contains(double x, double y) const;
  // Distance from the major axis line to the farthest border point.
  double half_width() const { return semi_minor; }
};

// Head disc, body, pelvis disc, left leg, right leg, left foot, right foot.
enum EllipsePart : int { kHead, kBody, kPelvis, kLegLeft, kLegRight, kFootLeft, kFootRight };

struct EllipseProportions {
  // Fractions of L = 2 * |head - pelvis|.
  double head_radius = 0.11;
  double body_half_width = 0.18;
  double pelvis_radius = 0.11;
  double leg_half_width = 0.08;
  double foot_radius = 0.06;
};

// Throws std::invalid_argument when head == pelvis.
std::array<Ellipse, 7> player_ellipses(const PlayerAnnotation& p, const EllipseProportions& q = {});

// Union of the seven ellipses as a 0/1 map, clipped to the image.
LabelMap rasterize_player(const PlayerAnnotation& p, int height, int width);

struct SceneMasks {
  LabelMap instances;  // 0 background, k + 1 for players[k]
  LabelMap teams;      // 0 background, 1 team A, 2 team B
};

// Nearer players (smaller depth rank) own contested pixels. Throws on
// duplicate depth ranks.
SceneMasks compose_scene_masks(const std::vector<PlayerAnnotation>& players, int height, int width);

// Non-overlapping factor x factor box average of a [C,H,W] map.
Tensor downsample_mask(const Tensor& mask, int factor);

// 0/1 tensor [1,H,W] of the pixels equal to `value`, or of all non-zero
// pixels when value is 0.
Tensor indicator(const LabelMap& labels, std::uint8_t value);

// Loss targets for a full-resolution crop: soft player masks at 1/4, 1/8 and
// 1/16, and team pixel sets at 1/4 (cells whose team share exceeds one half).
losses::LossTargets<float> build_targets(const SceneMasks& masks);

}  // namespace teamemb
