#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "teamemb/color.hpp"
#include "teamemb/scene.hpp"

namespace teamemb {

// Independent substream seed for (master, stream, index).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0);

struct GameSpec {
  std::string id;
  std::array<color::Rgb8, 2> jersey;  // team A, team B
};

struct ArenaSpec {
  std::string id;
  color::Rgb8 court;
  color::Rgb8 lines;
  std::array<color::Rgb8, 3> band;  // advertising boards along the top
};

// Referee figures use this palette, so jerseys keep their distance from it.
inline constexpr color::Rgb8 kRefereeLight{235, 235, 235};
inline constexpr color::Rgb8 kRefereeDark{20, 20, 20};

struct SceneConfig {
  int height = 128;
  int width = 192;
  int min_players_per_team = 2;
  int max_players_per_team = 5;
  double min_delta_e = 15.0;  // between the two jerseys, and jersey vs court / referee
  double max_delta_e = std::numeric_limits<double>::infinity();  // between the two jerseys
  int min_distractors = 0;
  int max_distractors = 1;
  double noise = 4.0;  // per-channel Gaussian sigma, 8-bit units
  int max_resample = 500;
  std::optional<GameSpec> game;    // sampled from the seed when absent
  std::optional<ArenaSpec> arena;  // sampled from the seed when absent
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ArenaSpec sample_arena(std::uint64_t seed, const std::string& id);
// Throws GenerationError (naming the seed) when no pair satisfies the
// colour-difference constraints within config.max_resample draws.
GameSpec sample_game(std::uint64_t seed, const SceneConfig& config, const ArenaSpec& arena,
                     const std::string& id);

Scene generate_scene(std::uint64_t seed, const SceneConfig& config);

struct CorpusConfig {
  std::uint64_t seed = 1;
  int scenes = 240;
  int games = 24;
  int arenas = 8;
  SceneConfig scene;
};

// Scene i belongs to game i % games, which plays in arena game % arenas.
std::vector<Scene> generate_corpus(const CorpusConfig& config);

// Narrows jersey contrast to [min, min + 5] ΔE.
CorpusConfig low_contrast(CorpusConfig config);

}  // namespace teamemb
