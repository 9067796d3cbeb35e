#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "teamemb/image.hpp"
#include "teamemb/scene.hpp"

namespace teamemb {

// Pixels of the body and pelvis ellipses lying within one third of their
// largest border-to-axis distance from the head -> pelvis line, restricted to
// the pixels of `instance_id` in the occlusion-resolved instance map.
std::vector<Pixel> axis_filtered_pixels(const PlayerAnnotation& player, const LabelMap& instances,
                                        std::uint8_t instance_id);

// Same filter without the instance restriction (clipped to the image).
std::vector<Pixel> axis_filtered_region(const PlayerAnnotation& player, int height, int width);

using Histogram512 = std::array<double, 512>;

inline int histogram_bin(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return 64 * (r / 32) + 8 * (g / 32) + b / 32;
}

// L1-normalised 8x8x8 RGB histogram. Throws std::invalid_argument when empty.
Histogram512 rgb_histogram(const std::vector<Pixel>& pixels, const RgbImage& image);

struct DpgmmOptions {
  int truncation = 2;
  double tolerance = 1e-5;
  int max_iterations = 500;
  double mean_precision = 1.0;  // β0
  // Gamma prior on each diagonal precision: shape dof / 2 and rate
  // (data variance + variance_floor) / 2 per dimension. dof <= 0 means the
  // sample dimension.
  double dof = 0.0;
  double variance_floor = 1e-6;
};

struct DpgmmResult {
  std::vector<int> labels;  // 0-based argmax component per sample
  int effective_components = 0;
  std::vector<double> weights;           // expected stick-breaking weights
  std::vector<double> counts;            // aggregate responsibility per component
  std::vector<std::vector<double>> means;
  std::vector<std::vector<double>> precisions;  // expected diagonal precisions
  std::vector<double> elbo;              // one value per iteration
  int iterations = 0;
  bool converged = false;
};

// Variational Gaussian mixture with a truncated stick-breaking prior and a
// diagonal Normal-Gamma prior centred on the data mean, scaled by the data
// variance.
DpgmmResult fit_dpgmm(const std::vector<std::vector<double>>& samples, std::uint64_t seed,
                      const DpgmmOptions& options = {});

enum class BaselineFlag { kOk, kEmpty };

struct BaselineLabel {
  int player_index = 0;
  int label = 0;  // 1 or 2, 0 when unassigned
  BaselineFlag flag = BaselineFlag::kOk;
};

// One label per annotated player, using ground-truth instances.
std::vector<BaselineLabel> baseline_assign(const Scene& scene, std::uint64_t seed,
                                           const DpgmmOptions& options = {});

struct BaselineRow {
  std::string scene_id;
  int player_index = 0;
  Team true_team = Team::kA;
  int predicted_label = 0;
  BaselineFlag flag = BaselineFlag::kOk;
};

void write_baseline_csv(const std::filesystem::path& path, const std::vector<BaselineRow>& rows);

}  // namespace teamemb
