#pragma once

#include <random>
#include <vector>

#include "teamemb/color.hpp"
#include "teamemb/scene.hpp"

namespace teamemb {

struct AugmentConfig {
  bool mirror = true;
  bool rotate = true;
  bool scale = true;
  bool jitter = true;
  bool crop = true;
  int crop_size = 128;
  double max_rotation_degrees = 10.0;
  double min_scale = 2.0 / 3.0;  // of crop_size, for the shorter image side
  double max_scale = 1.5;
  color::JitterBounds jitter_bounds;
};

// One concrete draw of the random parameters.
struct AugmentDraw {
  bool mirror = false;
  double rotation_degrees = 0.0;
  double scale = 1.0;  // s in P = c' + s R F (p - c)
  double dL = 0.0, dC = 0.0, dh_degrees = 0.0;
  int crop_x = 0, crop_y = 0;  // crop origin on the scaled canvas; negative when padded
};

// Crop area lying outside the scaled canvas, in output pixels.
struct Padding {
  int left = 0, top = 0, right = 0, bottom = 0;
  bool any() const { return left || top || right || bottom; }
};

struct Sample {
  RgbImage image;
  SceneMasks masks;
  std::vector<PlayerAnnotation> players;  // keypoints in output coordinates
  Padding padding;
};

// Geometry of a draw: source point -> output point and back.
class AugmentTransform {
 public:
  AugmentTransform(int height, int width, const AugmentDraw& draw);
  int canvas_height() const { return canvas_h_; }
  int canvas_width() const { return canvas_w_; }
  Point forward(const Point& p) const;
  Point inverse(const Point& q) const;

 private:
  double cx_, cy_, ccx_, ccy_;
  double cos_, sin_, s_;
  bool mirror_;
  int canvas_h_, canvas_w_;
  int crop_x_, crop_y_;
};

AugmentDraw draw_augmentation(int height, int width, const AugmentConfig& config,
                              std::mt19937_64& rng);

// Image: bilinear. Instance ids: nearest. Team masks: bilinear per team, kept
// where > 0.5. Points outside the source take the image's mean colour (or 0 in
// masks). With crop disabled the output is the whole scaled canvas.
Sample apply_augmentation(const Scene& scene, const AugmentDraw& draw, const AugmentConfig& config);

Sample augment(const Scene& scene, const AugmentConfig& config, std::mt19937_64& rng);

// Unaugmented sample of a full scene.
Sample full_sample(const Scene& scene);

}  // namespace teamemb
