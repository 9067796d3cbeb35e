#include "teamemb/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace teamemb {
namespace {


double bilinear(const auto& get, int h, int w, double x, double y, double outside) {
  if (x < 0 || y < 0 || x > w - 1 || y > h - 1) return outside;
  const int x0 = std::min(static_cast<int>(std::floor(x)), w - 1);
  const int y0 = std::min(static_cast<int>(std::floor(y)), h - 1);
  const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0, fy = y - y0;
  return (1 - fy) * ((1 - fx) * get(y0, x0) + fx * get(y0, x1)) +
         fy * ((1 - fx) * get(y1, x0) + fx * get(y1, x1));
}

}  // namespace

AugmentTransform::AugmentTransform(int height, int width, const AugmentDraw& d)
    : cx_((width - 1) / 2.0),
      cy_((height - 1) / 2.0),
      cos_(std::cos(d.rotation_degrees * std::numbers::pi / 180.0)),
      sin_(std::sin(d.rotation_degrees * std::numbers::pi / 180.0)),
      s_(d.scale),
      mirror_(d.mirror),
      canvas_h_(static_cast<int>(std::lround(d.scale * height))),
      canvas_w_(static_cast<int>(std::lround(d.scale * width))),
      crop_x_(d.crop_x),
      crop_y_(d.crop_y) {
  ccx_ = (canvas_w_ - 1) / 2.0;
  ccy_ = (canvas_h_ - 1) / 2.0;
}

Point AugmentTransform::forward(const Point& p) const {
  double vx = p.x - cx_, vy = p.y - cy_;
  if (mirror_) vx = -vx;
  return {ccx_ + s_ * (cos_ * vx - sin_ * vy) - crop_x_, ccy_ + s_ * (sin_ * vx + cos_ * vy) - crop_y_};
}

Point AugmentTransform::inverse(const Point& q) const {
  const double wx = (q.x + crop_x_ - ccx_) / s_, wy = (q.y + crop_y_ - ccy_) / s_;
  double vx = cos_ * wx + sin_ * wy;
  const double vy = -sin_ * wx + cos_ * wy;
  if (mirror_) vx = -vx;
  return {cx_ + vx, cy_ + vy};
}

AugmentDraw draw_augmentation(int height, int width, const AugmentConfig& c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  AugmentDraw d;
  // Every parameter is drawn whether or not it is enabled, so toggling one
  // stage leaves the others' draws unchanged.
  const bool mirror = unit(rng) < 0.5;
  const double angle = between(-c.max_rotation_degrees, c.max_rotation_degrees);
  const double u = between(c.min_scale, c.max_scale);
  const double dL = between(-c.jitter_bounds.L, c.jitter_bounds.L);
  const double dC = between(-c.jitter_bounds.C, c.jitter_bounds.C);
  const double dh = between(-c.jitter_bounds.h_degrees, c.jitter_bounds.h_degrees);
  const double cx = unit(rng), cy = unit(rng);
  if (c.mirror) d.mirror = mirror;
  if (c.rotate) d.rotation_degrees = angle;
  if (c.scale) d.scale = u * c.crop_size / std::min(height, width);
  if (c.jitter) d.dL = dL, d.dC = dC, d.dh_degrees = dh;
  if (c.crop) {
    const int ch = static_cast<int>(std::lround(d.scale * height));
    const int cw = static_cast<int>(std::lround(d.scale * width));
    // Uniform offset over the valid range; when the canvas is smaller than
    // the crop the range runs from (canvas - crop) to 0.
    auto offset = [&](int canvas, double r) {
      const int lo = std::min(0, canvas - c.crop_size), hi = std::max(0, canvas - c.crop_size);
      return lo + std::min(hi - lo, static_cast<int>(r * (hi - lo + 1)));
    };
    d.crop_x = offset(cw, cx);
    d.crop_y = offset(ch, cy);
  }
  return d;
}

Sample apply_augmentation(const Scene& scene, const AugmentDraw& draw, const AugmentConfig& config) {
  const int h = scene.image.height, w = scene.image.width;
  const AugmentTransform t(h, w, draw);
  const int out_h = config.crop ? config.crop_size : t.canvas_height();
  const int out_w = config.crop ? config.crop_size : t.canvas_width();

  const RgbImage src = (draw.dL != 0 || draw.dC != 0 || draw.dh_degrees != 0)
                           ? color::color_jitter(scene.image, draw.dL, draw.dC, draw.dh_degrees)
                           : scene.image;
  double mean[3] = {0, 0, 0};
  for (std::size_t i = 0; i < src.data.size(); ++i) mean[i % 3] += src.data[i];
  for (double& m : mean) m /= std::max<std::size_t>(1, src.data.size() / 3);

  const SceneMasks masks = compose_scene_masks(scene.players, h, w);
  Sample out;
  out.image = RgbImage(out_h, out_w);
  out.masks = {LabelMap(out_h, out_w), LabelMap(out_h, out_w)};
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x) {
      const Point p = t.inverse({static_cast<double>(x), static_cast<double>(y)});
      std::uint8_t* px = out.image.at(y, x);
      for (int c = 0; c < 3; ++c) {
        const double v = bilinear([&](int yy, int xx) { return double(src.at(yy, xx)[c]); }, h, w,
                                  p.x, p.y, mean[c]);
        px[c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
      const long nx = std::lround(p.x), ny = std::lround(p.y);
      if (nx >= 0 && ny >= 0 && nx < w && ny < h) {
        out.masks.instances.at(y, x) = masks.instances.at(static_cast<int>(ny), static_cast<int>(nx));
      }
      for (std::uint8_t team = 1; team <= 2; ++team) {
        const double v = bilinear(
            [&](int yy, int xx) { return masks.teams.at(yy, xx) == team ? 1.0 : 0.0; }, h, w, p.x,
            p.y, 0.0);
        if (v > 0.5) out.masks.teams.at(y, x) = team;
      }
    }

  for (PlayerAnnotation a : scene.players) {
    a.head = t.forward(a.head);
    a.pelvis = t.forward(a.pelvis);
    a.foot_left = t.forward(a.foot_left);
    a.foot_right = t.forward(a.foot_right);
    out.players.push_back(a);
  }

  out.padding.left = std::max(0, -draw.crop_x);
  out.padding.top = std::max(0, -draw.crop_y);
  out.padding.right = std::max(0, draw.crop_x + out_w - t.canvas_width());
  out.padding.bottom = std::max(0, draw.crop_y + out_h - t.canvas_height());
  return out;
}

Sample augment(const Scene& scene, const AugmentConfig& config, std::mt19937_64& rng) {
  return apply_augmentation(scene, draw_augmentation(scene.image.height, scene.image.width, config, rng),
                            config);
}

Sample full_sample(const Scene& scene) {
  return {scene.image, compose_scene_masks(scene.players, scene.image.height, scene.image.width),
          scene.players, {}};
}

}  // namespace teamemb
