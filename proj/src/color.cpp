#include "teamemb/color.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace teamemb::color {
namespace {

// Same matrix and white point as scikit-image, so reference values agree.
constexpr double kXyzFromRgb[3][3] = {{0.412453, 0.357580, 0.180423},
                                      {0.212671, 0.715160, 0.072169},
                                      {0.019334, 0.119193, 0.950227}};
constexpr double kWhite[3] = {0.95047, 1.0, 1.08883};

// Inverse of kXyzFromRgb, computed once.
struct Inverse {
  double m[3][3];
  Inverse() {
    const auto& a = kXyzFromRgb;
    const double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                       a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                       a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    m[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det;
    m[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det;
    m[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det;
    m[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / det;
    m[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det;
    m[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det;
    m[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / det;
    m[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / det;
    m[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det;
  }
};
const Inverse kRgbFromXyz;

double to_linear(double c) {
  return c > 0.04045 ? std::pow((c + 0.055) / 1.055, 2.4) : c / 12.92;
}
double to_gamma(double c) {
  return c > 0.0031308 ? 1.055 * std::pow(c, 1.0 / 2.4) - 0.055 : 12.92 * c;
}

constexpr double kEpsilon = 216.0 / 24389.0;
constexpr double kKappa = 24389.0 / 27.0;

double f(double t) { return t > kEpsilon ? std::cbrt(t) : (kKappa * t + 16.0) / 116.0; }
double f_inv(double t) {
  const double t3 = t * t * t;
  return t3 > kEpsilon ? t3 : (116.0 * t - 16.0) / kKappa;
}

}  // namespace

namespace {

Lab lab_from_linear(const double lin[3]) {
  double xyz[3];
  for (int i = 0; i < 3; ++i) {
    xyz[i] = (kXyzFromRgb[i][0] * lin[0] + kXyzFromRgb[i][1] * lin[1] + kXyzFromRgb[i][2] * lin[2]) /
             kWhite[i];
  }
  const double fx = f(xyz[0]), fy = f(xyz[1]), fz = f(xyz[2]);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

}  // namespace

Lab srgb_to_lab(const RgbF& rgb) {
  const double lin[3] = {to_linear(rgb[0]), to_linear(rgb[1]), to_linear(rgb[2])};
  return lab_from_linear(lin);
}

Lab srgb8_to_lab(const Rgb8& rgb) {
  static const auto linear = [] {
    std::array<double, 256> t{};
    for (int i = 0; i < 256; ++i) t[i] = to_linear(i / 255.0);
    return t;
  }();
  const double lin[3] = {linear[rgb[0]], linear[rgb[1]], linear[rgb[2]]};
  return lab_from_linear(lin);
}

RgbF lab_to_srgb(const Lab& lab) {
  const double fy = (lab.L + 16.0) / 116.0;
  const double fx = fy + lab.a / 500.0;
  const double fz = fy - lab.b / 200.0;
  const double xyz[3] = {f_inv(fx) * kWhite[0], f_inv(fy) * kWhite[1], f_inv(fz) * kWhite[2]};
  RgbF out;
  for (int i = 0; i < 3; ++i) {
    const double lin = kRgbFromXyz.m[i][0] * xyz[0] + kRgbFromXyz.m[i][1] * xyz[1] +
                       kRgbFromXyz.m[i][2] * xyz[2];
    out[i] = lin < 0 ? -to_gamma(-lin) : to_gamma(lin);
  }
  return out;
}

Rgb8 lab_to_srgb8(const Lab& lab) {
  const RgbF c = lab_to_srgb(lab);
  Rgb8 out;
  for (int i = 0; i < 3; ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(c[i], 0.0, 1.0) * 255.0));
  }
  return out;
}

LCh lab_to_lch(const Lab& lab) {
  double h = std::atan2(lab.b, lab.a);
  if (h < 0) h += 2 * std::numbers::pi;
  return {lab.L, std::hypot(lab.a, lab.b), h};
}

Lab lch_to_lab(const LCh& lch) {
  return {lch.L, lch.C * std::cos(lch.h), lch.C * std::sin(lch.h)};
}

double delta_e(const Lab& p, const Lab& q) {
  return std::sqrt((p.L - q.L) * (p.L - q.L) + (p.a - q.a) * (p.a - q.a) +
                   (p.b - q.b) * (p.b - q.b));
}

Lab jitter_lab(const Lab& lab, double dL, double dC, double dh_degrees) {
  LCh lch = lab_to_lch(lab);
  lch.L += dL;
  lch.C = std::max(0.0, lch.C + dC);
  lch.h += dh_degrees * std::numbers::pi / 180.0;
  return lch_to_lab(lch);
}

RgbImage color_jitter(const RgbImage& image, double dL, double dC, double dh_degrees) {
  // Same arithmetic as jitter_lab + lab_to_srgb8, with the hue turn done as a
  // rotation of (a, b) and the gamma encoding as a search over the linear
  // values at which each 8-bit code starts.
  static const auto code_start = [] {
    std::array<double, 255> t{};
    for (int i = 0; i < 255; ++i) t[i] = to_linear((i + 0.5) / 255.0);
    return t;
  }();
  // First candidate code for each of 4096 equal slices of [0, 1].
  constexpr int kSlices = 4096;
  static const auto first_code = [] {
    std::array<std::uint8_t, kSlices> t{};
    for (int j = 0; j < kSlices; ++j) {
      t[j] = static_cast<std::uint8_t>(
          std::upper_bound(code_start.begin(), code_start.end(), j / double(kSlices)) -
          code_start.begin());
    }
    return t;
  }();
  auto encode = [&](double lin) -> std::uint8_t {
    if (!(lin > 0)) return 0;
    if (lin >= 1) return 255;
    int code = first_code[static_cast<int>(lin * kSlices)];
    while (code < 255 && code_start[code] <= lin) ++code;
    return static_cast<std::uint8_t>(code);
  };
  const double turn = dh_degrees * std::numbers::pi / 180.0;
  const double c = std::cos(turn), s = std::sin(turn);
  RgbImage out = image;
  for (std::size_t i = 0; i < out.data.size(); i += 3) {
    const Lab lab = srgb8_to_lab({out.data[i], out.data[i + 1], out.data[i + 2]});
    const double chroma = std::hypot(lab.a, lab.b);
    const double scaled = std::max(0.0, chroma + dC);
    double a, b;
    if (chroma > 0) {
      const double k = scaled / chroma;
      a = k * (lab.a * c - lab.b * s);
      b = k * (lab.a * s + lab.b * c);
    } else {
      a = scaled * c;
      b = scaled * s;
    }
    const double fy = (lab.L + dL + 16.0) / 116.0;
    const double xyz[3] = {f_inv(fy + a / 500.0) * kWhite[0], f_inv(fy) * kWhite[1],
                           f_inv(fy - b / 200.0) * kWhite[2]};
    for (int ch = 0; ch < 3; ++ch) {
      const double lin = kRgbFromXyz.m[ch][0] * xyz[0] + kRgbFromXyz.m[ch][1] * xyz[1] +
                         kRgbFromXyz.m[ch][2] * xyz[2];
      out.data[i + ch] = encode(lin);
    }
  }
  return out;
}

}  // namespace teamemb::color
