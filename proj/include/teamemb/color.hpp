#pragma once

#include <array>
#include <cstdint>

#include "teamemb/image.hpp"

namespace teamemb::color {

struct Lab {
  double L = 0, a = 0, b = 0;
};
struct LCh {
  double L = 0, C = 0, h = 0;  // h in radians
};

using Rgb8 = std::array<std::uint8_t, 3>;
using RgbF = std::array<double, 3>;  // sRGB, nominally [0,1], may leave the gamut

// sRGB (D65, 2° observer) <-> CIE L*a*b*.
Lab srgb_to_lab(const RgbF& rgb);
Lab srgb8_to_lab(const Rgb8& rgb);
RgbF lab_to_srgb(const Lab& lab);  // unclamped
Rgb8 lab_to_srgb8(const Lab& lab);  // clipped to the gamut and rounded

LCh lab_to_lch(const Lab& lab);
Lab lch_to_lab(const LCh& lch);

// CIE76 colour difference.
double delta_e(const Lab& p, const Lab& q);

// Offsets in L*, C* and hue (degrees), before any gamut clipping. Chroma is
// floored at 0.
Lab jitter_lab(const Lab& lab, double dL, double dC, double dh_degrees);

struct JitterBounds {
  double L = 10.0;
  double C = 7.0;
  double h_degrees = 30.0;
};

// Per-pixel jitter of a whole image, clipped back to sRGB.
RgbImage color_jitter(const RgbImage& image, double dL, double dC, double dh_degrees);

}  // namespace teamemb::color
