#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "teamemb/tensor.hpp"

namespace teamemb {

struct Pixel {
  int y = 0;
  int x = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 8-bit interleaved RGB.
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int h, int w, std::array<std::uint8_t, 3> fill = {0, 0, 0});

  std::uint8_t* at(int y, int x) { return &data[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* at(int y, int x) const {
    return &data[(static_cast<std::size_t>(y) * width + x) * 3];
  }
};

// One byte per pixel: masks (0/1), occupancy labels (0/1/2) or instance ids.
struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  LabelMap() = default;
  LabelMap(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

  std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
  bool contains(int y, int x) const { return y >= 0 && y < height && x >= 0 && x < width; }
  std::size_t count(std::uint8_t value) const;
  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

// [3,H,W] with values in [0,1].
Tensor to_tensor(const RgbImage& image);

// PNG (8-bit RGB or RGBA, alpha dropped) or binary PPM (P6), chosen by magic.
RgbImage read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbImage& image);
void write_ppm(const std::filesystem::path& path, const RgbImage& image);

// Occupancy palette: background black, team 1 red, team 2 blue.
inline constexpr std::array<std::array<std::uint8_t, 3>, 3> kOccupancyPalette{
    {{0, 0, 0}, {255, 0, 0}, {0, 0, 255}}};

// Single-channel 8-bit PNG. With a palette the file is indexed colour, so the
// stored byte is still the raw label.
void write_label_png(const std::filesystem::path& path, const LabelMap& labels,
                     bool with_occupancy_palette = false);
LabelMap read_label_png(const std::filesystem::path& path);

}  // namespace teamemb
