#include "teamemb/image.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <memory>

namespace teamemb {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_file(const std::filesystem::path& path, const char* mode) {
  File f(std::fopen(path.c_str(), mode));
  if (!f) throw ImageError("cannot open " + path.string());
  return f;
}

struct PngMessage {
  std::string text;
};

void png_error_fn(png_structp png, png_const_charp msg) {
  static_cast<PngMessage*>(png_get_error_ptr(png))->text = msg;
  png_longjmp(png, 1);
}
void png_warning_fn(png_structp, png_const_charp) {}

struct ReadResult {
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  int height = 0;
  int width = 0;
  std::string problem;  // layout problems found before decoding
};

// Decodes to 8-bit gray or 8-bit RGB depending on `want_rgb`. Palette images
// decode to their indices when `want_rgb` is false. No C++ object is created
// or destroyed between setjmp and the last libpng call.
bool decode_png(std::FILE* f, bool want_rgb, ReadResult* r, PngMessage* msg) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, msg, png_error_fn,
                                           png_warning_fn);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, f);
  png_read_info(png, info);
  r->width = static_cast<int>(png_get_image_width(png, info));
  r->height = static_cast<int>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (want_rgb) {
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
      png_set_expand_gray_1_2_4_to_8(png);
      png_set_gray_to_rgb(png);
    }
  } else {
    png_set_packing(png);
  }
  png_read_update_info(png, info);
  const std::size_t row = png_get_rowbytes(png, info);
  const std::size_t channels = want_rgb ? 3 : 1;
  if (row != static_cast<std::size_t>(r->width) * channels) {
    r->problem = want_rgb ? "unsupported PNG layout" : "expected a single-channel label image";
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  r->pixels.resize(row * r->height);
  r->rows.resize(r->height);
  for (int y = 0; y < r->height; ++y) r->rows[y] = r->pixels.data() + row * y;
  png_read_image(png, r->rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

std::vector<std::uint8_t> read_png_raw(const std::filesystem::path& path, bool want_rgb, int& h,
                                       int& w) {
  File f = open_file(path, "rb");
  auto r = std::make_unique<ReadResult>();
  auto msg = std::make_unique<PngMessage>();
  if (!decode_png(f.get(), want_rgb, r.get(), msg.get())) {
    throw ImageError(path.string() + ": " + (r->problem.empty() ? msg->text : r->problem));
  }
  h = r->height;
  w = r->width;
  return std::move(r->pixels);
}

bool encode_png(std::FILE* f, int h, int w, int color_type, const std::uint8_t* pixels,
                std::size_t row_bytes, const png_color* palette, int palette_size,
                PngMessage* msg) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, msg, png_error_fn,
                                            png_warning_fn);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, f);
  png_set_IHDR(png, info, w, h, 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  if (palette) png_set_PLTE(png, info, palette, palette_size);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) png_write_row(png, pixels + row_bytes * y);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

void write_png_raw(const std::filesystem::path& path, int h, int w, int color_type,
                   const std::uint8_t* pixels, std::size_t row_bytes,
                   const std::vector<png_color>* palette) {
  File f = open_file(path, "wb");
  auto msg = std::make_unique<PngMessage>();
  if (!encode_png(f.get(), h, w, color_type, pixels, row_bytes,
                  palette ? palette->data() : nullptr,
                  palette ? static_cast<int>(palette->size()) : 0, msg.get())) {
    throw ImageError(path.string() + ": " + msg->text);
  }
}

RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P6") throw ImageError(path.string() + ": not a binary PPM");
  int fields[3];
  for (int& v : fields) {
    while (in >> std::ws && in.peek() == '#') in.ignore(1 << 20, '\n');
    if (!(in >> v)) throw ImageError(path.string() + ": malformed PPM header");
  }
  if (fields[2] != 255) throw ImageError(path.string() + ": only 8-bit PPM is supported");
  in.get();
  RgbImage img(fields[1], fields[0]);
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (!in) throw ImageError(path.string() + ": truncated PPM payload");
  return img;
}

}  // namespace

RgbImage::RgbImage(int h, int w, std::array<std::uint8_t, 3> fill)
    : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3) {
  for (std::size_t i = 0; i < data.size(); i += 3) std::copy(fill.begin(), fill.end(), &data[i]);
}

std::size_t LabelMap::count(std::uint8_t value) const {
  return static_cast<std::size_t>(std::count(data.begin(), data.end(), value));
}

Tensor to_tensor(const RgbImage& image) {
  Tensor t({3, image.height, image.width});
  const std::size_t plane = static_cast<std::size_t>(image.height) * image.width;
  for (std::size_t i = 0; i < plane; ++i)
    for (int c = 0; c < 3; ++c) t[c * plane + i] = image.data[i * 3 + c] / 255.0f;
  return t;
}

RgbImage read_image(const std::filesystem::path& path) {
  char magic[2] = {0, 0};
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageError("cannot open " + path.string());
    in.read(magic, 2);
  }
  if (magic[0] == 'P' && magic[1] == '6') return read_ppm(path);
  RgbImage img;
  img.data = read_png_raw(path, true, img.height, img.width);
  return img;
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  write_png_raw(path, image.height, image.width, PNG_COLOR_TYPE_RGB, image.data.data(),
                static_cast<std::size_t>(image.width) * 3, nullptr);
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageError("cannot open " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data.data()),
            static_cast<std::streamsize>(image.data.size()));
}

void write_label_png(const std::filesystem::path& path, const LabelMap& labels,
                     bool with_occupancy_palette) {
  if (!with_occupancy_palette) {
    write_png_raw(path, labels.height, labels.width, PNG_COLOR_TYPE_GRAY, labels.data.data(),
                  labels.width, nullptr);
    return;
  }
  for (std::uint8_t v : labels.data) {
    if (v >= kOccupancyPalette.size()) throw ImageError("occupancy label out of palette range");
  }
  std::vector<png_color> palette;
  for (const auto& c : kOccupancyPalette) palette.push_back({c[0], c[1], c[2]});
  write_png_raw(path, labels.height, labels.width, PNG_COLOR_TYPE_PALETTE, labels.data.data(),
                labels.width, &palette);
}

LabelMap read_label_png(const std::filesystem::path& path) {
  LabelMap m;
  m.data = read_png_raw(path, false, m.height, m.width);
  return m;
}

}  // namespace teamemb
