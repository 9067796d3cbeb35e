#include "teamemb/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace teamemb {
namespace {

constexpr std::array<char, 4> kCheckpointMagic{'T', 'E', 'M', 'B'};
constexpr std::array<char, 4> kDumpMagic{'T', 'D', 'M', 'P'};
constexpr std::uint32_t kMaxRank = 8;

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("unexpected end of file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32_array(std::ostream& out, std::span<const float> values) {
  for (float v : values) put_u32(out, std::bit_cast<std::uint32_t>(v));
}

void get_f32_array(std::istream& in, std::span<float> values) {
  for (float& v : values) v = std::bit_cast<float>(get_u32(in));
}

void expect_magic(std::istream& in, const std::array<char, 4>& magic) {
  std::array<char, 4> got{};
  if (!in.read(got.data(), 4) || got != magic) {
    throw FormatError(std::string("bad magic, expected ") + std::string(magic.data(), 4));
  }
}

void put_shape(std::ostream& out, const Shape& shape) {
  put_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (int d : shape) put_u32(out, static_cast<std::uint32_t>(d));
}

Shape get_shape(std::istream& in) {
  const std::uint32_t rank = get_u32(in);
  if (rank > kMaxRank) throw FormatError("tensor rank " + std::to_string(rank) + " too large");
  Shape shape(rank);
  for (auto& d : shape) {
    const std::uint32_t v = get_u32(in);
    if (v > (1u << 28)) throw FormatError("tensor dimension too large");
    d = static_cast<int>(v);
  }
  return shape;
}

}  // namespace

void write_checkpoint(std::ostream& out, std::span<const NamedTensor> tensors) {
  out.write(kCheckpointMagic.data(), 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& nt : tensors) {
    put_u32(out, static_cast<std::uint32_t>(nt.name.size()));
    out.write(nt.name.data(), static_cast<std::streamsize>(nt.name.size()));
    put_shape(out, nt.tensor.shape());
    put_f32_array(out, nt.tensor.data());
  }
  if (!out) throw FormatError("write failed");
}

std::vector<NamedTensor> read_checkpoint(std::istream& in) {
  expect_magic(in, kCheckpointMagic);
  const std::uint32_t version = get_u32(in);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = get_u32(in);
  std::vector<NamedTensor> result;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = get_u32(in);
    if (name_len > 4096) throw FormatError("parameter name too long");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw FormatError("unexpected end of file");
    Tensor t(get_shape(in));
    get_f32_array(in, t.data());
    result.push_back({std::move(name), std::move(t)});
  }
  return result;
}

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, tensors);
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_checkpoint(in);
}

void write_dump(std::ostream& out, const Tensor& tensor) {
  out.write(kDumpMagic.data(), 4);
  put_u32(out, kCheckpointVersion);
  put_shape(out, tensor.shape());
  put_f32_array(out, tensor.data());
  if (!out) throw FormatError("write failed");
}

Tensor read_dump(std::istream& in) {
  expect_magic(in, kDumpMagic);
  const std::uint32_t version = get_u32(in);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported dump version " + std::to_string(version));
  }
  Tensor t(get_shape(in));
  get_f32_array(in, t.data());
  return t;
}

void save_dump(const std::filesystem::path& path, const Tensor& tensor) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_dump(out, tensor);
}

Tensor load_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_dump(in);
}

}  // namespace teamemb
