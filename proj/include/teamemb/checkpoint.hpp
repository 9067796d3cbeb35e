#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "teamemb/tensor.hpp"

namespace teamemb {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Checkpoint layout, all integers u32 little-endian:
//   "TEMB" version count { name_len name rank dims... f32 payload }*
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

// Single-tensor dump with the same envelope: "TDMP" version rank dims payload.
void write_dump(std::ostream& out, const Tensor& tensor);
Tensor read_dump(std::istream& in);
void save_dump(const std::filesystem::path& path, const Tensor& tensor);
Tensor load_dump(const std::filesystem::path& path);

}  // namespace teamemb
