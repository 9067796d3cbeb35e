#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "teamemb/autograd.hpp"
#include "teamemb/checkpoint.hpp"

namespace teamemb {

inline constexpr const char* kArchitectureVersion = "teamnet-cascade-v1";

struct NetConfig {
  int embedding_dim = 5;
  int resolution = 128;
  int high_channels = 16;   // full-resolution branch
  int mid_channels = 32;    // half-resolution branch
  int low_channels = 32;    // quarter-resolution branch
  int fuse_channels = 24;   // fine fusion block

  void validate() const;
};

// Supervised scales, finest first: 1/4, 1/8 and 1/16 of the input.
enum Scale : int { kFine = 0, kMid = 1, kCoarse = 2 };
inline constexpr std::array<int, 3> kScaleFactors{4, 8, 16};

template <typename T>
struct NetOutputs {
  std::array<BasicVar<T>, 3> seg;  // sigmoid probabilities [1,h,w] per scale
  BasicVar<T> fine_logits;         // pre-sigmoid fine segmentation [1,H/4,W/4]
  BasicVar<T> embedding;           // [D,H/4,W/4], linear
};

// Cascade model: three branches at 1, 1/2 and 1/4 input resolution,
// cascade fusion by upsample+add, a global-average-pool context term on the
// coarsest features, and a final 1x1 head emitting 1 + D channels. Hidden
// layers use ELU: plain ReLU leaves whole channels dead at the 4x4 and 8x8
// coarse resolutions, and its kinks spoil finite-difference checks.
template <typename T>
class BasicTeamNet {
 public:
  explicit BasicTeamNet(NetConfig config = {});

  const NetConfig& config() const { return config_; }
  std::vector<BasicVar<T>>& parameters() { return params_; }
  const std::vector<BasicVar<T>>& parameters() const { return params_; }
  const std::vector<std::string>& parameter_names() const { return names_; }
  std::size_t parameter_count() const;

  // He-normal kernels, zero biases.
  void init(std::uint64_t seed);
  void zero_grad();

  // image [3,H,W] with H, W multiples of 16.
  NetOutputs<T> forward(const BasicTensor<T>& image) const;

  template <typename U>
  BasicTeamNet<U> cast() const {
    BasicTeamNet<U> out(config_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      out.parameters()[i] = BasicVar<U>::parameter(params_[i].value().template cast<U>());
    }
    return out;
  }

  std::vector<NamedTensor> state() const;
  void load_state(const std::vector<NamedTensor>& state);

 private:
  struct Conv {
    std::size_t weight;
    std::size_t bias;
    int stride;
    int pad;
  };
  Conv add_conv(const std::string& name, int out_c, int in_c, int k, int stride);
  BasicVar<T> apply(const Conv& conv, const BasicVar<T>& x) const;

  NetConfig config_;
  std::vector<BasicVar<T>> params_;
  std::vector<std::string> names_;

  Conv high1_, high2_;
  Conv mid1_, mid2_;
  Conv low1_, low2_, low3_, context_;
  Conv low_to_mid_, mid_proj_;
  Conv mid_to_fine_, high_proj_;
  Conv fine1_, fine2_;
  Conv head_coarse_, head_mid_, head_fine_;
};

using TeamNet = BasicTeamNet<float>;
using TeamNetD = BasicTeamNet<double>;

extern template class BasicTeamNet<float>;
extern template class BasicTeamNet<double>;

// Rejects spatial sizes the cascade cannot divide evenly.
void check_input_dims(int height, int width);

// Full-resolution inference output. Segmentation logits are bilinearly
// upsampled before the sigmoid; embeddings use nearest-neighbour upsampling.
struct Inference {
  Tensor seg;        // [1,H,W] in (0,1)
  Tensor embedding;  // [D,H,W]
};

Inference infer(const TeamNet& model, const Tensor& image);

// Checkpoint plus JSON sidecar (`<stem>.json`) describing the architecture.
void save_model(const TeamNet& model, const std::filesystem::path& checkpoint);
TeamNet load_model(const std::filesystem::path& checkpoint);

}  // namespace teamemb
