#include "teamemb/net.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "teamemb/ops.hpp"

namespace teamemb {

void NetConfig::validate() const {
  if (embedding_dim < 1 || embedding_dim > 8) {
    throw std::invalid_argument("embedding dimension must lie in 1..8");
  }
  if (resolution < 16 || resolution % 16 != 0) {
    throw std::invalid_argument("working resolution must be a positive multiple of 16");
  }
  if (high_channels < 1 || mid_channels < 1 || low_channels < 1 || fuse_channels < 1) {
    throw std::invalid_argument("branch widths must be positive");
  }
}

void check_input_dims(int height, int width) {
  if (height <= 0 || width <= 0 || height % 16 != 0 || width % 16 != 0) {
    const int ph = (16 - height % 16) % 16;
    const int pw = (16 - width % 16) % 16;
    throw DimensionError("input " + std::to_string(height) + "x" + std::to_string(width) +
                         " must be a multiple of 16 in both dimensions; pad by " +
                         std::to_string(ph) + " rows and " + std::to_string(pw) + " columns");
  }
}

template <typename T>
BasicTeamNet<T>::BasicTeamNet(NetConfig config) : config_(config) {
  config_.validate();
  const int hc = config_.high_channels;
  const int mc = config_.mid_channels;
  const int lc = config_.low_channels;
  const int fc = config_.fuse_channels;

  high1_ = add_conv("high.conv1", hc / 2 > 0 ? hc / 2 : 1, 3, 3, 2);
  high2_ = add_conv("high.conv2", hc, params_[high1_.weight].value().dim(0), 3, 2);
  mid1_ = add_conv("mid.conv1", mc / 2 > 0 ? mc / 2 : 1, 3, 3, 2);
  mid2_ = add_conv("mid.conv2", mc, params_[mid1_.weight].value().dim(0), 3, 2);
  low1_ = add_conv("low.conv1", lc / 2 > 0 ? lc / 2 : 1, 3, 3, 2);
  low2_ = add_conv("low.conv2", lc, params_[low1_.weight].value().dim(0), 3, 2);
  low3_ = add_conv("low.conv3", lc, lc, 3, 1);
  context_ = add_conv("low.context", lc, lc, 1, 1);
  low_to_mid_ = add_conv("fuse_mid.low", mc, lc, 1, 1);
  mid_proj_ = add_conv("fuse_mid.mid", mc, mc, 1, 1);
  mid_to_fine_ = add_conv("fuse_fine.mid", fc, mc, 1, 1);
  high_proj_ = add_conv("fuse_fine.high", fc, hc, 1, 1);
  fine1_ = add_conv("fine.conv1", fc, fc, 3, 1);
  fine2_ = add_conv("fine.conv2", fc, fc, 3, 1);
  head_coarse_ = add_conv("head.coarse", 1, lc, 1, 1);
  head_mid_ = add_conv("head.mid", 1, mc, 1, 1);
  head_fine_ = add_conv("head.fine", 1 + config_.embedding_dim, fc, 1, 1);
}

template <typename T>
typename BasicTeamNet<T>::Conv BasicTeamNet<T>::add_conv(const std::string& name, int out_c,
                                                         int in_c, int k, int stride) {
  Conv conv{params_.size(), params_.size() + 1, stride, k / 2};
  params_.push_back(BasicVar<T>::parameter(BasicTensor<T>({out_c, in_c, k, k})));
  names_.push_back(name + ".weight");
  params_.push_back(BasicVar<T>::parameter(BasicTensor<T>({out_c})));
  names_.push_back(name + ".bias");
  return conv;
}

template <typename T>
std::size_t BasicTeamNet<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value().size();
  return n;
}

template <typename T>
void BasicTeamNet<T>::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& t = params_[i].mutable_value();
    if (t.rank() == 1) {
      for (T& v : t.data()) v = T(0);
      continue;
    }
    const double fan_in = static_cast<double>(t.dim(1)) * t.dim(2) * t.dim(3);
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
    for (T& v : t.data()) v = static_cast<T>(normal(rng));
  }
}

template <typename T>
void BasicTeamNet<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template <typename T>
BasicVar<T> BasicTeamNet<T>::apply(const Conv& conv, const BasicVar<T>& x) const {
  return ops::conv2d(x, params_[conv.weight], params_[conv.bias], conv.stride, conv.pad);
}

template <typename T>
NetOutputs<T> BasicTeamNet<T>::forward(const BasicTensor<T>& image) const {
  require_rank(image, 3, "TeamNet input");
  if (image.dim(0) != 3) throw DimensionError("TeamNet input must have 3 channels");
  check_input_dims(image.dim(1), image.dim(2));

  using ops::add;
  const auto act = [](const BasicVar<T>& v) { return ops::elu(v); };
  const auto bilinear = ops::UpsampleMode::kBilinear;
  const BasicVar<T> x = BasicVar<T>::constant(image);

  // Quarter-resolution branch with global context.
  BasicVar<T> low = act(apply(low1_, ops::avg_pool(x, 4)));
  low = act(apply(low2_, low));
  low = act(apply(low3_, low));
  const BasicVar<T> context = act(apply(context_, ops::global_avg_pool(low)));
  low = ops::add_channelwise(low, context);

  // Half-resolution branch fused with the upsampled coarse features.
  BasicVar<T> mid = act(apply(mid1_, ops::avg_pool(x, 2)));
  mid = act(apply(mid2_, mid));
  mid = act(add(ops::upsample(apply(low_to_mid_, low), 2, bilinear), apply(mid_proj_, mid)));

  // Full-resolution branch fused with the upsampled mid features.
  BasicVar<T> high = act(apply(high1_, x));
  high = act(apply(high2_, high));
  BasicVar<T> fine =
      act(add(ops::upsample(apply(mid_to_fine_, mid), 2, bilinear), apply(high_proj_, high)));
  fine = act(apply(fine1_, fine));
  fine = act(apply(fine2_, fine));

  const BasicVar<T> head = apply(head_fine_, fine);
  NetOutputs<T> out;
  out.fine_logits = ops::slice_channels(head, 0, 1);
  out.embedding = ops::slice_channels(head, 1, 1 + config_.embedding_dim);
  out.seg[kFine] = ops::sigmoid(out.fine_logits);
  out.seg[kMid] = ops::sigmoid(apply(head_mid_, mid));
  out.seg[kCoarse] = ops::sigmoid(apply(head_coarse_, low));
  return out;
}

template <typename T>
std::vector<NamedTensor> BasicTeamNet<T>::state() const {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.push_back({names_[i], params_[i].value().template cast<float>()});
  }
  return out;
}

template <typename T>
void BasicTeamNet<T>::load_state(const std::vector<NamedTensor>& state) {
  if (state.size() != params_.size()) {
    throw FormatError("checkpoint holds " + std::to_string(state.size()) +
                      " tensors, model expects " + std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (state[i].name != names_[i] || state[i].tensor.shape() != params_[i].value().shape()) {
      throw FormatError("checkpoint tensor '" + state[i].name + "' does not match '" +
                        names_[i] + "' " + shape_string(params_[i].value().shape()));
    }
    params_[i] = BasicVar<T>::parameter(state[i].tensor.template cast<T>());
  }
}

template class BasicTeamNet<float>;
template class BasicTeamNet<double>;

Inference infer(const TeamNet& model, const Tensor& image) {
  const NetOutputs<float> out = model.forward(image);
  Inference result;
  result.seg = ops::sigmoid(ops::upsample(out.fine_logits.value(), kScaleFactors[kFine],
                                          ops::UpsampleMode::kBilinear));
  result.embedding =
      ops::upsample(out.embedding.value(), kScaleFactors[kFine], ops::UpsampleMode::kNearest);
  return result;
}

namespace {
std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint) {
  std::filesystem::path p = checkpoint;
  p.replace_extension(".json");
  return p;
}
}  // namespace

void save_model(const TeamNet& model, const std::filesystem::path& checkpoint) {
  save_checkpoint(checkpoint, model.state());
  const NetConfig& c = model.config();
  nlohmann::json meta = {{"architecture", kArchitectureVersion},
                         {"embedding_dim", c.embedding_dim},
                         {"resolution", c.resolution},
                         {"high_channels", c.high_channels},
                         {"mid_channels", c.mid_channels},
                         {"low_channels", c.low_channels},
                         {"fuse_channels", c.fuse_channels}};
  std::ofstream out(sidecar_path(checkpoint));
  if (!out) throw FormatError("cannot write model metadata next to " + checkpoint.string());
  out << meta.dump(2) << '\n';
}

TeamNet load_model(const std::filesystem::path& checkpoint) {
  std::ifstream in(sidecar_path(checkpoint));
  if (!in) throw FormatError("missing model metadata " + sidecar_path(checkpoint).string());
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed model metadata: ") + e.what());
  }
  if (meta.value("architecture", std::string()) != kArchitectureVersion) {
    throw FormatError("unsupported architecture in model metadata");
  }
  NetConfig c;
  c.embedding_dim = meta.at("embedding_dim").get<int>();
  c.resolution = meta.at("resolution").get<int>();
  c.high_channels = meta.at("high_channels").get<int>();
  c.mid_channels = meta.at("mid_channels").get<int>();
  c.low_channels = meta.at("low_channels").get<int>();
  c.fuse_channels = meta.at("fuse_channels").get<int>();
  TeamNet model(c);
  model.load_state(load_checkpoint(checkpoint));
  return model;
}

}  // namespace teamemb
