#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

namespace semamba::nets {

enum class Variant { CnnUnet, MambaUnet };

[[nodiscard]] std::string_view to_string(Variant v);
/// "cnn-unet" or "mamba-unet"; anything else throws ConfigError.
[[nodiscard]] Variant parse_variant(std::string_view name);

struct NetworkSpec {
  Variant variant = Variant::CnnUnet;
  int64_t classes = 4;
  int64_t input_size = 224;

  // cnn-unet
  int64_t base_width = 16;

  // mamba-unet
  int64_t patch_size = 4;
  int64_t embed_dim = 96;
  std::vector<int64_t> depths{2, 2, 2, 2};
  int64_t state_size = 16;
  int64_t stem_channels = 3;  // grayscale input is replicated to this many channels

  void validate() const;

  [[nodiscard]] nlohmann::json to_json() const;
  /// Rejects unknown keys; missing keys keep their defaults.
  [[nodiscard]] static NetworkSpec from_json(const nlohmann::json& j);

  [[nodiscard]] static NetworkSpec cnn_unet(int64_t classes = 4);
  [[nodiscard]] static NetworkSpec mamba_unet(int64_t classes = 4);

  bool operator==(const NetworkSpec&) const = default;
};

/// Logits at input resolution plus the decoder features that feed the final
/// classification layer.
struct ForwardOutput {
  torch::Tensor logits;    // (batch, classes, H, W)
  torch::Tensor features;  // (batch, channels, H, W)
};

class SegmentationNetwork : public torch::nn::Module {
 public:
  explicit SegmentationNetwork(NetworkSpec spec) : spec_(std::move(spec)) {}

  /// `images` is (batch, 1, input_size, input_size); other shapes throw ShapeError.
  virtual ForwardOutput forward(const torch::Tensor& images) = 0;

  [[nodiscard]] torch::Tensor logits(const torch::Tensor& images) { return forward(images).logits; }

  [[nodiscard]] const NetworkSpec& spec() const { return spec_; }

  /// Channel width of ForwardOutput::features.
  [[nodiscard]] virtual int64_t feature_channels() const = 0;

 protected:
  void check_input(const torch::Tensor& images) const;

 private:
  NetworkSpec spec_;
};

using NetworkPtr = std::shared_ptr<SegmentationNetwork>;

/// Builds and initializes a network. Initialization is a pure function of
/// (spec, seed); the global torch generator is reseeded under a lock.
[[nodiscard]] NetworkPtr build_network(const NetworkSpec& spec, uint64_t seed);

[[nodiscard]] int64_t parameter_count(const torch::nn::Module& module);

/// Parameter totals per top-level child module, in registration order.
[[nodiscard]] std::vector<std::pair<std::string, int64_t>> parameter_breakdown(
    const torch::nn::Module& module);

}  // namespace semamba::nets
