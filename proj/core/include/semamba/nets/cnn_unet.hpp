#pragma once

#include "semamba/nets/network.hpp"

namespace semamba::nets {

// Two 3x3 convolutions, each followed by batch norm and LeakyReLU.
class ConvBlockImpl : public torch::nn::Module {
 public:
  ConvBlockImpl(int64_t in_channels, int64_t out_channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(ConvBlock);

// 1x1 channel reduction, bilinear x2 upsampling, skip concatenation, ConvBlock.
class UpBlockImpl : public torch::nn::Module {
 public:
  UpBlockImpl(int64_t in_channels, int64_t skip_channels, int64_t out_channels);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& skip);

 private:
  torch::nn::Conv2d reduce_{nullptr};
  ConvBlock conv_{nullptr};
};
TORCH_MODULE(UpBlock);

/// Five-level UNet with widths base * {1, 2, 4, 8, 16}.
class CnnUnet : public SegmentationNetwork {
 public:
  explicit CnnUnet(const NetworkSpec& spec);

  ForwardOutput forward(const torch::Tensor& images) override;
  [[nodiscard]] int64_t feature_channels() const override { return spec().base_width; }

 private:
  std::vector<ConvBlock> encoder_;
  std::vector<UpBlock> decoder_;
  torch::nn::Conv2d head_{nullptr};
};

}  // namespace semamba::nets
