#pragma once

#include "semamba/nets/network.hpp"
#include "semamba/ssm/vss_block.hpp"

namespace semamba::nets {

// 2x2 neighbourhood concatenation, LayerNorm(4C), Linear(4C -> 2C).
// Channels-last in and out.
class PatchMergingImpl : public torch::nn::Module {
 public:
  explicit PatchMergingImpl(int64_t dim);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::LayerNorm norm_{nullptr};
  torch::nn::Linear reduction_{nullptr};
};
TORCH_MODULE(PatchMerging);

// Linear(C -> scale^2 * C / scale_div) then pixel shuffle by `scale` and
// LayerNorm on the output width. scale 2 halves the width (decoder
// upsampling); the final stage uses scale = patch size and keeps the width.
class PatchExpandImpl : public torch::nn::Module {
 public:
  PatchExpandImpl(int64_t dim, int64_t scale, int64_t out_dim);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  int64_t scale_;
  int64_t out_dim_;
  torch::nn::Linear expand_{nullptr};
  torch::nn::LayerNorm norm_{nullptr};
};
TORCH_MODULE(PatchExpand);

/// U-shaped network of VSS blocks: patch embedding, len(depths) encoder
/// stages joined by patch merging, a mirrored decoder with patch expanding
/// and concatenate-then-project skips, final patch-size expansion, and a
/// bias-free 1x1 classification head.
class MambaUnet : public SegmentationNetwork {
 public:
  explicit MambaUnet(const NetworkSpec& spec);

  ForwardOutput forward(const torch::Tensor& images) override;
  [[nodiscard]] int64_t feature_channels() const override { return spec().embed_dim; }

 private:
  torch::nn::Conv2d patch_embed_{nullptr};
  std::vector<torch::nn::ModuleList> encoder_;
  std::vector<PatchMerging> merging_;
  torch::nn::LayerNorm norm_{nullptr};
  std::vector<PatchExpand> expand_;           // expand_[i] runs after decoder stage i
  std::vector<torch::nn::Linear> concat_back_;  // index i-1 for decoder stage i >= 1
  std::vector<torch::nn::ModuleList> decoder_;  // index i-1 for decoder stage i >= 1
  torch::nn::LayerNorm norm_up_{nullptr};
  PatchExpand final_expand_{nullptr};
  torch::nn::Conv2d head_{nullptr};
};

}  // namespace semamba::nets
