#include "semamba/nets/mamba_unet.hpp"

#include "semamba/error.hpp"

namespace semamba::nets {

PatchMergingImpl::PatchMergingImpl(int64_t dim) {
  norm_ = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({4 * dim})));
  reduction_ = register_module(
      "reduction", torch::nn::Linear(torch::nn::LinearOptions(4 * dim, 2 * dim).bias(false)));
}

torch::Tensor PatchMergingImpl::forward(const torch::Tensor& x) {
  using torch::indexing::Slice;
  auto x0 = x.index({Slice(), Slice(0, torch::indexing::None, 2), Slice(0, torch::indexing::None, 2)});
  auto x1 = x.index({Slice(), Slice(1, torch::indexing::None, 2), Slice(0, torch::indexing::None, 2)});
  auto x2 = x.index({Slice(), Slice(0, torch::indexing::None, 2), Slice(1, torch::indexing::None, 2)});
  auto x3 = x.index({Slice(), Slice(1, torch::indexing::None, 2), Slice(1, torch::indexing::None, 2)});
  return reduction_->forward(norm_->forward(torch::cat({x0, x1, x2, x3}, -1)));
}

PatchExpandImpl::PatchExpandImpl(int64_t dim, int64_t scale, int64_t out_dim)
    : scale_(scale), out_dim_(out_dim) {
  expand_ = register_module(
      "expand",
      torch::nn::Linear(torch::nn::LinearOptions(dim, scale * scale * out_dim).bias(false)));
  norm_ = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({out_dim})));
}

torch::Tensor PatchExpandImpl::forward(const torch::Tensor& x) {
  const int64_t b = x.size(0);
  const int64_t h = x.size(1);
  const int64_t w = x.size(2);
  auto y = expand_->forward(x)
               .view({b, h, w, scale_, scale_, out_dim_})
               .permute({0, 1, 3, 2, 4, 5})
               .reshape({b, h * scale_, w * scale_, out_dim_});
  return norm_->forward(y);
}

MambaUnet::MambaUnet(const NetworkSpec& spec) : SegmentationNetwork(spec) {
  const auto stages = static_cast<int64_t>(spec.depths.size());
  const int64_t e = spec.embed_dim;
  auto block_options = [&](int64_t dim) {
    ssm::VSSBlockOptions o;
    o.dim = dim;
    o.state_size = spec.state_size;
    return o;
  };
  auto make_stage = [&](int64_t dim, int64_t depth) {
    torch::nn::ModuleList list;
    for (int64_t d = 0; d < depth; ++d) list->push_back(ssm::VSSBlock(block_options(dim)));
    return list;
  };

  patch_embed_ = register_module(
      "patch_embed", torch::nn::Conv2d(torch::nn::Conv2dOptions(spec.stem_channels, e,
                                                                spec.patch_size)
                                           .stride(spec.patch_size)));
  for (int64_t i = 0; i < stages; ++i) {
    const int64_t dim = e << i;
    encoder_.push_back(
        register_module("enc" + std::to_string(i), make_stage(dim, spec.depths[i])));
    if (i + 1 < stages) {
      merging_.push_back(register_module("merge" + std::to_string(i), PatchMerging(dim)));
    }
  }
  const int64_t bottom = e << (stages - 1);
  norm_ = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({bottom})));

  if (stages > 1) {
    expand_.push_back(register_module("expand0", PatchExpand(bottom, 2, bottom / 2)));
  }
  for (int64_t i = 1; i < stages; ++i) {
    const int64_t level = stages - 1 - i;
    const int64_t dim = e << level;
    concat_back_.push_back(register_module("concat" + std::to_string(i),
                                           torch::nn::Linear(2 * dim, dim)));
    decoder_.push_back(
        register_module("dec" + std::to_string(i), make_stage(dim, spec.depths[level])));
    if (i + 1 < stages) {
      expand_.push_back(
          register_module("expand" + std::to_string(i), PatchExpand(dim, 2, dim / 2)));
    }
  }
  norm_up_ = register_module("norm_up", torch::nn::LayerNorm(torch::nn::LayerNormOptions({e})));
  final_expand_ = register_module("final_expand", PatchExpand(e, spec.patch_size, e));
  head_ = register_module(
      "head", torch::nn::Conv2d(torch::nn::Conv2dOptions(e, spec.classes, 1).bias(false)));
}

ForwardOutput MambaUnet::forward(const torch::Tensor& images) {
  check_input(images);
  const auto& s = spec();
  auto stem = s.stem_channels > 1 ? images.repeat({1, s.stem_channels, 1, 1}) : images;
  auto x = patch_embed_->forward(stem).permute({0, 2, 3, 1});  // channels-last

  std::vector<torch::Tensor> skips;
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    skips.push_back(x);
    for (const auto& block : *encoder_[i]) x = block->as<ssm::VSSBlock>()->forward(x);
    if (i < merging_.size()) x = merging_[i]->forward(x);
  }
  x = norm_->forward(x);

  if (!expand_.empty()) x = expand_[0]->forward(x);
  for (std::size_t i = 1; i < encoder_.size(); ++i) {
    x = torch::cat({x, skips[encoder_.size() - 1 - i]}, -1);
    x = concat_back_[i - 1]->forward(x);
    for (const auto& block : *decoder_[i - 1]) x = block->as<ssm::VSSBlock>()->forward(x);
    if (i < expand_.size()) x = expand_[i]->forward(x);
  }
  x = norm_up_->forward(x);
  auto features = final_expand_->forward(x).permute({0, 3, 1, 2}).contiguous();
  return {head_->forward(features), features};
}

}  // namespace semamba::nets
