#include "semamba/nets/cnn_unet.hpp"

namespace semamba::nets {

namespace {

constexpr int kLevels = 5;

torch::nn::Conv2d conv3x3(int64_t in, int64_t out) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1));
}

}  // namespace

ConvBlockImpl::ConvBlockImpl(int64_t in_channels, int64_t out_channels) {
  body_ = register_module(
      "body", torch::nn::Sequential(conv3x3(in_channels, out_channels),
                                    torch::nn::BatchNorm2d(out_channels), torch::nn::LeakyReLU(),
                                    conv3x3(out_channels, out_channels),
                                    torch::nn::BatchNorm2d(out_channels), torch::nn::LeakyReLU()));
}

torch::Tensor ConvBlockImpl::forward(const torch::Tensor& x) { return body_->forward(x); }

UpBlockImpl::UpBlockImpl(int64_t in_channels, int64_t skip_channels, int64_t out_channels) {
  reduce_ = register_module(
      "reduce", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, skip_channels, 1)));
  conv_ = register_module("conv", ConvBlock(2 * skip_channels, out_channels));
}

torch::Tensor UpBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& skip) {
  auto up = torch::nn::functional::interpolate(
      reduce_->forward(x), torch::nn::functional::InterpolateFuncOptions()
                               .scale_factor(std::vector<double>{2.0, 2.0})
                               .mode(torch::kBilinear)
                               .align_corners(true));
  return conv_->forward(torch::cat({skip, up}, 1));
}

CnnUnet::CnnUnet(const NetworkSpec& spec) : SegmentationNetwork(spec) {
  std::vector<int64_t> widths;
  for (int i = 0; i < kLevels; ++i) widths.push_back(spec.base_width << i);

  for (int i = 0; i < kLevels; ++i) {
    const int64_t in = i == 0 ? 1 : widths[i - 1];
    encoder_.push_back(register_module("enc" + std::to_string(i), ConvBlock(in, widths[i])));
  }
  for (int i = kLevels - 1; i > 0; --i) {
    decoder_.push_back(register_module("dec" + std::to_string(kLevels - 1 - i),
                                       UpBlock(widths[i], widths[i - 1], widths[i - 1])));
  }
  head_ = register_module(
      "head", torch::nn::Conv2d(torch::nn::Conv2dOptions(widths[0], spec.classes, 3).padding(1)));
}

ForwardOutput CnnUnet::forward(const torch::Tensor& images) {
  check_input(images);
  std::vector<torch::Tensor> skips;
  auto x = images;
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    if (i > 0) x = torch::max_pool2d(x, 2);
    x = encoder_[i]->forward(x);
    skips.push_back(x);
  }
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    x = decoder_[i]->forward(x, skips[skips.size() - 2 - i]);
  }
  return {head_->forward(x), x};
}

}  // namespace semamba::nets
