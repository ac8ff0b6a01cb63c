#pragma once

#include <torch/torch.h>

#include "semamba/ssm/cross_scan.hpp"
#include "semamba/ssm/ssm.hpp"

namespace semamba::ssm {

struct VSSBlockOptions {
  int64_t dim = 96;
  int64_t state_size = 16;
  int64_t expand = 2;
  int64_t conv_kernel = 3;
  int64_t dt_rank = 0;  // 0 -> ceil(dim / 16)
  Discretization discretization = Discretization::FirstOrder;
  MergeReduction reduction = MergeReduction::Mean;

  [[nodiscard]] int64_t inner() const { return expand * dim; }
  [[nodiscard]] int64_t rank() const { return dt_rank > 0 ? dt_rank : (dim + 15) / 16; }
};

/// Visual Mamba block operating on channels-last maps (batch, H, W, dim):
///
///   x + out_proj( out_norm(SS2D(silu(dwconv(in_x)))) * silu(gate) )
///
/// where (in_x, gate) = in_proj(norm(x)) and SS2D runs one selective scan per
/// cross-scan direction, each with its own B/C/delta projections.
class VSSBlockImpl : public torch::nn::Module {
 public:
  explicit VSSBlockImpl(const VSSBlockOptions& options);

  torch::Tensor forward(const torch::Tensor& x);

  /// Scan core on a channels-first inner map (batch, inner, H, W).
  torch::Tensor scan_core(const torch::Tensor& x);

  [[nodiscard]] const VSSBlockOptions& options() const { return options_; }

  torch::nn::LayerNorm norm{nullptr};
  torch::nn::Linear in_proj{nullptr};
  torch::nn::Conv2d conv{nullptr};
  torch::Tensor x_proj_weight;    // (4, rank + 2N, inner)
  torch::Tensor dt_projs_weight;  // (4, inner, rank)
  torch::Tensor dt_projs_bias;    // (4, inner)
  torch::Tensor A_logs;           // (4 * inner, N); A = -exp(A_logs)
  torch::Tensor Ds;               // (4 * inner)
  torch::nn::LayerNorm out_norm{nullptr};
  torch::nn::Linear out_proj{nullptr};

 private:
  VSSBlockOptions options_;
};
TORCH_MODULE(VSSBlock);

/// Runs a block on a channels-first map, (channels, H, W) or
/// (batch, channels, H, W); output has the input's shape.
/// Throws ConfigError for an empty block handle.
[[nodiscard]] torch::Tensor vss_block_forward(VSSBlock& block, const torch::Tensor& input);

}  // namespace semamba::ssm
