#include "semamba/ssm/vss_block.hpp"

#include <cmath>

#include "semamba/error.hpp"
#include "semamba/ssm/selective_scan.hpp"

namespace semamba::ssm {

namespace {

constexpr double kDtMin = 1e-3;
constexpr double kDtMax = 1e-1;
constexpr double kDtFloor = 1e-4;

}  // namespace

VSSBlockImpl::VSSBlockImpl(const VSSBlockOptions& options) : options_(options) {
  if (options.dim < 1 || options.state_size < 1 || options.expand < 1 ||
      options.conv_kernel < 1 || options.conv_kernel % 2 == 0) {
    throw ConfigError("VSSBlock: dim, state size, expand must be >= 1 and conv kernel odd");
  }
  const int64_t dim = options.dim;
  const int64_t inner = options.inner();
  const int64_t rank = options.rank();
  const int64_t n = options.state_size;
  constexpr int64_t k = 4;

  norm = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  in_proj = register_module(
      "in_proj", torch::nn::Linear(torch::nn::LinearOptions(dim, 2 * inner).bias(false)));
  conv = register_module("conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(inner, inner,
                                                                            options.conv_kernel)
                                                       .groups(inner)
                                                       .padding(options.conv_kernel / 2)
                                                       .bias(true)));

  torch::NoGradGuard no_grad;
  const double proj_bound = 1.0 / std::sqrt(static_cast<double>(inner));
  x_proj_weight = register_parameter(
      "x_proj_weight", torch::empty({k, rank + 2 * n, inner}).uniform_(-proj_bound, proj_bound));
  const double dt_bound = 1.0 / std::sqrt(static_cast<double>(rank));
  dt_projs_weight = register_parameter(
      "dt_projs_weight", torch::empty({k, inner, rank}).uniform_(-dt_bound, dt_bound));
  // Timescales log-uniform in [kDtMin, kDtMax]; the bias is their inverse softplus.
  auto dt = torch::exp(torch::rand({k, inner}) * (std::log(kDtMax) - std::log(kDtMin)) +
                       std::log(kDtMin))
                .clamp_min(kDtFloor);
  dt_projs_bias = register_parameter("dt_projs_bias", dt + torch::log(-torch::expm1(-dt)));
  A_logs = register_parameter(
      "A_logs", torch::log(torch::arange(1, n + 1, torch::kFloat32)).repeat({k * inner, 1}));
  Ds = register_parameter("Ds", torch::ones({k * inner}));

  out_norm =
      register_module("out_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({inner})));
  out_proj = register_module(
      "out_proj", torch::nn::Linear(torch::nn::LinearOptions(inner, dim).bias(false)));
}

torch::Tensor VSSBlockImpl::scan_core(const torch::Tensor& x) {
  const int64_t b = x.size(0);
  const int64_t inner = x.size(1);
  const int64_t n = options_.state_size;
  const int64_t rank = options_.rank();

  const auto seqs = cross_scan(x);
  const auto& xs = seqs.sequences;  // (b, 4, inner, L)
  const int64_t len = xs.size(3);

  auto projected = torch::matmul(x_proj_weight.unsqueeze(0), xs);  // (b, 4, rank + 2N, L)
  auto parts = projected.split_with_sizes({rank, n, n}, 2);
  auto dts = torch::matmul(dt_projs_weight.unsqueeze(0), parts[0]);  // (b, 4, inner, L)
  auto delta = torch::softplus(dts + dt_projs_bias.view({1, 4, inner, 1}));

  auto y = selective_scan(xs.reshape({b, 4 * inner, len}), delta.reshape({b, 4 * inner, len}),
                          -torch::exp(A_logs), parts[1], parts[2], Ds,
                          options_.discretization);
  return cross_merge({y.view({b, 4, inner, len}), seqs.height, seqs.width},
                     options_.reduction);
}

torch::Tensor VSSBlockImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(3) != options_.dim) {
    throw ShapeError("VSSBlock: expected channels-last (batch, H, W, " +
                     std::to_string(options_.dim) + ")");
  }
  auto xz = in_proj->forward(norm->forward(x));
  auto halves = xz.chunk(2, -1);
  auto inner = torch::silu(conv->forward(halves[0].permute({0, 3, 1, 2})));
  auto y = scan_core(inner).permute({0, 2, 3, 1});
  y = out_norm->forward(y) * torch::silu(halves[1]);
  return x + out_proj->forward(y);
}

torch::Tensor vss_block_forward(VSSBlock& block, const torch::Tensor& input) {
  if (block.is_empty()) throw ConfigError("vss_block_forward: block is not initialized");
  const bool unbatched = input.dim() == 3;
  auto x = unbatched ? input.unsqueeze(0) : input;
  if (x.dim() != 4) throw ShapeError("vss_block_forward: expected (channels, H, W)");
  auto out = block->forward(x.permute({0, 2, 3, 1})).permute({0, 3, 1, 2});
  return unbatched ? out.squeeze(0) : out;
}

}  // namespace semamba::ssm
