#pragma once

#include <torch/torch.h>

#include "semamba/ssm/ssm.hpp"

namespace semamba::ssm {

/// Batched diagonal selective scan over `groups` parameter sets.
///
/// Shapes (G = groups, Dg = channels per group, L = sequence length):
///   u, delta : (batch, G*Dg, L)    delta must already be positive
///   A        : (G*Dg, N)           diagonal evolution per channel
///   B, C     : (batch, G, N, L)    input-dependent projections
///   D        : (G*Dg) or undefined skip weights
/// Returns y : (batch, G*Dg, L), with h_0 = 0.
///
/// Forward and backward are explicit loops (no autograd tape over L steps);
/// gradients flow to every tensor argument. float and double are supported.
[[nodiscard]] torch::Tensor selective_scan(const torch::Tensor& u, const torch::Tensor& delta,
                                           const torch::Tensor& A, const torch::Tensor& B,
                                           const torch::Tensor& C, const torch::Tensor& D,
                                           Discretization mode = Discretization::FirstOrder);

}  // namespace semamba::ssm
