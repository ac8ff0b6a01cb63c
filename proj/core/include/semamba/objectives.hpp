#pragma once

#include <string>
#include <utility>

#include <torch/torch.h>

namespace semamba::loss {

inline constexpr double kDiceSmooth = 1e-5;
inline constexpr double kProbabilityClamp = 1e-12;

// Conventions: probability and logit maps are (batch, classes, H, W); label
// maps are (batch, H, W) int64 with values in [0, classes).

/// 1 - mean over classes of (2 sum(p g) + eps) / (sum p + sum g + eps), with
/// g the one-hot target and sums taken over batch and pixels.
[[nodiscard]] torch::Tensor dice_loss(const torch::Tensor& probs, const torch::Tensor& target,
                                      double smooth = kDiceSmooth);

/// Mean over pixels of -log(max(p_target, clamp)).
[[nodiscard]] torch::Tensor cross_entropy_loss(const torch::Tensor& probs,
                                               const torch::Tensor& target,
                                               double clamp = kProbabilityClamp);

/// CE + Dice on softmax(logits).
[[nodiscard]] torch::Tensor supervised_loss(const torch::Tensor& logits,
                                            const torch::Tensor& target);

/// Per-pixel argmax over classes, detached; ties resolve to the lowest index.
[[nodiscard]] torch::Tensor pseudo_label(const torch::Tensor& logits);

/// Cross pseudo supervision: first = supervised_loss(logits1, argmax(logits2)),
/// second = supervised_loss(logits2, argmax(logits1)). Pseudo-labels carry no
/// gradient, so each term only reaches the network being supervised.
[[nodiscard]] std::pair<torch::Tensor, torch::Tensor> cross_supervision_loss(
    const torch::Tensor& logits1, const torch::Tensor& logits2);

/// Adaptive average pooling to (channels, grid, grid) followed by L2
/// normalization along the channel axis. `channels` = 0 keeps the input
/// width; a smaller value pools groups of adjacent channels. Zero vectors stay
/// zero.
[[nodiscard]] torch::Tensor project_features(const torch::Tensor& features, int64_t grid,
                                             int64_t channels = 0);

/// Mean over all elements of (p1 - p2)^2.
[[nodiscard]] torch::Tensor contrastive_loss(const torch::Tensor& p1, const torch::Tensor& p2);

struct LossBreakdown {
  double sup1 = 0.0;
  double sup2 = 0.0;
  double semi1 = 0.0;
  double semi2 = 0.0;
  double contra = 0.0;
  double total = 0.0;
};

/// Fills `total` with the unweighted sum of the five terms. A non-finite term
/// throws NumericalError naming it.
[[nodiscard]] LossBreakdown total_loss(LossBreakdown parts);

/// The five differentiable terms of one training step. Disabled terms are
/// scalar zeros.
struct LossTerms {
  torch::Tensor sup1, sup2, semi1, semi2, contra;

  [[nodiscard]] torch::Tensor sum() const { return sup1 + sup2 + semi1 + semi2 + contra; }
  /// Reads the scalar values and validates them through total_loss.
  [[nodiscard]] LossBreakdown breakdown() const;
};

[[nodiscard]] std::string to_string(const LossBreakdown& b);

}  // namespace semamba::loss
