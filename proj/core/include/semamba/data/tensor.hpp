#pragma once

#include <vector>

#include <torch/torch.h>

#include "semamba/data/dataset.hpp"

namespace semamba::data {

/// Stacks images into a (batch, 1, H, W) float32 tensor. All images must
/// share one shape, else ShapeError.
[[nodiscard]] torch::Tensor images_to_tensor(const std::vector<const Image*>& images);

/// Stacks masks into a (batch, H, W) int64 tensor.
[[nodiscard]] torch::Tensor masks_to_tensor(const std::vector<const Mask*>& masks);

/// Splits a (batch, H, W) integer label tensor back into masks.
[[nodiscard]] std::vector<Mask> tensor_to_masks(const torch::Tensor& labels);

}  // namespace semamba::data
