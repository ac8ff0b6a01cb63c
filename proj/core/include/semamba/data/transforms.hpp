#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <utility>

#include "semamba/data/dataset.hpp"

namespace semamba::data {

inline constexpr int64_t kDefaultInputSize = 224;

/// Bilinear resampling with half-pixel centres (align_corners = false).
[[nodiscard]] Image resize_image(const Image& image, int64_t height, int64_t width);

/// Nearest-neighbour resampling: output pixel (y, x) copies source
/// (floor((y + 0.5) * H_in / H_out), floor((x + 0.5) * W_in / W_out)).
[[nodiscard]] Mask resize_mask(const Mask& mask, int64_t height, int64_t width);

/// Resizes an image (bilinear) and its optional mask (nearest) to
/// target x target. Inputs already at the target size are returned unchanged.
[[nodiscard]] std::pair<Image, std::optional<Mask>> resize_pair(
    const Image& image, const std::optional<Mask>& mask, int64_t target = kDefaultInputSize);

enum class Augmentation { Identity, Rotate90, Rotate180, Rotate270, FlipHorizontal, FlipVertical };

using Rng = std::mt19937_64;

/// Independent generator for sample `index` under `seed`, so augmentation
/// does not depend on worker scheduling.
[[nodiscard]] Rng sample_rng(uint64_t seed, uint64_t index);

/// Uniform draw over the six augmentations.
[[nodiscard]] Augmentation draw_augmentation(Rng& rng);

/// Applies the same geometric transform to image and mask. Rotations are
/// counter-clockwise; non-square inputs swap height and width under 90/270.
[[nodiscard]] Sample apply_augmentation(const Sample& sample, Augmentation aug);

[[nodiscard]] Sample augment(const Sample& sample, Rng& rng);

}  // namespace semamba::data
