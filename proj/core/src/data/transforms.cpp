#include "semamba/data/transforms.hpp"

#include <algorithm>
#include <cmath>

namespace semamba::data {

namespace {

template <typename T>
Grid<T> transform(const Grid<T>& in, Augmentation aug) {
  const int64_t h = in.height;
  const int64_t w = in.width;
  const bool swap = aug == Augmentation::Rotate90 || aug == Augmentation::Rotate270;
  Grid<T> out(swap ? w : h, swap ? h : w);
  for (int64_t y = 0; y < out.height; ++y) {
    for (int64_t x = 0; x < out.width; ++x) {
      int64_t sy = y;
      int64_t sx = x;
      switch (aug) {
        case Augmentation::Identity: break;
        case Augmentation::Rotate90: sy = x; sx = w - 1 - y; break;
        case Augmentation::Rotate180: sy = h - 1 - y; sx = w - 1 - x; break;
        case Augmentation::Rotate270: sy = h - 1 - x; sx = y; break;
        case Augmentation::FlipHorizontal: sx = w - 1 - x; break;
        case Augmentation::FlipVertical: sy = h - 1 - y; break;
      }
      out(y, x) = in(sy, sx);
    }
  }
  return out;
}

}  // namespace

Image resize_image(const Image& image, int64_t height, int64_t width) {
  if (height < 1 || width < 1 || image.height < 1 || image.width < 1) {
    throw DomainError("resize_image: dimensions must be positive");
  }
  Image out(height, width);
  const double sy = static_cast<double>(image.height) / static_cast<double>(height);
  const double sx = static_cast<double>(image.width) / static_cast<double>(width);
  for (int64_t y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(image.height - 1));
    const auto y0 = static_cast<int64_t>(std::floor(fy));
    const int64_t y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - static_cast<double>(y0);
    for (int64_t x = 0; x < width; ++x) {
      const double fx =
          std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(image.width - 1));
      const auto x0 = static_cast<int64_t>(std::floor(fx));
      const int64_t x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - static_cast<double>(x0);
      const double top = image(y0, x0) * (1.0 - wx) + image(y0, x1) * wx;
      const double bottom = image(y1, x0) * (1.0 - wx) + image(y1, x1) * wx;
      out(y, x) = static_cast<float>(top * (1.0 - wy) + bottom * wy);
    }
  }
  return out;
}

Mask resize_mask(const Mask& mask, int64_t height, int64_t width) {
  if (height < 1 || width < 1 || mask.height < 1 || mask.width < 1) {
    throw DomainError("resize_mask: dimensions must be positive");
  }
  Mask out(height, width);
  for (int64_t y = 0; y < height; ++y) {
    const int64_t src_y = std::min((2 * y + 1) * mask.height / (2 * height), mask.height - 1);
    for (int64_t x = 0; x < width; ++x) {
      const int64_t src_x = std::min((2 * x + 1) * mask.width / (2 * width), mask.width - 1);
      out(y, x) = mask(src_y, src_x);
    }
  }
  return out;
}

std::pair<Image, std::optional<Mask>> resize_pair(const Image& image,
                                                  const std::optional<Mask>& mask,
                                                  int64_t target) {
  if (mask && !mask->same_shape(Mask(image.height, image.width))) {
    throw ShapeError("resize_pair: image and mask sizes differ");
  }
  if (image.height == target && image.width == target) return {image, mask};
  std::optional<Mask> resized_mask;
  if (mask) resized_mask = resize_mask(*mask, target, target);
  return {resize_image(image, target, target), std::move(resized_mask)};
}

Rng sample_rng(uint64_t seed, uint64_t index) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(index), static_cast<uint32_t>(index >> 32)};
  return Rng(seq);
}

Augmentation draw_augmentation(Rng& rng) {
  // Modulo on the raw draw keeps the sequence independent of the standard
  // library's distribution implementation.
  return static_cast<Augmentation>(rng() % 6);
}

Sample apply_augmentation(const Sample& sample, Augmentation aug) {
  if (aug == Augmentation::Identity) return sample;
  Sample out;
  out.case_id = sample.case_id;
  out.slice_index = sample.slice_index;
  out.image = transform(sample.image, aug);
  if (sample.mask) out.mask = transform(*sample.mask, aug);
  return out;
}

Sample augment(const Sample& sample, Rng& rng) {
  return apply_augmentation(sample, draw_augmentation(rng));
}

}  // namespace semamba::data
