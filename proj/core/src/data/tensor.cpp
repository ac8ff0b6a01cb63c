#include "semamba/data/tensor.hpp"

#include <algorithm>

namespace semamba::data {

namespace {

template <typename T>
void check_shapes(const std::vector<const Grid<T>*>& grids, const char* what) {
  if (grids.empty()) throw ShapeError(std::string(what) + ": empty batch");
  for (const auto* g : grids) {
    if (!g->same_shape(*grids.front())) {
      throw ShapeError(std::string(what) + ": grids in one batch must share a shape");
    }
  }
}

}  // namespace

torch::Tensor images_to_tensor(const std::vector<const Image*>& images) {
  check_shapes(images, "images_to_tensor");
  const int64_t h = images.front()->height;
  const int64_t w = images.front()->width;
  auto out = torch::empty({static_cast<int64_t>(images.size()), 1, h, w}, torch::kFloat32);
  float* dst = out.data_ptr<float>();
  for (const auto* img : images) dst = std::copy(img->data.begin(), img->data.end(), dst);
  return out;
}

torch::Tensor masks_to_tensor(const std::vector<const Mask*>& masks) {
  check_shapes(masks, "masks_to_tensor");
  const int64_t h = masks.front()->height;
  const int64_t w = masks.front()->width;
  auto out = torch::empty({static_cast<int64_t>(masks.size()), h, w}, torch::kInt64);
  int64_t* dst = out.data_ptr<int64_t>();
  for (const auto* m : masks) dst = std::copy(m->data.begin(), m->data.end(), dst);
  return out;
}

std::vector<Mask> tensor_to_masks(const torch::Tensor& labels) {
  if (labels.dim() != 3) throw ShapeError("tensor_to_masks: expected (batch, H, W)");
  const auto t = labels.to(torch::kInt64).contiguous();
  const int64_t b = t.size(0), h = t.size(1), w = t.size(2);
  const int64_t* src = t.data_ptr<int64_t>();
  std::vector<Mask> out;
  out.reserve(static_cast<std::size_t>(b));
  for (int64_t i = 0; i < b; ++i) {
    Mask m(h, w);
    for (int64_t k = 0; k < h * w; ++k) {
      const int64_t v = src[i * h * w + k];
      if (v < 0 || v > 255) throw DomainError("tensor_to_masks: label out of range");
      m.data[static_cast<std::size_t>(k)] = static_cast<uint8_t>(v);
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace semamba::data
