#pragma once

#include <cstdint>
#include <vector>

#include "semamba/error.hpp"

namespace semamba {

/// Row-major 2-D array.
template <typename T>
struct Grid {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int64_t h, int64_t w, T fill = T{})
      : height(h), width(w), data(static_cast<std::size_t>(h * w), fill) {}

  [[nodiscard]] T& operator()(int64_t y, int64_t x) {
    return data[static_cast<std::size_t>(y * width + x)];
  }
  [[nodiscard]] const T& operator()(int64_t y, int64_t x) const {
    return data[static_cast<std::size_t>(y * width + x)];
  }
  [[nodiscard]] int64_t size() const { return height * width; }
  [[nodiscard]] bool same_shape(const Grid& o) const {
    return height == o.height && width == o.width;
  }

  bool operator==(const Grid&) const = default;
};

using Image = Grid<float>;     // intensities in [0, 1]
using Mask = Grid<uint8_t>;    // class index per pixel

}  // namespace semamba
