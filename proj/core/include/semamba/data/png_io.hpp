#pragma once

#include <cstdint>
#include <filesystem>

#include "semamba/grid.hpp"

namespace semamba::data {

/// Reads an 8- or 16-bit grayscale PNG (no alpha, no palette). `bit_depth`
/// receives 8 or 16. Throws DataError naming the path on any failure.
[[nodiscard]] Grid<uint16_t> read_png_gray(const std::filesystem::path& path,
                                           int* bit_depth = nullptr);

void write_png_gray16(const std::filesystem::path& path, const Grid<uint16_t>& image);
void write_png_gray8(const std::filesystem::path& path, const Grid<uint8_t>& image);

}  // namespace semamba::data
