#include "semamba/data/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

namespace semamba::data {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what) *what = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

template <typename T>
void write_png(const std::filesystem::path& path, const Grid<T>& image, int bit_depth) {
  if (image.height < 1 || image.width < 1) {
    throw DataError("png: refusing to write empty image " + path.string());
  }
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw DataError("png: cannot open " + path.string() + " for writing");

  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_error_fn,
                                            png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("png: out of memory writing " + path.string());
  }
  // Big-endian sample rows for 16-bit output.
  std::vector<png_byte> row(static_cast<std::size_t>(image.width) * (bit_depth / 8));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("png: failed writing " + path.string() + ": " + error);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), bit_depth, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  for (int64_t y = 0; y < image.height; ++y) {
    for (int64_t x = 0; x < image.width; ++x) {
      const auto v = static_cast<uint32_t>(image(y, x));
      if (bit_depth == 16) {
        row[2 * x] = static_cast<png_byte>(v >> 8);
        row[2 * x + 1] = static_cast<png_byte>(v & 0xFF);
      } else {
        row[x] = static_cast<png_byte>(v);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

Grid<uint16_t> read_png_gray(const std::filesystem::path& path, int* bit_depth) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw DataError("png: cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw DataError("png: " + path.string() + " is not a PNG file");
  }

  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_error_fn,
                                           png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("png: out of memory reading " + path.string());
  }
  Grid<uint16_t> out;
  std::vector<png_byte> row;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("png: malformed file " + path.string() + ": " + error);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const auto width = png_get_image_width(png, info);
  const auto height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("png: " + path.string() + " is not single-channel grayscale");
  }
  if (depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
    depth = 8;
  }
  png_read_update_info(png, info);

  out = Grid<uint16_t>(height, width);
  row.resize(png_get_rowbytes(png, info));
  for (png_uint_32 y = 0; y < height; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (png_uint_32 x = 0; x < width; ++x) {
      out(y, x) = depth == 16 ? static_cast<uint16_t>((row[2 * x] << 8) | row[2 * x + 1])
                              : static_cast<uint16_t>(row[x]);
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  if (bit_depth) *bit_depth = depth;
  return out;
}

void write_png_gray16(const std::filesystem::path& path, const Grid<uint16_t>& image) {
  write_png(path, image, 16);
}

void write_png_gray8(const std::filesystem::path& path, const Grid<uint8_t>& image) {
  write_png(path, image, 8);
}

}  // namespace semamba::data
