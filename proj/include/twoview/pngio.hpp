#pragma once

#include <png.h>

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "twoview/errors.hpp"
#include "twoview/image.hpp"

namespace twoview {

namespace detail {
struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;
}  // namespace detail

// Reads an 8- or 16-bit grayscale PNG. Palette/color/alpha inputs are
// rejected: the ingestion contract is grayscale only.
inline Image read_png_gray(const std::string& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("cannot open image file: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng init failed reading " + path);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("libpng init failed reading " + path);
  }

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("corrupt PNG file: " + path);
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  if (color_type != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("expected grayscale PNG: " + path);
  }
  if (bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
    bit_depth = 8;
  }
  if (bit_depth == 16) png_set_swap(png);  // libpng reads big-endian words

  png_read_update_info(png, info);
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int width = static_cast<int>(png_get_image_width(png, info));

  Image img(height, width, bit_depth);
  std::vector<png_bytep> rows(height);
  std::vector<std::uint8_t> buf8;
  if (bit_depth == 8) {
    buf8.resize(static_cast<std::size_t>(height) * width);
    for (int r = 0; r < height; ++r) rows[r] = buf8.data() + static_cast<std::size_t>(r) * width;
  } else {
    for (int r = 0; r < height; ++r)
      rows[r] = reinterpret_cast<png_bytep>(img.pixels.data() + static_cast<std::size_t>(r) * width);
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (bit_depth == 8)
    for (std::size_t i = 0; i < buf8.size(); ++i) img.pixels[i] = buf8[i];
  return img;
}

inline void write_png_gray(const std::string& path, const Image& img) {
  if (img.empty()) throw DataError("refusing to write empty image: " + path);
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("cannot open for writing: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng init failed writing " + path);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("libpng init failed writing " + path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("PNG write failed: " + path);
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width, img.height, img.bit_depth, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (img.bit_depth == 16) png_set_swap(png);

  std::vector<std::uint8_t> buf8;
  std::vector<png_bytep> rows(img.height);
  if (img.bit_depth == 8) {
    buf8.resize(img.size());
    for (std::size_t i = 0; i < img.size(); ++i)
      buf8[i] = static_cast<std::uint8_t>(img.pixels[i] & 0xff);
    for (int r = 0; r < img.height; ++r)
      rows[r] = buf8.data() + static_cast<std::size_t>(r) * img.width;
  } else {
    for (int r = 0; r < img.height; ++r)
      rows[r] = reinterpret_cast<png_bytep>(
          const_cast<std::uint16_t*>(img.pixels.data()) + static_cast<std::size_t>(r) * img.width);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace twoview
