#pragma once

#include <cstdint>
#include <vector>

#include "twoview/errors.hpp"

namespace twoview {

// Single-channel integer-intensity image. Values are stored in 16 bits;
// bit_depth records whether the source was 8- or 16-bit PNG.
struct Image {
  int height = 0;
  int width = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> pixels;

  Image() = default;
  Image(int h, int w, int depth = 8, std::uint16_t fill = 0)
      : height(h), width(w), bit_depth(depth), pixels(static_cast<std::size_t>(h) * w, fill) {}

  std::uint16_t& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * width + c]; }
  std::uint16_t at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }

  bool empty() const { return height == 0 || width == 0; }
  std::size_t size() const { return pixels.size(); }
  std::uint16_t max_value() const { return bit_depth == 8 ? 255 : 65535; }
};

// Real-valued single-channel image used by preprocessing and augmentation.
struct FloatImage {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  FloatImage() = default;
  FloatImage(int h, int w, float fill = 0.f)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {}

  float& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * width + c]; }
  float at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }

  bool empty() const { return height == 0 || width == 0; }
  std::size_t size() const { return pixels.size(); }
};

inline FloatImage to_float(const Image& img) {
  FloatImage out(img.height, img.width);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    out.pixels[i] = static_cast<float>(img.pixels[i]);
  return out;
}

// Binary mask: 0 = background, nonzero = foreground.
using Mask = Image;

inline std::size_t mask_foreground_count(const Mask& m) {
  std::size_t n = 0;
  for (auto v : m.pixels) n += (v != 0);
  return n;
}

}  // namespace twoview
