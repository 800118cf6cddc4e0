#pragma once

#include <cmath>
#include <vector>

#include "twoview/errors.hpp"
#include "twoview/image.hpp"
#include "twoview/rng.hpp"

namespace twoview::pixelops {

struct AugmentParams {
  double rotation_deg = 25.0;
  double zoom_frac = 0.20;
  double shear_frac = 0.12;
  double intensity_shift_frac = 0.20;
  bool hflip = true;
  bool vflip = true;
};

struct PreprocSpec {
  int target_height = 1152;
  int target_width = 896;
  double train_mean = 0.0;
};

inline double compute_train_mean(const std::vector<FloatImage>& train_images) {
  if (train_images.empty()) throw DataError("compute_train_mean: empty training set");
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& img : train_images) {
    for (float v : img.pixels) sum += v;
    count += img.size();
  }
  if (count == 0) throw DataError("compute_train_mean: images have no pixels");
  return sum / static_cast<double>(count);
}

// Bilinear resize with half-pixel-centered sampling:
//   src = (dst + 0.5) * (src_size / dst_size) - 0.5, clamped to the image.
inline FloatImage resize_bilinear(const FloatImage& in, int th, int tw) {
  if (in.empty() || th <= 0 || tw <= 0) throw DataError("resize_bilinear: empty image or target");
  if (th == in.height && tw == in.width) return in;
  FloatImage out(th, tw);
  const double sy = static_cast<double>(in.height) / th;
  const double sx = static_cast<double>(in.width) / tw;
  for (int r = 0; r < th; ++r) {
    double fy = (r + 0.5) * sy - 0.5;
    if (fy < 0) fy = 0;
    if (fy > in.height - 1) fy = in.height - 1;
    const int y0 = static_cast<int>(fy);
    const int y1 = (y0 + 1 < in.height) ? y0 + 1 : y0;
    const double wy = fy - y0;
    for (int c = 0; c < tw; ++c) {
      double fx = (c + 0.5) * sx - 0.5;
      if (fx < 0) fx = 0;
      if (fx > in.width - 1) fx = in.width - 1;
      const int x0 = static_cast<int>(fx);
      const int x1 = (x0 + 1 < in.width) ? x0 + 1 : x0;
      const double wx = fx - x0;
      const double top = in.at(y0, x0) * (1.0 - wx) + in.at(y0, x1) * wx;
      const double bot = in.at(y1, x0) * (1.0 - wx) + in.at(y1, x1) * wx;
      out.at(r, c) = static_cast<float>(top * (1.0 - wy) + bot * wy);
    }
  }
  return out;
}

// Resize to the target dimensions, then subtract the training-set mean.
// The single output channel feeds every backbone input channel downstream.
inline FloatImage preprocess(const FloatImage& image, const PreprocSpec& spec) {
  FloatImage out = resize_bilinear(image, spec.target_height, spec.target_width);
  const float m = static_cast<float>(spec.train_mean);
  for (float& v : out.pixels) v -= m;
  return out;
}

inline FloatImage preprocess(const Image& image, const PreprocSpec& spec) {
  return preprocess(to_float(image), spec);
}

// One concrete draw of the augmentation transform.
struct AugmentSample {
  double rotation_deg = 0.0;
  double zoom = 1.0;
  double shear = 0.0;
  bool hflip = false;
  bool vflip = false;
  double gain = 1.0;
};

// Draw order is fixed: rotation, zoom, shear, hflip coin, vflip coin, gain.
// All six values are always drawn so the stream layout never depends on the
// parameter values.
inline AugmentSample draw_augment(const AugmentParams& p, Rng& rng) {
  AugmentSample s;
  s.rotation_deg = rng.uniform(-p.rotation_deg, p.rotation_deg);
  s.zoom = rng.uniform(1.0 - p.zoom_frac, 1.0 + p.zoom_frac);
  s.shear = rng.uniform(-p.shear_frac, p.shear_frac);
  const bool hc = rng.coin();
  const bool vc = rng.coin();
  s.hflip = p.hflip && hc;
  s.vflip = p.vflip && vc;
  s.gain = rng.uniform(1.0 - p.intensity_shift_frac, 1.0 + p.intensity_shift_frac);
  return s;
}

namespace detail {
// Mirror an index into [0, n) without repeating the border pixel.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n - 2;
  i %= period;
  if (i < 0) i += period;
  return (i < n) ? i : period - i;
}

inline float sample_reflect(const FloatImage& img, double y, double x) {
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const double wy = y - y0;
  const double wx = x - x0;
  const int ya = reflect_index(y0, img.height);
  const int yb = reflect_index(y0 + 1, img.height);
  const int xa = reflect_index(x0, img.width);
  const int xb = reflect_index(x0 + 1, img.width);
  const double top = img.at(ya, xa) * (1.0 - wx) + img.at(ya, xb) * wx;
  const double bot = img.at(yb, xa) * (1.0 - wx) + img.at(yb, xb) * wx;
  return static_cast<float>(top * (1.0 - wy) + bot * wy);
}
}  // namespace detail

// Applies flips . rotation . shear . zoom about the image center, sampling
// out-of-domain pixels by border reflection, then the multiplicative
// intensity gain. Output dimensions equal input dimensions.
inline FloatImage augment_with(const FloatImage& in, const AugmentSample& s) {
  if (in.height < 2 || in.width < 2) throw DataError("augment: image must be at least 2x2");
  const double cy = (in.height - 1) / 2.0;
  const double cx = (in.width - 1) / 2.0;
  const double th = s.rotation_deg * 3.14159265358979323846 / 180.0;
  const double ct = std::cos(th), st = std::sin(th);
  // Forward map: p' = R * Sh * S * p, then flips. Inverse applied per pixel:
  // p = S^-1 * Sh^-1 * R^-1 * p'.
  FloatImage out(in.height, in.width);
  const bool identity_geom =
      s.rotation_deg == 0.0 && s.zoom == 1.0 && s.shear == 0.0 && !s.hflip && !s.vflip;
  for (int r = 0; r < in.height; ++r) {
    for (int c = 0; c < in.width; ++c) {
      if (identity_geom) {
        out.at(r, c) = in.at(r, c);
        continue;
      }
      double x = c - cx;
      double y = r - cy;
      if (s.hflip) x = -x;
      if (s.vflip) y = -y;
      // R^-1
      double xr = ct * x + st * y;
      double yr = -st * x + ct * y;
      // Sh^-1 (forward shear: x += shear * y)
      xr -= s.shear * yr;
      // S^-1
      xr /= s.zoom;
      yr /= s.zoom;
      out.at(r, c) = detail::sample_reflect(in, cy + yr, cx + xr);
    }
  }
  if (s.gain != 1.0)
    for (float& v : out.pixels) v = static_cast<float>(v * s.gain);
  return out;
}

inline FloatImage augment(const FloatImage& in, const AugmentParams& p, Rng& rng) {
  return augment_with(in, draw_augment(p, rng));
}

inline FloatImage flip_horizontal(const FloatImage& in) {
  FloatImage out(in.height, in.width);
  for (int r = 0; r < in.height; ++r)
    for (int c = 0; c < in.width; ++c) out.at(r, c) = in.at(r, in.width - 1 - c);
  return out;
}

inline FloatImage flip_vertical(const FloatImage& in) {
  FloatImage out(in.height, in.width);
  for (int r = 0; r < in.height; ++r)
    for (int c = 0; c < in.width; ++c) out.at(r, c) = in.at(in.height - 1 - r, c);
  return out;
}

// Fixed deterministic TTA set: identity, hflip, vflip, both flips.
inline std::vector<FloatImage> tta_views(const FloatImage& image) {
  std::vector<FloatImage> v;
  v.reserve(4);
  v.push_back(image);
  v.push_back(flip_horizontal(image));
  v.push_back(flip_vertical(image));
  v.push_back(flip_vertical(flip_horizontal(image)));
  return v;
}

constexpr int kTtaViewCount = 4;

// Transform index i of the fixed TTA set applied to one image; for two-view
// inputs the caller applies the same index to both views.
inline FloatImage tta_view(const FloatImage& image, int index) {
  switch (index) {
    case 0: return image;
    case 1: return flip_horizontal(image);
    case 2: return flip_vertical(image);
    case 3: return flip_vertical(flip_horizontal(image));
    default: throw ConfigError("tta_view: index out of range");
  }
}

}  // namespace twoview::pixelops
