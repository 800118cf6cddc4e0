#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "twoview/domain.hpp"
#include "twoview/errors.hpp"
#include "twoview/image.hpp"
#include "twoview/rng.hpp"

namespace twoview::patchkit {

enum class PatchLabel {
  Background = 0,
  BenignCalcification = 1,
  MalignantCalcification = 2,
  BenignMass = 3,
  MalignantMass = 4,
};

constexpr int kPatchClassCount = 5;

inline const char* to_string(PatchLabel l) {
  switch (l) {
    case PatchLabel::Background: return "background";
    case PatchLabel::BenignCalcification: return "benign_calcification";
    case PatchLabel::MalignantCalcification: return "malignant_calcification";
    case PatchLabel::BenignMass: return "benign_mass";
    default: return "malignant_mass";
  }
}

inline PatchLabel patch_label_from_string(const std::string& s) {
  if (s == "background") return PatchLabel::Background;
  if (s == "benign_calcification") return PatchLabel::BenignCalcification;
  if (s == "malignant_calcification") return PatchLabel::MalignantCalcification;
  if (s == "benign_mass") return PatchLabel::BenignMass;
  if (s == "malignant_mass") return PatchLabel::MalignantMass;
  throw DataError("unknown patch label: " + s);
}

struct PatchSample {
  Image pixels;  // S x S crop
  PatchLabel label = PatchLabel::Background;
  std::string source_exam_id;
  View view = View::CC;
  int origin_row = 0;
  int origin_col = 0;
};

struct SamplerConfig {
  int patch_size = 224;
  int n_lesion = 10;
  int n_background = 10;
  double jitter = 0.10;  // fraction of patch_size, per axis
  int max_rejection_attempts = 10000;
};

// Arithmetic mean of foreground pixel coordinates.
inline std::pair<double, double> mask_centroid(const Mask& mask) {
  double sr = 0.0, sc = 0.0;
  std::size_t n = 0;
  for (int r = 0; r < mask.height; ++r)
    for (int c = 0; c < mask.width; ++c)
      if (mask.at(r, c) != 0) {
        sr += r;
        sc += c;
        ++n;
      }
  if (n == 0) throw DataError("mask_centroid: empty mask");
  return {sr / n, sc / n};
}

inline Image crop(const Image& img, int r0, int c0, int size) {
  Image out(size, size, img.bit_depth);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) out.at(r, c) = img.at(r0 + r, c0 + c);
  return out;
}

// Maps (kind, malignancy) onto the four lesion patch categories.
inline PatchLabel label_patch(const RoiFinding& finding) {
  if (finding.kind == LesionKind::Mass)
    return finding.malignancy == Malignancy::Malignant ? PatchLabel::MalignantMass
                                                       : PatchLabel::BenignMass;
  return finding.malignancy == Malignancy::Malignant ? PatchLabel::MalignantCalcification
                                                     : PatchLabel::BenignCalcification;
}

namespace detail {
inline void check_window_fits(const Image& image, int s) {
  if (image.height < s || image.width < s)
    throw DataError("image smaller than patch size " + std::to_string(s));
}

inline int clamp_origin(int v, int limit) {
  if (v < 0) return 0;
  if (v > limit) return limit;
  return v;
}
}  // namespace detail

// Windows centered on the mask centroid with a per-axis jitter of up to
// jitter*S pixels (quantized to whole pixels), clamped into the image.
inline std::vector<PatchSample> sample_lesion_patches(const Image& image, const Mask& mask,
                                                      const SamplerConfig& cfg, Rng& rng,
                                                      PatchLabel label,
                                                      const std::string& exam_id = {},
                                                      View view = View::CC) {
  detail::check_window_fits(image, cfg.patch_size);
  if (mask.height != image.height || mask.width != image.width)
    throw DataError("mask/image dimension mismatch in sampler");
  const auto [cr, cc] = mask_centroid(mask);
  const int s = cfg.patch_size;
  const int jmax = static_cast<int>(std::floor(cfg.jitter * s));
  const int base_r = static_cast<int>(std::llround(cr));
  const int base_c = static_cast<int>(std::llround(cc));
  std::vector<PatchSample> out;
  out.reserve(cfg.n_lesion);
  for (int i = 0; i < cfg.n_lesion; ++i) {
    const int dr = static_cast<int>(rng.uniform_int(-jmax, jmax));
    const int dc = static_cast<int>(rng.uniform_int(-jmax, jmax));
    int r0 = base_r + dr - s / 2;
    int c0 = base_c + dc - s / 2;
    r0 = detail::clamp_origin(r0, image.height - s);
    c0 = detail::clamp_origin(c0, image.width - s);
    out.push_back({crop(image, r0, c0, s), label, exam_id, view, r0, c0});
  }
  return out;
}

// Windows drawn uniformly over all origins, rejecting any window that
// overlaps a single ROI pixel.
inline std::vector<PatchSample> sample_background_patches(const Image& image,
                                                          const std::vector<Mask>& all_masks,
                                                          const SamplerConfig& cfg, Rng& rng,
                                                          const std::string& exam_id = {},
                                                          View view = View::CC) {
  detail::check_window_fits(image, cfg.patch_size);
  const int s = cfg.patch_size;
  const int h = image.height, w = image.width;

  // Integral image of the mask union for O(1) overlap checks.
  std::vector<std::uint32_t> integ(static_cast<std::size_t>(h + 1) * (w + 1), 0);
  for (const auto& m : all_masks) {
    if (m.height != h || m.width != w)
      throw DataError("mask/image dimension mismatch in sampler");
  }
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      std::uint32_t fg = 0;
      for (const auto& m : all_masks) fg |= (m.at(r, c) != 0);
      integ[(r + 1ull) * (w + 1) + (c + 1)] = fg + integ[r * (w + 1ull) + (c + 1)] +
                                              integ[(r + 1ull) * (w + 1) + c] -
                                              integ[r * (w + 1ull) + c];
    }
  const auto window_clear = [&](int r0, int c0) {
    const std::uint32_t sum = integ[(r0 + s) * (w + 1ull) + (c0 + s)] -
                              integ[static_cast<std::size_t>(r0) * (w + 1) + (c0 + s)] -
                              integ[(r0 + s) * (w + 1ull) + c0] +
                              integ[static_cast<std::size_t>(r0) * (w + 1) + c0];
    return sum == 0;
  };

  std::vector<PatchSample> out;
  out.reserve(cfg.n_background);
  for (int i = 0; i < cfg.n_background; ++i) {
    bool found = false;
    for (int attempt = 0; attempt < cfg.max_rejection_attempts; ++attempt) {
      const int r0 = static_cast<int>(rng.uniform_int(0, h - s));
      const int c0 = static_cast<int>(rng.uniform_int(0, w - s));
      if (window_clear(r0, c0)) {
        out.push_back({crop(image, r0, c0, s), PatchLabel::Background, exam_id, view, r0, c0});
        found = true;
        break;
      }
    }
    if (!found)
      throw DataError("background sampler saturated after " +
                      std::to_string(cfg.max_rejection_attempts) + " attempts on exam '" +
                      exam_id + "'");
  }
  return out;
}

inline std::map<PatchLabel, double> class_distribution(const std::vector<PatchSample>& patches) {
  if (patches.empty()) throw DataError("class_distribution: empty patch list");
  std::map<PatchLabel, double> counts;
  for (const auto& p : patches) counts[p.label] += 1.0;
  for (auto& [label, v] : counts) v /= static_cast<double>(patches.size());
  return counts;
}

}  // namespace twoview::patchkit
