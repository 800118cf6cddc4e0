#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "twoview/domain.hpp"
#include "twoview/errors.hpp"
#include "twoview/rng.hpp"

namespace twoview::dataio {

// Desk-scale two-view phantom generator. Each exam is a breast-shaped
// half-ellipse with tissue texture plus one lesion rendered in both views at
// a geometrically consistent position. Malignancy has a visual cue
// (spiculation for masses, fine scattered dots for calcifications); with
// probability ambiguity_prob the cue appears in only one randomly chosen
// view, so a single view underdetermines the label while the pair does not.
struct SynthParams {
  int image_height = 288;
  int image_width = 224;
  bool enable_mass = true;
  bool enable_calcification = true;
  double ambiguity_prob = 0.0;
  double malignant_fraction = 0.5;

  // intensity ranges (8-bit output)
  double background_level = 8.0;
  double tissue_level_lo = 90.0;
  double tissue_level_hi = 120.0;
  double texture_amplitude = 10.0;
  double noise_sigma = 2.5;
  double lesion_contrast_lo = 55.0;
  double lesion_contrast_hi = 80.0;

  // blob-shape parameters (pixels, relative to a 288x224 canvas; scaled by
  // image size at render time)
  double mass_radius_lo = 9.0;
  double mass_radius_hi = 13.0;
  int spicule_count_lo = 8;
  int spicule_count_hi = 12;
  double spicule_length_factor = 1.9;
  double calc_cluster_radius = 9.0;
  int benign_calc_dots_lo = 3;
  int benign_calc_dots_hi = 4;
  double benign_calc_dot_radius = 2.2;
  int malignant_calc_dots_lo = 10;
  int malignant_calc_dots_hi = 14;
  double malignant_calc_dot_radius = 1.1;

  int max_placement_retries = 100;
  std::uint64_t seed = 0;
};

// Which views actually carry the malignancy cue (diagnostics for tests).
struct SynthInfo {
  bool malignant = false;
  bool cue_cc = false;
  bool cue_mlo = false;
};

namespace synth_detail {

struct Breast {
  double cy, rx, ry;  // half-ellipse anchored at the left edge x=0
  bool inside(double y, double x, double margin_frac) const {
    const double nx = x / rx;
    const double ny = (y - cy) / ry;
    return nx >= 0.0 && nx * nx + ny * ny <= margin_frac * margin_frac;
  }
};

inline void add_soft_disc(std::vector<double>& canvas, int h, int w, double cy, double cx,
                          double radius, double amplitude) {
  const int r0 = std::max(0, static_cast<int>(cy - radius - 2));
  const int r1 = std::min(h - 1, static_cast<int>(cy + radius + 2));
  const int c0 = std::max(0, static_cast<int>(cx - radius - 2));
  const int c1 = std::min(w - 1, static_cast<int>(cx + radius + 2));
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) {
      const double d = std::hypot(r - cy, c - cx);
      if (d < radius + 1.5) {
        const double t = std::clamp((radius - d) / 1.5 + 1.0, 0.0, 1.0);
        canvas[static_cast<std::size_t>(r) * w + c] += amplitude * t;
      }
    }
}

inline void add_line(std::vector<double>& canvas, int h, int w, double y0, double x0, double angle,
                     double length, double amplitude) {
  const double dy = std::sin(angle), dx = std::cos(angle);
  const int steps = static_cast<int>(length * 2);
  for (int i = 0; i <= steps; ++i) {
    const double t = length * i / steps;
    const int r = static_cast<int>(std::lround(y0 + dy * t));
    const int c = static_cast<int>(std::lround(x0 + dx * t));
    if (r < 0 || r >= h || c < 0 || c >= w) continue;
    const double fade = 1.0 - 0.6 * (t / length);
    canvas[static_cast<std::size_t>(r) * w + c] += amplitude * fade;
  }
}

}  // namespace synth_detail

inline Exam synth_exam(const SynthParams& p, Rng& rng, const std::string& exam_id = "synth_0",
                       const std::string& patient_id = "synth_patient_0",
                       Side side = Side::Left, SynthInfo* info = nullptr) {
  if (p.image_height < 64 || p.image_width < 64)
    throw ConfigError("synth_exam: image dimensions must be at least 64x64");
  if (!p.enable_mass && !p.enable_calcification)
    throw ConfigError("synth_exam: no lesion kinds enabled");

  const int h = p.image_height, w = p.image_width;
  const double scale = std::min(h / 288.0, w / 224.0);

  // Exam-level draws (fixed order).
  const bool malignant = rng.uniform() < p.malignant_fraction;
  LesionKind kind;
  if (p.enable_mass && p.enable_calcification)
    kind = rng.coin() ? LesionKind::Mass : LesionKind::Calcification;
  else
    kind = p.enable_mass ? LesionKind::Mass : LesionKind::Calcification;
  const bool ambiguous = malignant && rng.uniform() < p.ambiguity_prob;
  const bool cue_on_cc_only = rng.coin();  // drawn unconditionally, used when ambiguous
  // Normalized lesion position shared by both views.
  const double pos_u = rng.uniform(0.18, 0.62);   // fraction of breast x-extent
  const double pos_v = rng.uniform(-0.55, 0.55);  // fraction of breast y-half-extent

  Exam exam;
  exam.exam_id = exam_id;
  exam.patient_id = patient_id;
  exam.side = side;
  exam.label = malignant ? Pathology::Malignant : Pathology::Benign;

  if (info) *info = {malignant, false, false};

  for (View view : {View::CC, View::MLO}) {
    const bool cue_here = malignant && (!ambiguous || (cue_on_cc_only == (view == View::CC)));
    if (info) {
      if (view == View::CC)
        info->cue_cc = cue_here;
      else
        info->cue_mlo = cue_here;
    }

    synth_detail::Breast breast;
    breast.cy = h / 2.0 + rng.uniform(-0.03, 0.03) * h;
    breast.ry = h * rng.uniform(0.40, 0.46);
    breast.rx = w * rng.uniform(0.74, 0.84);

    std::vector<double> canvas(static_cast<std::size_t>(h) * w, p.background_level);
    const double tissue = rng.uniform(p.tissue_level_lo, p.tissue_level_hi);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        if (breast.inside(r, c, 1.0)) canvas[static_cast<std::size_t>(r) * w + c] = tissue;

    // Low-frequency tissue texture: a few broad soft bumps.
    for (int i = 0; i < 4; ++i) {
      const double by = breast.cy + rng.uniform(-0.8, 0.8) * breast.ry;
      const double bx = rng.uniform(0.05, 0.85) * breast.rx;
      const double br = rng.uniform(18.0, 48.0) * scale;
      const double amp = rng.uniform(-1.0, 1.0) * p.texture_amplitude;
      synth_detail::add_soft_disc(canvas, h, w, by, bx, br, amp);
    }
    // MLO view gets a pectoral wedge in the upper-left corner.
    if (view == View::MLO) {
      const double slope = rng.uniform(0.55, 0.75);
      const double extent = rng.uniform(0.32, 0.42) * h;
      for (int r = 0; r < static_cast<int>(extent); ++r)
        for (int c = 0; c < w; ++c) {
          if (c < (extent - r) * slope && breast.inside(r, c, 1.0))
            canvas[static_cast<std::size_t>(r) * w + c] += 28.0;
        }
    }

    // Place the lesion at the shared normalized position, with a small
    // per-view jitter; retry placement until the full extent fits.
    const double contrast = rng.uniform(p.lesion_contrast_lo, p.lesion_contrast_hi);
    const double mass_radius = rng.uniform(p.mass_radius_lo, p.mass_radius_hi) * scale;
    const double extent_radius =
        (kind == LesionKind::Mass)
            ? (cue_here ? mass_radius * p.spicule_length_factor + 3.0 : mass_radius + 4.0)
            : p.calc_cluster_radius * scale + p.benign_calc_dot_radius + 4.0;

    double ly = 0, lx = 0;
    bool placed = false;
    for (int attempt = 0; attempt < p.max_placement_retries; ++attempt) {
      const double jy = rng.uniform(-0.05, 0.05);
      const double jx = rng.uniform(-0.04, 0.04);
      ly = breast.cy + (pos_v + jy) * breast.ry;
      lx = (pos_u + jx) * breast.rx;
      const bool inside = breast.inside(ly, lx, 0.82);
      const bool fits = ly - extent_radius >= 1 && ly + extent_radius < h - 1 &&
                        lx - extent_radius >= 1 && lx + extent_radius < w - 1;
      if (inside && fits) {
        placed = true;
        break;
      }
    }
    if (!placed)
      throw DataError("synth_exam: could not place lesion inside breast region for " + exam_id);

    double mask_radius;
    if (kind == LesionKind::Mass) {
      if (cue_here) {
        // malignant cue: irregular boundary + radiating spicules
        const double ph1 = rng.uniform(0, 6.283185307179586);
        const double ph2 = rng.uniform(0, 6.283185307179586);
        for (int r = static_cast<int>(ly - mass_radius * 1.6);
             r <= static_cast<int>(ly + mass_radius * 1.6); ++r)
          for (int c = static_cast<int>(lx - mass_radius * 1.6);
               c <= static_cast<int>(lx + mass_radius * 1.6); ++c) {
            if (r < 0 || r >= h || c < 0 || c >= w) continue;
            const double d = std::hypot(r - ly, c - lx);
            const double ang = std::atan2(r - ly, c - lx);
            const double rim = mass_radius * (1.0 + 0.22 * std::sin(3 * ang + ph1) +
                                              0.14 * std::sin(5 * ang + ph2));
            if (d < rim) {
              const double t = std::clamp((rim - d) / 2.0, 0.0, 1.0);
              canvas[static_cast<std::size_t>(r) * w + c] += contrast * (0.55 + 0.45 * t);
            }
          }
        const int n_spicules =
            static_cast<int>(rng.uniform_int(p.spicule_count_lo, p.spicule_count_hi));
        for (int sp = 0; sp < n_spicules; ++sp) {
          const double ang = rng.uniform(0, 6.283185307179586);
          const double len = mass_radius * rng.uniform(1.2, p.spicule_length_factor);
          synth_detail::add_line(canvas, h, w, ly, lx, ang, len, contrast * 0.8);
        }
        mask_radius = mass_radius * p.spicule_length_factor + 2.0;
      } else {
        // benign: smooth round soft blob
        synth_detail::add_soft_disc(canvas, h, w, ly, lx, mass_radius, contrast);
        mask_radius = mass_radius + 3.0;
      }
    } else {
      const double cluster_r = p.calc_cluster_radius * scale;
      if (cue_here) {
        // malignant cue: many fine dots scattered over the cluster
        const int nd =
            static_cast<int>(rng.uniform_int(p.malignant_calc_dots_lo, p.malignant_calc_dots_hi));
        for (int i = 0; i < nd; ++i) {
          const double a = rng.uniform(0, 6.283185307179586);
          const double rr = cluster_r * std::sqrt(rng.uniform());
          synth_detail::add_soft_disc(canvas, h, w, ly + rr * std::sin(a), lx + rr * std::cos(a),
                                      p.malignant_calc_dot_radius * scale,
                                      contrast * rng.uniform(1.0, 1.4));
        }
      } else {
        // benign: a few large round dots on a regular ring
        const int nd =
            static_cast<int>(rng.uniform_int(p.benign_calc_dots_lo, p.benign_calc_dots_hi));
        for (int i = 0; i < nd; ++i) {
          const double a = 6.283185307179586 * i / nd + rng.uniform(-0.15, 0.15);
          const double rr = cluster_r * 0.6;
          synth_detail::add_soft_disc(canvas, h, w, ly + rr * std::sin(a), lx + rr * std::cos(a),
                                      p.benign_calc_dot_radius * scale, contrast * 1.3);
        }
      }
      mask_radius = cluster_r + p.benign_calc_dot_radius * scale + 2.0;
    }

    // Pixel noise, then clamp to 8 bits.
    Image img(h, w, 8);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const double v = canvas[static_cast<std::size_t>(r) * w + c] + rng.normal() * p.noise_sigma;
        img.at(r, c) = static_cast<std::uint16_t>(std::clamp(v, 0.0, 255.0));
      }
    exam.images[view] = std::move(img);

    Mask mask(h, w, 8, 0);
    for (int r = std::max(0, static_cast<int>(ly - mask_radius));
         r <= std::min(h - 1, static_cast<int>(ly + mask_radius)); ++r)
      for (int c = std::max(0, static_cast<int>(lx - mask_radius));
           c <= std::min(w - 1, static_cast<int>(lx + mask_radius)); ++c)
        if (std::hypot(r - ly, c - lx) <= mask_radius) mask.at(r, c) = 255;

    RoiFinding f;
    f.view = view;
    f.mask = std::move(mask);
    f.kind = kind;
    f.malignancy = malignant ? Malignancy::Malignant : Malignancy::Benign;
    exam.rois.push_back(std::move(f));
  }
  return exam;
}

struct SynthDatasetSpec {
  int n_exams = 200;
  SynthParams params;
  double test_fraction = 0.2;  // split_origin for the OD-style protocol
};

inline std::vector<Exam> generate_synth_exams(const SynthDatasetSpec& spec,
                                              std::vector<SynthInfo>* infos = nullptr) {
  std::vector<Exam> exams;
  exams.reserve(spec.n_exams);
  if (infos) infos->clear();
  for (int i = 0; i < spec.n_exams; ++i) {
    Rng rng = Rng::derive(spec.params.seed, {0x657861, static_cast<std::uint64_t>(i)});
    const std::string id = "synth_" + std::to_string(i);
    const std::string patient = "patient_" + std::to_string(i);
    const Side side = (i % 2 == 0) ? Side::Left : Side::Right;
    SynthInfo info;
    exams.push_back(synth_exam(spec.params, rng, id, patient, side, &info));
    if (infos) infos->push_back(info);
  }
  // Stratified train/test split for the OD-style protocol.
  std::vector<std::size_t> strata[2];
  for (std::size_t i = 0; i < exams.size(); ++i)
    strata[exams[i].is_malignant() ? 0 : 1].push_back(i);
  Rng rng = Rng::derive(spec.params.seed, {0x73706c6974});
  for (auto& s : strata) {
    rng.shuffle(s);
    const std::size_t n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * s.size()));
    for (std::size_t i = 0; i < s.size(); ++i)
      exams[s[i]].split_origin = (i < n_test) ? SplitOrigin::Test : SplitOrigin::Train;
  }
  return exams;
}

}  // namespace twoview::dataio
