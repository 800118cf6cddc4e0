#pragma once

#include <map>
#include <string>
#include <vector>

#include "twoview/errors.hpp"
#include "twoview/image.hpp"

namespace twoview {

enum class View { CC, MLO };
enum class Side { Left, Right };
enum class LesionKind { Mass, Calcification };
enum class Malignancy { Benign, Malignant };
enum class Pathology { Benign, Malignant, BenignWithoutCallback };
enum class SplitOrigin { Train, Test, Unassigned };

inline const char* to_string(View v) { return v == View::CC ? "CC" : "MLO"; }
inline const char* to_string(Side s) { return s == Side::Left ? "left" : "right"; }
inline const char* to_string(LesionKind k) {
  return k == LesionKind::Mass ? "mass" : "calcification";
}
inline const char* to_string(Malignancy m) {
  return m == Malignancy::Benign ? "benign" : "malignant";
}
inline const char* to_string(Pathology p) {
  switch (p) {
    case Pathology::Benign: return "benign";
    case Pathology::Malignant: return "malignant";
    default: return "benign_without_callback";
  }
}
inline const char* to_string(SplitOrigin s) {
  switch (s) {
    case SplitOrigin::Train: return "train";
    case SplitOrigin::Test: return "test";
    default: return "unassigned";
  }
}

inline View view_from_string(const std::string& s) {
  if (s == "CC" || s == "cc") return View::CC;
  if (s == "MLO" || s == "mlo") return View::MLO;
  throw DataError("unknown view: " + s);
}
inline Side side_from_string(const std::string& s) {
  if (s == "left" || s == "LEFT" || s == "L") return Side::Left;
  if (s == "right" || s == "RIGHT" || s == "R") return Side::Right;
  throw DataError("unknown side: " + s);
}
inline LesionKind lesion_kind_from_string(const std::string& s) {
  if (s == "mass") return LesionKind::Mass;
  if (s == "calcification" || s == "calc") return LesionKind::Calcification;
  throw DataError("unknown lesion kind: " + s);
}
inline Malignancy malignancy_from_string(const std::string& s) {
  if (s == "benign") return Malignancy::Benign;
  if (s == "malignant") return Malignancy::Malignant;
  throw DataError("unknown malignancy: " + s);
}
inline Pathology pathology_from_string(const std::string& s) {
  if (s == "benign") return Pathology::Benign;
  if (s == "malignant") return Pathology::Malignant;
  if (s == "benign_without_callback") return Pathology::BenignWithoutCallback;
  throw DataError("unknown label: " + s);
}
inline SplitOrigin split_from_string(const std::string& s) {
  if (s == "train") return SplitOrigin::Train;
  if (s == "test") return SplitOrigin::Test;
  if (s == "unassigned" || s.empty()) return SplitOrigin::Unassigned;
  throw DataError("unknown split: " + s);
}

// One mask-delimited lesion in one view.
struct RoiFinding {
  View view = View::CC;
  Mask mask;
  LesionKind kind = LesionKind::Mass;
  Malignancy malignancy = Malignancy::Benign;
};

// One breast's mammography record: up to two views plus findings.
struct Exam {
  std::string exam_id;
  std::string patient_id;
  Side side = Side::Left;
  std::map<View, Image> images;
  std::vector<RoiFinding> rois;
  Pathology label = Pathology::Benign;
  SplitOrigin split_origin = SplitOrigin::Unassigned;

  bool has_view(View v) const { return images.count(v) != 0; }
  bool two_view() const { return images.size() == 2; }
  bool is_malignant() const { return label == Pathology::Malignant; }
  std::string breast_key() const { return patient_id + "/" + to_string(side); }
};

// An exam is malignant iff any finding is malignant.
inline Pathology label_from_findings(const std::vector<RoiFinding>& rois, bool without_callback) {
  for (const auto& r : rois)
    if (r.malignancy == Malignancy::Malignant) return Pathology::Malignant;
  return without_callback ? Pathology::BenignWithoutCallback : Pathology::Benign;
}

struct FoldAssignment {
  int k = 0;
  std::map<std::string, int> assignment;  // exam_id -> fold index
  std::uint64_t seed = 0;

  int fold_of(const std::string& exam_id) const {
    auto it = assignment.find(exam_id);
    if (it == assignment.end()) throw DataError("exam not in fold assignment: " + exam_id);
    return it->second;
  }
};

}  // namespace twoview
