#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "twoview/domain.hpp"
#include "twoview/errors.hpp"
#include "twoview/pngio.hpp"
#include "twoview/rng.hpp"

namespace twoview::dataio {

namespace fs = std::filesystem;

enum class BwcPolicy {
  Drop,           // CV protocol: discard benign-without-callback exams
  RelabelBenign,  // OD protocol: keep them as benign
};

struct LoadOptions {
  BwcPolicy bwc_policy = BwcPolicy::RelabelBenign;
  bool drop_single_view = false;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw DataError("metadata CSV missing column '" + name + "'");
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open metadata CSV: " + path);
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (first) {
      t.header = cells;
      first = false;
    } else {
      cells.resize(t.header.size());
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

}  // namespace detail

// Reads the artifact's metadata CSV. Image rows carry image_file; ROI rows
// carry mask_file/kind/malignancy for an already-declared (exam_id, view).
inline std::vector<Exam> load_metadata(const std::string& csv_path, const std::string& image_root,
                                       const LoadOptions& options = {}) {
  const auto table = detail::read_csv(csv_path);
  std::vector<Exam> exams;
  if (table.rows.empty()) return exams;

  const int c_exam = table.col("exam_id");
  const int c_patient = table.col("patient_id");
  const int c_side = table.col("side");
  const int c_view = table.col("view");
  const int c_image = table.col("image_file");
  const int c_label = table.col("label");
  const int c_split = table.col("split");
  const int c_mask = table.col("mask_file");
  const int c_kind = table.col("kind");
  const int c_malig = table.col("malignancy");

  const fs::path root(image_root);
  const auto load_png = [&](const std::string& rel) {
    const fs::path p = root / rel;
    if (!fs::exists(p)) throw DataError("referenced file does not exist: " + p.string());
    return read_png_gray(p.string());
  };

  std::vector<std::string> order;
  std::map<std::string, Exam> by_id;
  std::map<std::string, bool> any_bwc;
  std::set<std::pair<std::string, View>> seen_views;

  for (const auto& row : table.rows) {
    const std::string exam_id = row[c_exam];
    if (exam_id.empty()) throw DataError("metadata row with empty exam_id in " + csv_path);
    auto it = by_id.find(exam_id);
    if (it == by_id.end()) {
      Exam e;
      e.exam_id = exam_id;
      e.patient_id = row[c_patient];
      e.side = side_from_string(row[c_side]);
      e.split_origin = split_from_string(row[c_split]);
      it = by_id.emplace(exam_id, std::move(e)).first;
      order.push_back(exam_id);
      any_bwc[exam_id] = false;
    } else {
      if (!row[c_patient].empty() && it->second.patient_id != row[c_patient])
        throw DataError("exam " + exam_id + " has inconsistent patient_id");
    }
    Exam& exam = it->second;

    const View view = view_from_string(row[c_view]);
    if (!row[c_mask].empty()) {
      // ROI row
      RoiFinding f;
      f.view = view;
      f.mask = load_png(row[c_mask]);
      f.kind = lesion_kind_from_string(row[c_kind]);
      f.malignancy = malignancy_from_string(row[c_malig]);
      if (mask_foreground_count(f.mask) == 0)
        throw DataError("ROI mask has no foreground pixels: " + row[c_mask]);
      exam.rois.push_back(std::move(f));
    } else {
      // image row
      if (row[c_image].empty())
        throw DataError("metadata row with neither image_file nor mask_file for exam " + exam_id);
      if (!seen_views.insert({exam_id, view}).second)
        throw DataError("duplicate (exam_id, view): " + exam_id + "/" + to_string(view));
      exam.images[view] = load_png(row[c_image]);
      if (pathology_from_string(row[c_label]) == Pathology::BenignWithoutCallback)
        any_bwc[exam_id] = true;
    }
  }

  for (const auto& id : order) {
    Exam& exam = by_id[id];
    if (exam.images.empty()) throw DataError("exam " + id + " has ROI rows but no image rows");
    for (const auto& f : exam.rois) {
      if (!exam.has_view(f.view))
        throw DataError("exam " + id + " has an ROI for a view with no image");
      const Image& img = exam.images.at(f.view);
      if (f.mask.height != img.height || f.mask.width != img.width)
        throw DataError("mask/image dimension mismatch on exam " + id);
    }
    exam.label = label_from_findings(exam.rois, any_bwc[id]);
    exams.push_back(std::move(exam));
  }

  std::vector<Exam> filtered;
  for (auto& e : exams) {
    if (e.label == Pathology::BenignWithoutCallback) {
      if (options.bwc_policy == BwcPolicy::Drop) continue;
      e.label = Pathology::Benign;
    }
    if (options.drop_single_view && !e.two_view()) continue;
    filtered.push_back(std::move(e));
  }
  return filtered;
}

namespace detail {

struct Group {
  std::string key;
  std::vector<std::size_t> exam_indices;
  bool malignant = false;
  std::size_t n_exams() const { return exam_indices.size(); }
};

inline std::vector<Group> group_exams(const std::vector<Exam>& exams, bool by_patient_only) {
  std::map<std::string, Group> groups;
  for (std::size_t i = 0; i < exams.size(); ++i) {
    const std::string key = by_patient_only ? exams[i].patient_id : exams[i].breast_key();
    auto& g = groups[key];
    g.key = key;
    g.exam_indices.push_back(i);
    g.malignant = g.malignant || exams[i].is_malignant();
  }
  std::vector<Group> out;
  out.reserve(groups.size());
  for (auto& [k, g] : groups) out.push_back(std::move(g));
  return out;
}

}  // namespace detail

// Deterministic grouped (and by default label-stratified) k-fold assignment.
// The grouping key is patient+side so the two exams of one breast, and any
// repeat exams of it, always land in the same fold.
inline FoldAssignment make_folds(const std::vector<Exam>& exams, int k, std::uint64_t seed,
                                 bool stratified = true, bool group_by_patient_only = false) {
  if (k < 2) throw ConfigError("make_folds: k must be >= 2");
  for (const auto& e : exams)
    if (e.images.empty()) throw DataError("make_folds: exam " + e.exam_id + " has no images");

  auto groups = detail::group_exams(exams, group_by_patient_only);
  if (static_cast<std::size_t>(k) > groups.size())
    throw ConfigError("make_folds: k exceeds the number of groups");

  Rng rng = Rng::derive(seed, {0x666f6c64});
  std::vector<std::vector<const detail::Group*>> strata;
  if (stratified) {
    strata.resize(2);
    for (const auto& g : groups) strata[g.malignant ? 0 : 1].push_back(&g);
  } else {
    strata.resize(1);
    for (const auto& g : groups) strata[0].push_back(&g);
  }

  FoldAssignment fa;
  fa.k = k;
  fa.seed = seed;
  std::vector<std::size_t> fold_sizes(k, 0);
  for (auto& stratum : strata) {
    rng.shuffle(stratum);
    for (const auto* g : stratum) {
      int best = 0;
      for (int f = 1; f < k; ++f)
        if (fold_sizes[f] < fold_sizes[best]) best = f;
      fold_sizes[best] += g->n_exams();
      for (std::size_t idx : g->exam_indices) fa.assignment[exams[idx].exam_id] = best;
    }
  }
  return fa;
}

// Index partition; validation size is round(fraction * N) exactly, drawn
// stratified by label so small desks keep both classes on each side.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> carve_validation_indices(
    const std::vector<Exam>& train_exams, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw ConfigError("carve_validation: fraction must be in (0,1)");
  const std::size_t n = train_exams.size();
  const std::size_t n_val = static_cast<std::size_t>(std::llround(fraction * n));
  if (n_val == 0 || n_val == n)
    throw ConfigError("carve_validation: fraction yields an empty side");

  std::vector<std::size_t> strata[2];
  for (std::size_t i = 0; i < n; ++i)
    strata[train_exams[i].is_malignant() ? 0 : 1].push_back(i);

  // Apportion n_val across strata by largest remainder.
  double quota[2];
  std::size_t take[2];
  for (int s = 0; s < 2; ++s) {
    quota[s] = fraction > 0 ? static_cast<double>(strata[s].size()) * n_val / n : 0;
    take[s] = static_cast<std::size_t>(quota[s]);
  }
  while (take[0] + take[1] < n_val) {
    const int s = (quota[0] - take[0] >= quota[1] - take[1]) ? 0 : 1;
    ++take[s];
  }
  for (int s = 0; s < 2; ++s) take[s] = std::min(take[s], strata[s].size());
  while (take[0] + take[1] < n_val) {
    const int s = (strata[0].size() - take[0] > 0) ? 0 : 1;
    ++take[s];
  }

  Rng rng = Rng::derive(seed, {0x7661});
  std::set<std::size_t> val_set;
  for (int s = 0; s < 2; ++s) {
    auto idx = strata[s];
    rng.shuffle(idx);
    for (std::size_t i = 0; i < take[s]; ++i) val_set.insert(idx[i]);
  }

  std::pair<std::vector<std::size_t>, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; ++i)
    (val_set.count(i) ? out.second : out.first).push_back(i);
  return out;
}

inline std::pair<std::vector<Exam>, std::vector<Exam>> carve_validation(
    const std::vector<Exam>& train_exams, double fraction, std::uint64_t seed) {
  const auto [train_idx, val_idx] = carve_validation_indices(train_exams, fraction, seed);
  std::pair<std::vector<Exam>, std::vector<Exam>> out;
  for (auto i : train_idx) out.first.push_back(train_exams[i]);
  for (auto i : val_idx) out.second.push_back(train_exams[i]);
  return out;
}

// ---- dataset manifest (JSON array of exam records with relative paths) ----

inline void write_dataset(const std::string& dir, const std::vector<Exam>& exams) {
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "masks");
  nlohmann::json manifest;
  manifest["format"] = "twoview-dataset-v1";
  auto& list = manifest["exams"] = nlohmann::json::array();
  for (const auto& e : exams) {
    nlohmann::json je;
    je["exam_id"] = e.exam_id;
    je["patient_id"] = e.patient_id;
    je["side"] = to_string(e.side);
    je["label"] = to_string(e.label);
    je["split"] = to_string(e.split_origin);
    for (const auto& [view, img] : e.images) {
      const std::string rel = std::string("images/") + e.exam_id + "_" + to_string(view) + ".png";
      write_png_gray((fs::path(dir) / rel).string(), img);
      je["views"][to_string(view)] = rel;
    }
    je["rois"] = nlohmann::json::array();
    for (std::size_t i = 0; i < e.rois.size(); ++i) {
      const auto& f = e.rois[i];
      const std::string rel = std::string("masks/") + e.exam_id + "_" + to_string(f.view) +
                              "_roi" + std::to_string(i) + ".png";
      write_png_gray((fs::path(dir) / rel).string(), f.mask);
      je["rois"].push_back({{"view", to_string(f.view)},
                            {"mask", rel},
                            {"kind", to_string(f.kind)},
                            {"malignancy", to_string(f.malignancy)}});
    }
    list.push_back(std::move(je));
  }
  std::ofstream out(fs::path(dir) / "manifest.json");
  out << manifest.dump(2) << "\n";
}

inline std::vector<Exam> load_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open manifest: " + manifest_path);
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const std::exception& ex) {
    throw DataError("malformed manifest " + manifest_path + ": " + ex.what());
  }
  const fs::path root = fs::path(manifest_path).parent_path();
  std::vector<Exam> exams;
  for (const auto& je : manifest.at("exams")) {
    Exam e;
    e.exam_id = je.at("exam_id").get<std::string>();
    e.patient_id = je.at("patient_id").get<std::string>();
    e.side = side_from_string(je.at("side").get<std::string>());
    e.label = pathology_from_string(je.at("label").get<std::string>());
    e.split_origin = split_from_string(je.value("split", "unassigned"));
    for (const auto& [vname, rel] : je.at("views").items())
      e.images[view_from_string(vname)] = read_png_gray((root / rel.get<std::string>()).string());
    for (const auto& jr : je.value("rois", nlohmann::json::array())) {
      RoiFinding f;
      f.view = view_from_string(jr.at("view").get<std::string>());
      f.mask = read_png_gray((root / jr.at("mask").get<std::string>()).string());
      f.kind = lesion_kind_from_string(jr.at("kind").get<std::string>());
      f.malignancy = malignancy_from_string(jr.at("malignancy").get<std::string>());
      e.rois.push_back(std::move(f));
    }
    exams.push_back(std::move(e));
  }
  return exams;
}

}  // namespace twoview::dataio
