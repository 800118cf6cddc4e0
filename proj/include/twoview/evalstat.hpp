#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "twoview/errors.hpp"

namespace twoview::evalstat {

// Paired (score, binary label) lists. Label 1 = malignant, 0 = benign.
struct ScoreSet {
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<std::string> ids;  // optional, parallel to scores when present

  std::size_t size() const { return scores.size(); }
  int n_pos() const { return static_cast<int>(std::count(labels.begin(), labels.end(), 1)); }
  int n_neg() const { return static_cast<int>(labels.size()) - n_pos(); }

  void add(double score, int label, std::string id = {}) {
    scores.push_back(score);
    labels.push_back(label);
    ids.push_back(std::move(id));
  }
};

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
  double specificity() const { return 1.0 - fpr; }
};

inline void require_two_classes(const ScoreSet& s) {
  if (s.scores.size() != s.labels.size())
    throw DataError("score/label lists differ in length");
  if (s.n_pos() < 1 || s.n_neg() < 1)
    throw DataError("AUC needs at least one positive and one negative sample");
}

// Mann-Whitney AUC with ties credited 0.5, computed from midranks.
// Equals the trapezoidal area under the ROC curve.
inline double auc(const ScoreSet& s) {
  require_two_classes(s);
  const std::size_t n = s.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && s.scores[order[j + 1]] == s.scores[order[i]]) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k)
      if (s.labels[order[k]] == 1) rank_sum_pos += midrank;
    i = j + 1;
  }
  const double np = s.n_pos(), nn = s.n_neg();
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

// Standard error of an AUC estimate from the positive/negative counts
// (Hanley & McNeil, Radiology 1982).
inline double hanley_mcneil_se(double a, int n_pos, int n_neg) {
  if (!(a >= 0.0 && a <= 1.0)) throw DataError("AUC out of [0,1] in hanley_mcneil_se");
  if (n_pos < 1 || n_neg < 1) throw DataError("hanley_mcneil_se needs n_pos, n_neg >= 1");
  const double q1 = a / (2.0 - a);
  const double q2 = 2.0 * a * a / (1.0 + a);
  const double num = a * (1.0 - a) + (n_pos - 1) * (q1 - a * a) + (n_neg - 1) * (q2 - a * a);
  return std::sqrt(num / (static_cast<double>(n_pos) * n_neg));
}

// One point per distinct threshold, descending, preceded by (0,0).
// The final point is always (1,1).
inline std::vector<RocPoint> roc_curve(const ScoreSet& s) {
  require_two_classes(s);
  const double np = s.n_pos(), nn = s.n_neg();
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return s.scores[a] > s.scores[b]; });

  std::vector<RocPoint> pts;
  pts.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < order.size()) {
    const double thr = s.scores[order[i]];
    while (i < order.size() && s.scores[order[i]] == thr) {
      if (s.labels[order[i]] == 1)
        ++tp;
      else
        ++fp;
      ++i;
    }
    pts.push_back({thr, fp / nn, tp / np});
  }
  return pts;
}

inline double roc_trapezoid_area(const std::vector<RocPoint>& pts) {
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    area += 0.5 * (pts[i].tpr + pts[i - 1].tpr) * (pts[i].fpr - pts[i - 1].fpr);
  return area;
}

struct EerMetrics {
  double threshold;
  double accuracy;
  double sensitivity;
  double specificity;
};

// Operating point where sensitivity equals specificity, found by linear
// interpolation along the ROC polyline. At that point accuracy equals both.
inline EerMetrics eer_metrics(const ScoreSet& s) {
  const auto pts = roc_curve(s);
  const double np = s.n_pos(), nn = s.n_neg();
  // f = tpr + fpr - 1 rises monotonically from -1 to +1 along the curve.
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double f0 = pts[i - 1].tpr + pts[i - 1].fpr - 1.0;
    const double f1 = pts[i].tpr + pts[i].fpr - 1.0;
    if (f1 < 0.0) continue;
    double t = (f1 == f0) ? 0.0 : (0.0 - f0) / (f1 - f0);
    const double sens = pts[i - 1].tpr + t * (pts[i].tpr - pts[i - 1].tpr);
    const double fpr = pts[i - 1].fpr + t * (pts[i].fpr - pts[i - 1].fpr);
    double thr;
    if (std::isinf(pts[i - 1].threshold))
      thr = pts[i].threshold;
    else
      thr = pts[i - 1].threshold + t * (pts[i].threshold - pts[i - 1].threshold);
    const double acc = (sens * np + (1.0 - fpr) * nn) / (np + nn);
    return {thr, acc, sens, 1.0 - fpr};
  }
  throw DataError("eer_metrics: no crossing found on ROC curve");
}

// Mean malignant probability over a fixed list of augmented views.
template <typename ScoreFn, typename Views>
double tta_score(ScoreFn&& score_one, const Views& views) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : views) {
    sum += score_one(v);
    ++n;
  }
  if (n == 0) throw ConfigError("tta_score: empty view list");
  return sum / static_cast<double>(n);
}

// Mean malignant probability over an ensemble of scoring functions.
template <typename Models, typename Input>
double ensemble_score(const Models& models, const Input& input) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& m : models) {
    sum += m(input);
    ++n;
  }
  if (n == 0) throw ConfigError("ensemble_score: empty model list");
  return sum / static_cast<double>(n);
}

struct Aggregate {
  double mean;
  double std;  // population convention (divide by N)
};

inline Aggregate cv_aggregate(const std::vector<double>& fold_aucs) {
  if (fold_aucs.size() < 2) throw DataError("cv_aggregate needs at least 2 folds");
  const double n = static_cast<double>(fold_aucs.size());
  const double mean = std::accumulate(fold_aucs.begin(), fold_aucs.end(), 0.0) / n;
  double ss = 0.0;
  for (double a : fold_aucs) ss += (a - mean) * (a - mean);
  return {mean, std::sqrt(ss / n)};
}

// ---- ScoreSet / ROC file formats ----

inline void write_score_csv(const std::string& path, const ScoreSet& s) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "exam_id,score,label\n";
  char buf[64];
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", s.scores[i]);
    out << (i < s.ids.size() ? s.ids[i] : std::string{}) << ',' << buf << ',' << s.labels[i]
        << '\n';
  }
}

inline ScoreSet read_score_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  ScoreSet s;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;  // header
    const auto c1 = line.find(',');
    const auto c2 = (c1 == std::string::npos) ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos)
      throw DataError("malformed score CSV row at line " + std::to_string(lineno) + " in " + path);
    try {
      const double score = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
      const int label = std::stoi(line.substr(c2 + 1));
      if (label != 0 && label != 1) throw std::invalid_argument("label");
      s.add(score, label, line.substr(0, c1));
    } catch (const std::exception&) {
      throw DataError("malformed score CSV row at line " + std::to_string(lineno) + " in " + path);
    }
  }
  return s;
}

inline void write_roc_csv(const std::string& path, const std::vector<RocPoint>& pts) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "threshold,fpr,tpr\n";
  char buf[160];
  for (const auto& p : pts) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold, p.fpr, p.tpr);
    out << buf;
  }
}

// Minimal standalone SVG plot, axes labeled sensitivity vs 1-specificity.
inline void write_roc_svg(const std::string& path, const std::vector<RocPoint>& pts,
                          const std::string& title) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  const int w = 480, h = 480, m = 56;
  const auto X = [&](double fpr) { return m + fpr * (w - 2 * m); };
  const auto Y = [&](double tpr) { return h - m - tpr * (h - 2 * m); };
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<line x1='" << X(0) << "' y1='" << Y(0) << "' x2='" << X(1) << "' y2='" << Y(0)
      << "' stroke='black'/>\n";
  out << "<line x1='" << X(0) << "' y1='" << Y(0) << "' x2='" << X(0) << "' y2='" << Y(1)
      << "' stroke='black'/>\n";
  out << "<line x1='" << X(0) << "' y1='" << Y(0) << "' x2='" << X(1) << "' y2='" << Y(1)
      << "' stroke='#bbbbbb' stroke-dasharray='4'/>\n";
  out << "<text x='" << w / 2 << "' y='" << h - 12 << "' text-anchor='middle'>1 - specificity</text>\n";
  out << "<text x='16' y='" << h / 2 << "' text-anchor='middle' transform='rotate(-90 16 "
      << h / 2 << ")'>sensitivity</text>\n";
  out << "<text x='" << w / 2 << "' y='24' text-anchor='middle'>" << title << "</text>\n";
  out << "<polyline fill='none' stroke='#c0392b' stroke-width='1.5' points='";
  for (const auto& p : pts) out << X(p.fpr) << ',' << Y(p.tpr) << ' ';
  out << "'/>\n</svg>\n";
}

}  // namespace twoview::evalstat
