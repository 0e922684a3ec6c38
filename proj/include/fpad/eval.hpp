#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "fpad/common.hpp"
#include "fpad/manifest.hpp"
#include "fpad/svm.hpp"

namespace fpad {

// Score-level fusion weights: alpha for FV, beta for VLAD, the remainder
// 1 - alpha - beta for BoW.
struct FusionWeights {
  double alpha = 0.0;
  double beta = 0.0;

  void validate() const {
    if (!(alpha >= 0.0) || !(beta >= 0.0) || alpha + beta > 1.0 + 1e-12)
      throw DataError("fusion weights need alpha >= 0, beta >= 0, alpha + beta <= 1");
  }
};

inline PadScore fuse(const PadScore& s_fv, const PadScore& s_vlad,
                     const PadScore& s_bow, const FusionWeights& w) {
  w.validate();
  return PadScore{w.alpha * s_fv.value + w.beta * s_vlad.value +
                      (1.0 - w.alpha - w.beta) * s_bow.value,
                  ScoreSource::Fusion};
}

struct ScoredSample {
  double score = 0.0;  // positive means bona fide
  Label label = Label::BonaFide;
  std::string id;
};

struct DetPoint {
  double threshold = 0.0;
  double apcer = 0.0;
  double bpcer = 0.0;
};

struct EvalReport {
  double threshold = 0.0;  // the delta the headline rates are quoted at
  double apcer = 0.0;
  double bpcer = 0.0;
  double acer = 0.0;
  double d_eer = 0.0;
  double d_eer_threshold = 0.0;
  double bpcer10 = 0.0;
  double bpcer20 = 0.0;
  double bpcer100 = 0.0;
  std::vector<DetPoint> det;  // sorted by threshold
  std::size_t n_bona_fide = 0;
  std::size_t n_attack = 0;
};

namespace detail {

// A sample is called bona fide when score >= threshold. APCER counts attacks
// at or above the threshold, BPCER counts bona fide below it.
struct ScoreLists {
  std::vector<double> bona_fide;  // sorted ascending
  std::vector<double> attack;    // sorted ascending

  double apcer(double t) const {
    const auto it = std::lower_bound(attack.begin(), attack.end(), t);
    return double(attack.end() - it) / double(attack.size());
  }
  double bpcer(double t) const {
    const auto it = std::lower_bound(bona_fide.begin(), bona_fide.end(), t);
    return double(it - bona_fide.begin()) / double(bona_fide.size());
  }
};

inline ScoreLists split_scores(const std::vector<ScoredSample>& scores) {
  ScoreLists lists;
  for (const auto& s : scores) {
    if (!std::isfinite(s.score))
      throw DataError("non-finite score for sample '" + s.id + "'");
    (s.label == Label::BonaFide ? lists.bona_fide : lists.attack).push_back(s.score);
  }
  if (lists.bona_fide.empty() || lists.attack.empty())
    throw DataError("need both classes to evaluate (got " +
                    std::to_string(lists.bona_fide.size()) + " bona fide, " +
                    std::to_string(lists.attack.size()) + " attacks)");
  std::sort(lists.bona_fide.begin(), lists.bona_fide.end());
  std::sort(lists.attack.begin(), lists.attack.end());
  return lists;
}

}  // namespace detail

// ISO/IEC 30107-style report. The DET is traced over every distinct score
// plus two sentinels so it spans (apcer,bpcer) = (1,0) .. (0,1); the D-EER
// interpolates linearly between the two adjacent empirical operating points;
// BPCER@(apcer<=target) picks the smallest threshold reaching the target
// (conservative, no interpolation).
inline EvalReport compute_report(const std::vector<ScoredSample>& scores,
                                 double threshold = 0.0,
                                 std::size_t det_resolution = 0) {
  const detail::ScoreLists lists = detail::split_scores(scores);

  EvalReport rep;
  rep.threshold = threshold;
  rep.n_bona_fide = lists.bona_fide.size();
  rep.n_attack = lists.attack.size();
  rep.apcer = lists.apcer(threshold);
  rep.bpcer = lists.bpcer(threshold);
  rep.acer = 0.5 * (rep.apcer + rep.bpcer);

  std::vector<double> ts;
  ts.reserve(scores.size() + 2);
  for (const auto& s : scores) ts.push_back(s.score);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  ts.insert(ts.begin(), ts.front() - 1.0);  // below every score: apcer 1, bpcer 0
  ts.push_back(ts.back() + 1.0);            // above every score: apcer 0, bpcer 1

  std::vector<DetPoint> det;
  det.reserve(ts.size());
  for (double t : ts) det.push_back({t, lists.apcer(t), lists.bpcer(t)});

  // D-EER: apcer - bpcer is non-increasing along ts; find the sign change.
  std::size_t hi = 0;
  while (hi < det.size() && det[hi].apcer - det[hi].bpcer > 0.0) ++hi;
  if (hi == 0) {
    rep.d_eer = 0.5 * (det[0].apcer + det[0].bpcer);
    rep.d_eer_threshold = det[0].threshold;
  } else if (det[hi].apcer - det[hi].bpcer == 0.0) {
    rep.d_eer = 0.5 * (det[hi].apcer + det[hi].bpcer);
    rep.d_eer_threshold = det[hi].threshold;
  } else {
    const DetPoint& lo = det[hi - 1];
    const DetPoint& up = det[hi];
    const double f_lo = lo.apcer - lo.bpcer;
    const double f_hi = up.apcer - up.bpcer;
    const double theta = f_lo / (f_lo - f_hi);
    const double a = lo.apcer + theta * (up.apcer - lo.apcer);
    const double b = lo.bpcer + theta * (up.bpcer - lo.bpcer);
    rep.d_eer = 0.5 * (a + b);
    rep.d_eer_threshold = lo.threshold + theta * (up.threshold - lo.threshold);
  }

  auto bpcer_at_apcer = [&](double target) {
    for (const auto& p : det)
      if (p.apcer <= target) return p.bpcer;
    return 1.0;  // unreachable: the top sentinel has apcer 0
  };
  rep.bpcer10 = bpcer_at_apcer(0.10);
  rep.bpcer20 = bpcer_at_apcer(0.05);
  rep.bpcer100 = bpcer_at_apcer(0.01);

  if (det_resolution > 0 && det.size() > det_resolution && det_resolution >= 2) {
    std::vector<DetPoint> sub;
    sub.reserve(det_resolution);
    for (std::size_t i = 0; i < det_resolution; ++i) {
      const std::size_t idx = i * (det.size() - 1) / (det_resolution - 1);
      sub.push_back(det[idx]);
    }
    sub.erase(std::unique(sub.begin(), sub.end(),
                          [](const DetPoint& a, const DetPoint& b) {
                            return a.threshold == b.threshold;
                          }),
              sub.end());
    det = std::move(sub);
  }
  rep.det = std::move(det);
  return rep;
}

// Simple group-by APCER at a fixed threshold (e.g. per PAI material).
// `groups` is parallel to `scores`; bona fide samples are ignored.
inline std::map<std::string, double> apcer_by_group(
    const std::vector<ScoredSample>& scores, const std::vector<std::string>& groups,
    double threshold) {
  if (groups.size() != scores.size())
    throw DataError("apcer_by_group: group list misaligned");
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // total, errors
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].label != Label::Attack) continue;
    auto& c = counts[groups[i]];
    ++c.first;
    if (scores[i].score >= threshold) ++c.second;
  }
  std::map<std::string, double> out;
  for (const auto& [g, c] : counts) out[g] = double(c.second) / double(c.first);
  return out;
}

// Exhaustive (alpha, beta) grid search minimizing the fused D-EER on a
// validation set. Ties break toward smaller alpha, then smaller beta.
inline FusionWeights grid_search_weights(const std::vector<ScoredSample>& fv,
                                         const std::vector<ScoredSample>& vlad,
                                         const std::vector<ScoredSample>& bow,
                                         double step = 0.1) {
  if (fv.size() != vlad.size() || fv.size() != bow.size())
    throw DataError("grid search: score lists have different sizes");
  for (std::size_t i = 0; i < fv.size(); ++i) {
    if (fv[i].id != vlad[i].id || fv[i].id != bow[i].id)
      throw DataError("grid search: sample ids misaligned at row " + std::to_string(i));
    if (fv[i].label != vlad[i].label || fv[i].label != bow[i].label)
      throw DataError("grid search: labels misaligned at row " + std::to_string(i));
  }
  if (!(step > 0.0 && step <= 1.0)) throw DataError("grid search: bad step");

  const std::size_t n_steps = std::size_t(std::floor(1.0 / step + 1e-9));
  std::vector<ScoredSample> fused = fv;  // ids/labels reused
  FusionWeights best;
  double best_eer = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i <= n_steps; ++i) {
    for (std::size_t j = 0; i + j <= n_steps; ++j) {
      const double alpha = double(i) * step;
      const double beta = double(j) * step;
      const double gamma = 1.0 - alpha - beta;
      for (std::size_t s = 0; s < fused.size(); ++s)
        fused[s].score =
            alpha * fv[s].score + beta * vlad[s].score + gamma * bow[s].score;
      const EvalReport rep = compute_report(fused, 0.0, 2);
      if (rep.d_eer < best_eer) {
        best_eer = rep.d_eer;
        best = FusionWeights{alpha, beta};
      }
    }
  }
  return best;
}

// ---- score & DET files ------------------------------------------------------

struct ScoreRow {
  std::string id;
  Label label = Label::BonaFide;
  double score = 0.0;
  double s_bf = 0.0;  // raw bona fide-positive SVM score
  double s_pa = 0.0;  // raw attack-positive SVM score
};

inline void save_scores(const std::vector<ScoreRow>& rows, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError(path + ": cannot open for writing");
  os << "id,label,score,s_bf,s_pa\n";
  os.precision(17);
  for (const auto& r : rows)
    os << r.id << ',' << label_name(r.label) << ',' << r.score << ',' << r.s_bf
       << ',' << r.s_pa << '\n';
  if (!os) throw DataError(path + ": short write");
}

inline std::vector<ScoreRow> load_scores(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(path + ": unreadable score file");
  std::string line;
  if (!std::getline(is, line)) throw DataError(path + ": empty score file");
  std::vector<ScoreRow> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    const std::string ctx = path + ":" + std::to_string(line_no);
    if (f.size() != 5) throw DataError(ctx + ": expected 5 fields");
    ScoreRow r;
    r.id = f[0];
    r.label = detail::parse_label(f[1], ctx);
    try {
      r.score = std::stod(f[2]);
      r.s_bf = std::stod(f[3]);
      r.s_pa = std::stod(f[4]);
    } catch (const std::exception&) {
      throw DataError(ctx + ": bad numeric field");
    }
    if (!std::isfinite(r.score)) throw DataError(ctx + ": non-finite score");
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<ScoredSample> to_scored_samples(const std::vector<ScoreRow>& rows) {
  std::vector<ScoredSample> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back({r.score, r.label, r.id});
  return out;
}

inline void save_det_csv(const std::vector<DetPoint>& det, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError(path + ": cannot open for writing");
  os << "threshold,apcer,bpcer\n";
  os.precision(17);
  for (const auto& p : det)
    os << p.threshold << ',' << p.apcer << ',' << p.bpcer << '\n';
  if (!os) throw DataError(path + ": short write");
}

// Minimal standalone DET plot: BPCER (y) against APCER (x), linear axes.
inline void save_det_svg(const std::vector<DetPoint>& det, const std::string& path,
                         const std::string& title = "DET curve") {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError(path + ": cannot open for writing");
  const int w = 480, h = 480, m = 48;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='"
     << h << "'>\n";
  os << "<rect width='" << w << "' height='" << h << "' fill='white'/>\n";
  os << "<text x='" << w / 2 << "' y='20' text-anchor='middle' font-size='14'>"
     << title << "</text>\n";
  os << "<line x1='" << m << "' y1='" << h - m << "' x2='" << w - m << "' y2='"
     << h - m << "' stroke='black'/>\n";
  os << "<line x1='" << m << "' y1='" << m << "' x2='" << m << "' y2='" << h - m
     << "' stroke='black'/>\n";
  os << "<text x='" << w / 2 << "' y='" << h - 12
     << "' text-anchor='middle' font-size='12'>APCER</text>\n";
  os << "<text x='14' y='" << h / 2
     << "' text-anchor='middle' font-size='12' transform='rotate(-90 14 "
     << h / 2 << ")'>BPCER</text>\n";
  os << "<polyline fill='none' stroke='steelblue' stroke-width='1.5' points='";
  for (const auto& p : det) {
    const double px = m + p.apcer * (w - 2 * m);
    const double py = h - m - p.bpcer * (h - 2 * m);
    os << px << ',' << py << ' ';
  }
  os << "'/>\n</svg>\n";
  if (!os) throw DataError(path + ": short write");
}

}  // namespace fpad
