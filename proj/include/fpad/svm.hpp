#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "fpad/common.hpp"
#include "fpad/manifest.hpp"
#include "fpad/matrix.hpp"
#include "fpad/rng.hpp"

namespace fpad {

struct LinearSvm {
  std::vector<float> w;
  double b = 0.0;
  Label positive = Label::BonaFide;  // class mapped to +1 at training time
  // training metadata, persisted with the model
  double lambda = 1e-4;
  int epochs = 50;
  std::uint64_t seed = 1;

  double raw_score(const float* x, std::size_t dim) const {
    if (dim != w.size()) throw DataError("svm: dimension mismatch");
    double s = 0.0;
    for (std::size_t j = 0; j < dim; ++j) s += double(w[j]) * double(x[j]);
    return s + b;
  }
};

struct SvmOptions {
  double lambda = 1e-4;
  int epochs = 50;
  std::uint64_t seed = 1;
};

struct SvmStats {
  // primal objective of the running averaged iterate, one entry per epoch
  std::vector<double> epoch_objective;
};

struct SvmResult {
  LinearSvm svm;
  SvmStats stats;
};

// Primal stochastic subgradient descent (Pegasos-style step size 1/(lambda*t))
// with iterate averaging. The bias is updated by the subgradient without
// shrinkage. Seeded shuffles make training fully deterministic.
inline SvmResult train_svm(const FeatureMatrix& x, const std::vector<Label>& y,
                           Label positive, const SvmOptions& opt = {}) {
  const std::size_t n = x.rows, dim = x.dim;
  if (y.size() != n) throw DataError("svm: labels/vectors size mismatch");
  if (n == 0) throw DataError("svm: empty training set");
  bool has_pos = false, has_neg = false;
  std::vector<double> sign(n);
  for (std::size_t i = 0; i < n; ++i) {
    sign[i] = (y[i] == positive) ? 1.0 : -1.0;
    (sign[i] > 0 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg)
    throw DataError("svm: single-class input (need both classes)");

  std::vector<double> w(dim, 0.0), w_sum(dim, 0.0);
  double b = 0.0, b_sum = 0.0;
  std::size_t steps = 0;

  Rng rng(opt.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  SvmResult res;
  auto objective = [&](const std::vector<double>& wv, double bv) {
    double norm2 = 0.0;
    for (double c : wv) norm2 += c * c;
    double hinge = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const float* row = x.row(i);
      double s = 0.0;
      for (std::size_t j = 0; j < dim; ++j) s += wv[j] * double(row[j]);
      hinge += std::max(0.0, 1.0 - sign[i] * (s + bv));
    }
    return 0.5 * opt.lambda * norm2 + hinge / double(n);
  };

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t ii = 0; ii < n; ++ii) {
      const std::size_t i = order[ii];
      const double t = double(++steps);
      const double eta = 1.0 / (opt.lambda * t);
      const float* row = x.row(i);
      double s = 0.0;
      for (std::size_t j = 0; j < dim; ++j) s += w[j] * double(row[j]);
      const bool violated = sign[i] * (s + b) < 1.0;
      const double shrink = 1.0 - eta * opt.lambda;
      if (violated) {
        const double step = eta * sign[i];
        for (std::size_t j = 0; j < dim; ++j)
          w[j] = shrink * w[j] + step * double(row[j]);
        b += step;
      } else {
        for (std::size_t j = 0; j < dim; ++j) w[j] *= shrink;
      }
      for (std::size_t j = 0; j < dim; ++j) w_sum[j] += w[j];
      b_sum += b;
    }
    std::vector<double> w_avg(dim);
    for (std::size_t j = 0; j < dim; ++j) w_avg[j] = w_sum[j] / double(steps);
    res.stats.epoch_objective.push_back(objective(w_avg, b_sum / double(steps)));
  }

  res.svm.w.resize(dim);
  for (std::size_t j = 0; j < dim; ++j)
    res.svm.w[j] = float(w_sum[j] / double(steps));
  res.svm.b = b_sum / double(steps);
  res.svm.positive = positive;
  res.svm.lambda = opt.lambda;
  res.svm.epochs = opt.epochs;
  res.svm.seed = opt.seed;
  return res;
}

// ---- dual scoring ----------------------------------------------------------

enum class ScoreSource { FV, VLAD, BoW, Fusion };

inline const char* score_source_name(ScoreSource s) {
  switch (s) {
    case ScoreSource::FV: return "fv";
    case ScoreSource::VLAD: return "vlad";
    case ScoreSource::BoW: return "bow";
    case ScoreSource::Fusion: return "fusion";
  }
  return "?";
}

struct PadScore {
  double value = 0.0;  // positive means bona fide
  ScoreSource source = ScoreSource::Fusion;
};

// Two complementary SVMs: one trained with bona fide as +1, one with attack
// as +1.
struct DualScorer {
  LinearSvm svm_bf;  // positive class BonaFide
  LinearSvm svm_pa;  // positive class Attack

  void validate() const {
    if (svm_bf.w.size() != svm_pa.w.size())
      throw DataError("dual scorer: svm dims differ");
    if (svm_bf.positive != Label::BonaFide || svm_pa.positive != Label::Attack)
      throw DataError("dual scorer: positive-class tags are swapped");
  }
};

struct DualScoreDebug {
  double s_bf = 0.0;
  double s_pa = 0.0;
  double value = 0.0;  // selected score, bona fide-positive convention
};

// Picks the score with the smaller distance to its hyperplane (ties go to
// the bona fide SVM). The attack-positive score is negated on selection so
// that positive always means bona fide downstream.
inline DualScoreDebug dual_score_raw(const DualScorer& ds, const float* x,
                                     std::size_t dim) {
  DualScoreDebug out;
  out.s_bf = ds.svm_bf.raw_score(x, dim);
  out.s_pa = ds.svm_pa.raw_score(x, dim);
  out.value = std::abs(out.s_bf) <= std::abs(out.s_pa) ? out.s_bf : -out.s_pa;
  return out;
}

inline PadScore dual_score(const DualScorer& ds, const float* x, std::size_t dim,
                           ScoreSource source) {
  return PadScore{dual_score_raw(ds, x, dim).value, source};
}

inline PadScore dual_score(const DualScorer& ds, const EncodedVector& v,
                           ScoreSource source) {
  return dual_score(ds, v.v.data(), v.v.size(), source);
}

}  // namespace fpad
