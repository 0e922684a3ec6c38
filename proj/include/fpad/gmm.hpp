#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "fpad/common.hpp"
#include "fpad/kmeans.hpp"
#include "fpad/matrix.hpp"
#include "fpad/parallel.hpp"

namespace fpad {

// Diagonal-covariance Gaussian mixture.
struct GmmModel {
  std::size_t K = 0;
  std::size_t dim = 0;
  std::vector<float> weights;    // K, positive, sums to 1
  std::vector<float> means;      // K x dim
  std::vector<float> variances;  // K x dim, >= the training-time floor

  const float* mean(std::size_t k) const { return means.data() + k * dim; }
  const float* variance(std::size_t k) const { return variances.data() + k * dim; }
};

struct GmmOptions {
  std::uint64_t seed = 1;
  int max_iters = 100;
  double tol = 1e-5;  // relative log-likelihood improvement
  unsigned threads = 1;
  int kmeans_iters = 25;  // for the initial codebook
};

struct GmmStats {
  std::vector<double> log_likelihood;  // mean per point, one entry per iteration
  std::size_t iterations = 0;
  std::vector<std::size_t> reseed_iterations;
};

struct GmmResult {
  GmmModel model;
  GmmStats stats;
};

// Soft-assignment weights of x to each component, via log-sum-exp.
inline std::vector<double> posteriors(const GmmModel& g, const float* x,
                                      std::size_t dim) {
  if (dim != g.dim) throw DataError("gmm: dimension mismatch");
  constexpr double log_two_pi = 1.8378770664093454836;  // log(2*pi)
  std::vector<double> logp(g.K);
  double max_lp = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < g.K; ++k) {
    const float* mu = g.mean(k);
    const float* var = g.variance(k);
    double quad = 0.0, logdet = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double v = double(var[j]);
      const double dxm = double(x[j]) - double(mu[j]);
      quad += dxm * dxm / v;
      logdet += std::log(v);
    }
    logp[k] = std::log(double(g.weights[k])) -
              0.5 * (double(dim) * log_two_pi + logdet + quad);
    max_lp = std::max(max_lp, logp[k]);
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < g.K; ++k) {
    logp[k] = std::exp(logp[k] - max_lp);
    sum += logp[k];
  }
  for (auto& a : logp) a /= sum;
  return logp;
}

namespace detail {

class GmmTrainer {
 public:
  GmmTrainer(const FeatureMatrix& x, std::size_t k, const GmmOptions& opt)
      : x_(x), k_(k), opt_(opt), n_(x.rows), d_(x.dim) {
    if (n_ < 10 * k_)
      throw DataError("gmm: insufficient data (need at least 10*K = " +
                      std::to_string(10 * k_) + " points, got " +
                      std::to_string(n_) + ")");
  }

  GmmResult run() {
    compute_floor();
    init_from_kmeans();

    GmmStats stats;
    double prev_ll = -std::numeric_limits<double>::infinity();
    bool reseeded_last = false;
    for (int iter = 0; iter < opt_.max_iters; ++iter) {
      const double ll = em_step();  // E + M in one pass
      stats.log_likelihood.push_back(ll);
      stats.iterations = std::size_t(iter) + 1;

      if (iter > 0 && !reseeded_last &&
          ll < prev_ll - 1e-8 * std::max(1.0, std::abs(prev_ll)))
        throw NumericError("gmm: log-likelihood decreased at iteration " +
                           std::to_string(iter));
      reseeded_last = false;
      if (degenerate_component_ != k_) {
        reseed_component(degenerate_component_);
        stats.reseed_iterations.push_back(std::size_t(iter));
        reseeded_last = true;
        degenerate_component_ = k_;
      } else if (iter > 0 &&
                 std::abs(ll - prev_ll) < opt_.tol * std::max(1.0, std::abs(prev_ll))) {
        break;
      }
      prev_ll = ll;
    }

    GmmResult res;
    res.model.K = k_;
    res.model.dim = d_;
    res.model.weights.resize(k_);
    res.model.means.resize(k_ * d_);
    res.model.variances.resize(k_ * d_);
    for (std::size_t k = 0; k < k_; ++k) res.model.weights[k] = float(weights_[k]);
    for (std::size_t j = 0; j < k_ * d_; ++j) {
      res.model.means[j] = float(means_[j]);
      res.model.variances[j] = float(vars_[j]);
    }
    res.stats = std::move(stats);
    return res;
  }

 private:
  void compute_floor() {
    std::vector<double> mean(d_, 0.0), sq(d_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      const float* row = x_.row(i);
      for (std::size_t j = 0; j < d_; ++j) {
        mean[j] += double(row[j]);
        sq[j] += double(row[j]) * double(row[j]);
      }
    }
    double total = 0.0;
    for (std::size_t j = 0; j < d_; ++j) {
      mean[j] /= double(n_);
      total += std::max(0.0, sq[j] / double(n_) - mean[j] * mean[j]);
    }
    data_mean_ = std::move(mean);
    mean_variance_ = total / double(d_);
    var_floor_ = std::max(1e-4 * mean_variance_, 1e-300);
  }

  void init_from_kmeans() {
    KmeansOptions ko;
    ko.seed = opt_.seed;
    ko.max_iters = opt_.kmeans_iters;
    ko.threads = opt_.threads;
    const KmeansResult km = train_kmeans(x_, k_, ko);

    weights_.assign(k_, 0.0);
    means_.assign(k_ * d_, 0.0);
    vars_.assign(k_ * d_, 0.0);
    std::vector<std::size_t> counts(k_, 0);
    std::vector<double> sq(k_ * d_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t a = assign(km.codebook, x_.row(i), d_);
      ++counts[a];
      const float* row = x_.row(i);
      for (std::size_t j = 0; j < d_; ++j) {
        means_[a * d_ + j] += double(row[j]);
        sq[a * d_ + j] += double(row[j]) * double(row[j]);
      }
    }
    for (std::size_t k = 0; k < k_; ++k) {
      const double cnt = double(std::max<std::size_t>(counts[k], 1));
      weights_[k] = std::max(double(counts[k]), 1.0) / double(n_);
      for (std::size_t j = 0; j < d_; ++j) {
        means_[k * d_ + j] /= cnt;
        const double v = sq[k * d_ + j] / cnt - means_[k * d_ + j] * means_[k * d_ + j];
        vars_[k * d_ + j] = std::max(v, var_floor_);
      }
    }
    const double wsum = std::accumulate(weights_.begin(), weights_.end(), 0.0);
    for (auto& w : weights_) w /= wsum;
  }

  // One EM sweep; returns the mean log-likelihood under the pre-update
  // parameters and stores the updated ones. Flags (not fixes) a degenerate
  // component so the caller can re-seed deterministically between sweeps.
  double em_step() {
    std::vector<double> log_const(k_), inv_var(k_ * d_);
    constexpr double log_two_pi = 1.8378770664093454836;
    for (std::size_t k = 0; k < k_; ++k) {
      double logdet = 0.0;
      for (std::size_t j = 0; j < d_; ++j) {
        inv_var[k * d_ + j] = 1.0 / vars_[k * d_ + j];
        logdet += std::log(vars_[k * d_ + j]);
      }
      log_const[k] = std::log(weights_[k]) - 0.5 * (double(d_) * log_two_pi + logdet);
    }

    constexpr std::size_t chunk = 4096;
    const std::size_t n_chunks = (n_ + chunk - 1) / chunk;
    struct Acc {
      std::vector<double> w, wx, wxx;
      double ll = 0.0;
    };
    std::vector<Acc> acc(n_chunks);
    parallel_chunks(n_, chunk, opt_.threads, [&](std::size_t c, std::size_t b, std::size_t e) {
      Acc& a = acc[c];
      a.w.assign(k_, 0.0);
      a.wx.assign(k_ * d_, 0.0);
      a.wxx.assign(k_ * d_, 0.0);
      std::vector<double> logp(k_);
      for (std::size_t i = b; i < e; ++i) {
        const float* row = x_.row(i);
        double max_lp = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < k_; ++k) {
          double quad = 0.0;
          const double* iv = inv_var.data() + k * d_;
          const double* mu = means_.data() + k * d_;
          for (std::size_t j = 0; j < d_; ++j) {
            const double dxm = double(row[j]) - mu[j];
            quad += dxm * dxm * iv[j];
          }
          logp[k] = log_const[k] - 0.5 * quad;
          max_lp = std::max(max_lp, logp[k]);
        }
        double sum = 0.0;
        for (std::size_t k = 0; k < k_; ++k) {
          logp[k] = std::exp(logp[k] - max_lp);
          sum += logp[k];
        }
        a.ll += max_lp + std::log(sum);
        const double inv_sum = 1.0 / sum;
        for (std::size_t k = 0; k < k_; ++k) {
          const double g = logp[k] * inv_sum;
          if (g == 0.0) continue;
          a.w[k] += g;
          double* wx = a.wx.data() + k * d_;
          double* wxx = a.wxx.data() + k * d_;
          for (std::size_t j = 0; j < d_; ++j) {
            const double v = double(row[j]);
            wx[j] += g * v;
            wxx[j] += g * v * v;
          }
        }
      }
    });

    std::vector<double> nk(k_, 0.0), sx(k_ * d_, 0.0), sxx(k_ * d_, 0.0);
    double ll = 0.0;
    for (const auto& a : acc) {
      ll += a.ll;
      for (std::size_t k = 0; k < k_; ++k) nk[k] += a.w[k];
      for (std::size_t j = 0; j < k_ * d_; ++j) {
        sx[j] += a.wx[j];
        sxx[j] += a.wxx[j];
      }
    }

    degenerate_component_ = k_;
    for (std::size_t k = 0; k < k_; ++k) {
      if (nk[k] / double(n_) < 1e-8) {
        if (degenerate_component_ == k_) degenerate_component_ = k;
        continue;
      }
      const double inv_nk = 1.0 / nk[k];
      for (std::size_t j = 0; j < d_; ++j) {
        const double mu = sx[k * d_ + j] * inv_nk;
        means_[k * d_ + j] = mu;
        vars_[k * d_ + j] = std::max(sxx[k * d_ + j] * inv_nk - mu * mu, var_floor_);
      }
      weights_[k] = nk[k] / double(n_);
    }
    double wsum = std::accumulate(weights_.begin(), weights_.end(), 0.0);
    for (auto& w : weights_) w /= wsum;
    return ll / double(n_);
  }

  void reseed_component(std::size_t k) {
    if (reseeded_[k]++ > 0)
      throw NumericError("gmm: component " + std::to_string(k) +
                         " degenerated twice (weight < 1e-8)");
    // hardest point under the current model seeds the replacement
    double worst = std::numeric_limits<double>::infinity();
    std::size_t pick = 0;
    GmmModel snapshot;
    snapshot.K = k_;
    snapshot.dim = d_;
    snapshot.weights.assign(weights_.begin(), weights_.end());
    snapshot.means.assign(means_.begin(), means_.end());
    snapshot.variances.assign(vars_.begin(), vars_.end());
    for (std::size_t i = 0; i < n_; ++i) {
      const auto post = posteriors(snapshot, x_.row(i), d_);
      double best = 0.0;
      for (std::size_t c = 0; c < k_; ++c) best = std::max(best, post[c]);
      if (best < worst) {
        worst = best;
        pick = i;
      }
    }
    const float* row = x_.row(pick);
    for (std::size_t j = 0; j < d_; ++j) {
      means_[k * d_ + j] = double(row[j]);
      vars_[k * d_ + j] = std::max(mean_variance_, var_floor_);
    }
    weights_[k] = 1.0 / double(k_);
    double wsum = std::accumulate(weights_.begin(), weights_.end(), 0.0);
    for (auto& w : weights_) w /= wsum;
  }

  const FeatureMatrix& x_;
  std::size_t k_;
  GmmOptions opt_;
  std::size_t n_, d_;

  std::vector<double> weights_, means_, vars_, data_mean_;
  double mean_variance_ = 0.0;
  double var_floor_ = 0.0;
  std::size_t degenerate_component_ = 0;
  std::vector<int> reseeded_ = std::vector<int>(k_, 0);
};

}  // namespace detail

// EM with a k-means++/Lloyd initialization. Variances are floored at
// 1e-4 * mean per-dimension data variance; the mean log-likelihood is
// checked to be non-decreasing (1e-8 slack) except across a re-seed.
inline GmmResult train_gmm(const FeatureMatrix& x, std::size_t k,
                           const GmmOptions& opt = {}) {
  detail::GmmTrainer trainer(x, k, opt);
  return trainer.run();
}

}  // namespace fpad
