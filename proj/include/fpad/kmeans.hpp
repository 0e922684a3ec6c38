#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "fpad/common.hpp"
#include "fpad/linalg.hpp"
#include "fpad/matrix.hpp"
#include "fpad/parallel.hpp"
#include "fpad/rng.hpp"

namespace fpad {

struct Codebook {
  std::size_t K = 0;
  std::size_t dim = 0;
  std::vector<float> centroids;  // row-major K x dim

  const float* centroid(std::size_t k) const { return centroids.data() + k * dim; }
};

enum class KmeansAccel { Auto, Elkan, Lloyd };

struct KmeansOptions {
  std::uint64_t seed = 1;
  int max_iters = 100;
  KmeansAccel accel = KmeansAccel::Auto;
  // Elkan keeps n*K lower bounds; above this budget Auto falls back to plain
  // Lloyd (identical results, no bound arrays).
  std::size_t elkan_memory_budget = std::size_t(1) << 30;
  unsigned threads = 1;
  bool record_assignments = false;  // per-iteration history, for tests
};

struct KmeansStats {
  std::size_t iterations = 0;
  std::vector<double> distortion;  // one entry per iteration, non-increasing
  bool elkan_used = false;
  std::vector<std::vector<std::uint32_t>> assignment_history;
};

struct KmeansResult {
  Codebook codebook;
  KmeansStats stats;
};

// Exact nearest-centroid index for a single vector: linear scan with
// partial-distance early exit. Ties resolve to the lowest index; results are
// bit-identical to a plain full scan because the per-candidate accumulation
// order is unchanged and the exit test is strict.
inline std::size_t assign(const Codebook& cb, const float* x, std::size_t dim) {
  if (dim != cb.dim) throw DataError("assign: dimension mismatch");
  if (cb.K == 0) throw DataError("assign: empty codebook");
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_k = 0;
  for (std::size_t k = 0; k < cb.K; ++k) {
    const float* c = cb.centroid(k);
    double s = 0.0;
    std::size_t i = 0;
    for (; i < dim; ++i) {
      const double d = double(x[i]) - double(c[i]);
      s += d * d;
      if (s > best) break;
    }
    if (i == dim && s < best) {
      best = s;
      best_k = k;
    }
  }
  return best_k;
}

namespace detail {

constexpr double kBoundMargin = 1e-6;    // slack on Elkan bound comparisons
constexpr std::size_t kPointChunk = 4096;  // fixed grid => thread-count independent

// store a float lower bound rounded toward zero so it never overstates
inline float down_f(double v) { return float(std::max(0.0, v) * (1.0 - 1e-7)); }

class KmeansTrainer {
 public:
  KmeansTrainer(const FeatureMatrix& x, std::size_t k, const KmeansOptions& opt)
      : x_(x), k_(k), opt_(opt), n_(x.rows), d_(x.dim) {
    if (k_ == 0) throw DataError("k-means: K must be >= 1");
    if (n_ < k_) throw DataError("k-means: insufficient distinct points (n < K)");
    const std::size_t bound_bytes = n_ * k_ * sizeof(float);
    switch (opt.accel) {
      case KmeansAccel::Elkan: elkan_ = true; break;
      case KmeansAccel::Lloyd: elkan_ = false; break;
      case KmeansAccel::Auto: elkan_ = bound_bytes <= opt.elkan_memory_budget; break;
    }
  }

  KmeansResult run() {
    init_plusplus();
    assignment_.assign(n_, 0);
    std::vector<std::uint32_t> prev;

    if (elkan_) {
      lower_.assign(n_ * k_, 0.0f);
      upper_.assign(n_, 0.0);
      upper_stale_.assign(n_, 0);
    }

    KmeansStats stats;
    stats.elkan_used = elkan_;
    for (int iter = 0; iter < opt_.max_iters; ++iter) {
      if (iter == 0 || !elkan_)
        assign_full(iter == 0 && elkan_);
      else
        assign_elkan();

      const double distortion = exact_distance_pass();
      stats.distortion.push_back(distortion);
      reseed_empty_clusters();
      stats.iterations = std::size_t(iter) + 1;
      if (opt_.record_assignments) stats.assignment_history.push_back(assignment_);

      if (iter > 0 && assignment_ == prev) break;
      prev = assignment_;
      update_means();
      if (elkan_) update_bounds();
    }

    KmeansResult res;
    res.codebook.K = k_;
    res.codebook.dim = d_;
    res.codebook.centroids.resize(k_ * d_);
    for (std::size_t i = 0; i < k_ * d_; ++i)
      res.codebook.centroids[i] = float(centroids_[i]);
    check_distinct(res.codebook);
    res.stats = std::move(stats);
    return res;
  }

 private:
  double sq_dist_to_centroid(const float* x, std::size_t k) const {
    const double* c = centroids_.data() + k * d_;
    double s = 0.0;
    for (std::size_t i = 0; i < d_; ++i) {
      const double dd = double(x[i]) - c[i];
      s += dd * dd;
    }
    return s;
  }

  void init_plusplus() {
    Rng rng(opt_.seed);
    centroids_.assign(k_ * d_, 0.0);
    const std::size_t first = rng.next_index(n_);
    for (std::size_t j = 0; j < d_; ++j) centroids_[j] = double(x_.row(first)[j]);

    std::vector<double> min_d2(n_);
    auto refresh = [&](std::size_t k) {
      parallel_chunks(n_, kPointChunk, opt_.threads,
                      [&](std::size_t, std::size_t b, std::size_t e) {
                        for (std::size_t i = b; i < e; ++i) {
                          const double d2 = sq_dist_to_centroid(x_.row(i), k);
                          if (k == 0 || d2 < min_d2[i]) min_d2[i] = d2;
                        }
                      });
    };
    refresh(0);
    for (std::size_t k = 1; k < k_; ++k) {
      double total = 0.0;
      for (std::size_t i = 0; i < n_; ++i) total += min_d2[i];
      if (!(total > 0.0))
        throw DataError("k-means: insufficient distinct points for K=" +
                        std::to_string(k_) + " (only " + std::to_string(k) +
                        " distinct)");
      const double r = rng.next_double() * total;
      double cum = 0.0;
      std::size_t pick = n_;
      for (std::size_t i = 0; i < n_; ++i) {
        cum += min_d2[i];
        if (cum > r && min_d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
      if (pick == n_) {  // numerical tail: last point with positive weight
        for (std::size_t i = n_; i-- > 0;)
          if (min_d2[i] > 0.0) {
            pick = i;
            break;
          }
      }
      for (std::size_t j = 0; j < d_; ++j)
        centroids_[k * d_ + j] = double(x_.row(pick)[j]);
      refresh(k);
    }
  }

  // Full scan with partial-distance early exit (exact, lowest-index ties).
  // When `fill_bounds` is set (Elkan's first iteration) distances to every
  // centroid are computed completely and cached as lower bounds.
  void assign_full(bool fill_bounds) {
    parallel_chunks(n_, kPointChunk, opt_.threads,
                    [&](std::size_t, std::size_t b, std::size_t e) {
                      for (std::size_t i = b; i < e; ++i) {
                        const float* x = x_.row(i);
                        double best = std::numeric_limits<double>::infinity();
                        std::size_t best_k = 0;
                        for (std::size_t k = 0; k < k_; ++k) {
                          if (fill_bounds) {
                            const double d2 = sq_dist_to_centroid(x, k);
                            lower_[i * k_ + k] = down_f(std::sqrt(d2));
                            if (d2 < best) {
                              best = d2;
                              best_k = k;
                            }
                          } else {
                            const double* c = centroids_.data() + k * d_;
                            double s = 0.0;
                            std::size_t j = 0;
                            for (; j < d_; ++j) {
                              const double dd = double(x[j]) - c[j];
                              s += dd * dd;
                              if (s > best) break;
                            }
                            if (j == d_ && s < best) {
                              best = s;
                              best_k = k;
                            }
                          }
                        }
                        assignment_[i] = std::uint32_t(best_k);
                        if (fill_bounds) {
                          upper_[i] = std::sqrt(best);
                          upper_stale_[i] = 0;
                        }
                      }
                    });
  }

  void compute_center_distances() {
    cc_.assign(k_ * k_, 0.0);
    s_half_.assign(k_, std::numeric_limits<double>::infinity());
    parallel_chunks(k_, 8, opt_.threads, [&](std::size_t, std::size_t b, std::size_t e) {
      for (std::size_t a = b; a < e; ++a) {
        for (std::size_t k2 = 0; k2 < k_; ++k2) {
          if (k2 == a) continue;
          double s = 0.0;
          for (std::size_t j = 0; j < d_; ++j) {
            const double dd = centroids_[a * d_ + j] - centroids_[k2 * d_ + j];
            s += dd * dd;
          }
          const double dist = std::sqrt(s);
          cc_[a * k_ + k2] = dist;
          s_half_[a] = std::min(s_half_[a], 0.5 * dist);
        }
      }
    });
  }

  void assign_elkan() {
    compute_center_distances();
    constexpr double up = 1.0 + kBoundMargin;
    constexpr double dn = 1.0 - kBoundMargin;
    parallel_chunks(n_, kPointChunk, opt_.threads,
                    [&](std::size_t, std::size_t b, std::size_t e) {
                      for (std::size_t i = b; i < e; ++i) {
                        std::size_t a = assignment_[i];
                        double u = upper_[i];
                        bool stale = upper_stale_[i] != 0;
                        if (u * up < s_half_[a] * dn) continue;  // strictly inside the safe ball

                        const float* x = x_.row(i);
                        float* lrow = lower_.data() + i * k_;
                        for (std::size_t k = 0; k < k_; ++k) {
                          if (k == a) continue;
                          if (double(lrow[k]) * dn > u * up) continue;
                          if (0.5 * cc_[a * k_ + k] * dn > u * up) continue;
                          if (stale) {
                            const double da = std::sqrt(sq_dist_to_centroid(x, a));
                            u = da;
                            lrow[a] = down_f(da);
                            stale = false;
                            if (double(lrow[k]) * dn > u * up) continue;
                            if (0.5 * cc_[a * k_ + k] * dn > u * up) continue;
                          }
                          // exact distance, partial exit strictly above u^2
                          const double u2 = u * u;
                          const double* c = centroids_.data() + k * d_;
                          double s = 0.0;
                          std::size_t j = 0;
                          for (; j < d_; ++j) {
                            const double dd = double(x[j]) - c[j];
                            s += dd * dd;
                            if (s > u2) break;
                          }
                          if (j < d_) {
                            lrow[k] = down_f(std::sqrt(s));  // partial sum is a valid bound
                            continue;
                          }
                          const double dist = std::sqrt(s);
                          lrow[k] = down_f(dist);
                          if (dist < u || (dist == u && k < a)) {
                            a = k;
                            u = dist;
                            stale = false;
                          }
                        }
                        assignment_[i] = std::uint32_t(a);
                        upper_[i] = u;
                        upper_stale_[i] = stale ? 1 : 0;
                      }
                    });
  }

  // d^2 to the assigned centroid for every point; also the distortion value.
  double exact_distance_pass() {
    const std::size_t n_chunks = (n_ + kPointChunk - 1) / kPointChunk;
    std::vector<double> partial(n_chunks, 0.0);
    dist2_.resize(n_);
    parallel_chunks(n_, kPointChunk, opt_.threads,
                    [&](std::size_t c, std::size_t b, std::size_t e) {
                      double s = 0.0;
                      for (std::size_t i = b; i < e; ++i) {
                        dist2_[i] = sq_dist_to_centroid(x_.row(i), assignment_[i]);
                        s += dist2_[i];
                      }
                      partial[c] = s;
                    });
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
  }

  // Empty clusters are re-seeded to the farthest point from its centroid
  // (ties to the lowest point index); donor clusters must keep >= 1 member.
  void reseed_empty_clusters() {
    std::vector<std::size_t> counts(k_, 0);
    for (std::uint32_t a : assignment_) ++counts[a];
    for (std::size_t k = 0; k < k_; ++k) {
      if (counts[k] != 0) continue;
      double best = -1.0;
      std::size_t pick = n_;
      for (std::size_t i = 0; i < n_; ++i) {
        if (counts[assignment_[i]] < 2) continue;
        if (dist2_[i] > best) {
          best = dist2_[i];
          pick = i;
        }
      }
      if (pick == n_)
        throw NumericError("k-means: cannot re-seed empty cluster " +
                           std::to_string(k));
      --counts[assignment_[pick]];
      ++counts[k];
      assignment_[pick] = std::uint32_t(k);
      dist2_[pick] = 0.0;
      if (elkan_) {
        // the stolen point now defines cluster k; its bookkeeping is rebuilt
        // by the movement update after the means step
        upper_[pick] = std::numeric_limits<double>::max();
        upper_stale_[pick] = 1;
      }
    }
  }

  void update_means() {
    old_centroids_ = centroids_;
    const std::size_t n_chunks = (n_ + kPointChunk - 1) / kPointChunk;
    std::vector<std::vector<double>> sums(n_chunks);
    std::vector<std::vector<std::size_t>> counts(n_chunks);
    parallel_chunks(n_, kPointChunk, opt_.threads,
                    [&](std::size_t c, std::size_t b, std::size_t e) {
                      sums[c].assign(k_ * d_, 0.0);
                      counts[c].assign(k_, 0);
                      for (std::size_t i = b; i < e; ++i) {
                        const float* x = x_.row(i);
                        double* dst = sums[c].data() + assignment_[i] * d_;
                        for (std::size_t j = 0; j < d_; ++j) dst[j] += double(x[j]);
                        ++counts[c][assignment_[i]];
                      }
                    });
    std::vector<double> total(k_ * d_, 0.0);
    std::vector<std::size_t> cnt(k_, 0);
    for (std::size_t c = 0; c < n_chunks; ++c) {
      for (std::size_t j = 0; j < k_ * d_; ++j) total[j] += sums[c][j];
      for (std::size_t k = 0; k < k_; ++k) cnt[k] += counts[c][k];
    }
    for (std::size_t k = 0; k < k_; ++k) {
      const double inv = 1.0 / double(cnt[k]);
      for (std::size_t j = 0; j < d_; ++j) centroids_[k * d_ + j] = total[k * d_ + j] * inv;
    }
  }

  void update_bounds() {
    std::vector<double> delta(k_, 0.0);
    for (std::size_t k = 0; k < k_; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < d_; ++j) {
        const double dd = centroids_[k * d_ + j] - old_centroids_[k * d_ + j];
        s += dd * dd;
      }
      delta[k] = std::sqrt(s);
    }
    parallel_chunks(n_, kPointChunk, opt_.threads,
                    [&](std::size_t, std::size_t b, std::size_t e) {
                      for (std::size_t i = b; i < e; ++i) {
                        float* lrow = lower_.data() + i * k_;
                        for (std::size_t k = 0; k < k_; ++k)
                          if (delta[k] > 0.0)
                            lrow[k] = down_f(double(lrow[k]) - delta[k]);
                        const double da = delta[assignment_[i]];
                        if (da > 0.0) {
                          upper_[i] += da;
                          upper_stale_[i] = 1;
                        }
                      }
                    });
  }

  void check_distinct(const Codebook& cb) const {
    for (std::size_t a = 0; a < cb.K; ++a)
      for (std::size_t b2 = a + 1; b2 < cb.K; ++b2)
        if (std::equal(cb.centroid(a), cb.centroid(a) + cb.dim, cb.centroid(b2)))
          throw NumericError("k-means: training produced identical centroids " +
                             std::to_string(a) + " and " + std::to_string(b2));
  }

  const FeatureMatrix& x_;
  std::size_t k_;
  KmeansOptions opt_;
  std::size_t n_, d_;
  bool elkan_ = false;

  std::vector<double> centroids_, old_centroids_;
  std::vector<std::uint32_t> assignment_;
  std::vector<double> dist2_;
  std::vector<float> lower_;
  std::vector<double> upper_;
  std::vector<std::uint8_t> upper_stale_;
  std::vector<double> cc_;
  std::vector<double> s_half_;
};

}  // namespace detail

// Lloyd iterations from a k-means++ start; Elkan's triangle-inequality
// acceleration is used when the bound arrays fit the memory budget. Both
// paths produce bit-identical assignments and centroids: every distance that
// decides an assignment is evaluated with the same full-scan arithmetic, and
// bound comparisons carry a conservative margin so rounding can only cause
// an extra distance evaluation, never a wrong skip.
inline KmeansResult train_kmeans(const FeatureMatrix& x, std::size_t k,
                                 const KmeansOptions& opt = {}) {
  detail::KmeansTrainer trainer(x, k, opt);
  KmeansResult res = trainer.run();
  for (std::size_t i = 1; i < res.stats.distortion.size(); ++i) {
    const double prev = res.stats.distortion[i - 1];
    if (res.stats.distortion[i] > prev + 1e-9 * (1.0 + prev))
      throw NumericError("k-means: distortion increased at iteration " +
                         std::to_string(i));
  }
  return res;
}

// Exact batch nearest-centroid search used at encoding time. Candidates are
// scanned through the anchor centroid's neighbour list (ascending
// inter-centroid distance) and the scan stops once the triangle inequality
// rules the rest out; every evaluated distance uses the same accumulation
// order as the brute-force scan, so results match `assign` exactly.
class NearestAssigner {
 public:
  explicit NearestAssigner(const Codebook& cb, unsigned threads = 1) : cb_(cb) {
    const std::size_t k = cb.K;
    neighbours_.resize(k * k);
    parallel_chunks(k, 8, threads, [&](std::size_t, std::size_t b, std::size_t e) {
      for (std::size_t a = b; a < e; ++a) {
        auto* row = neighbours_.data() + a * k;
        for (std::size_t j = 0; j < k; ++j) {
          const double d2 = squared_distance(cb.centroid(a), cb.centroid(j), cb.dim);
          row[j] = {float(std::sqrt(d2)), std::uint32_t(j)};
        }
        std::sort(row, row + k, [](const Entry& p, const Entry& q) {
          return p.dist < q.dist || (p.dist == q.dist && p.idx < q.idx);
        });
      }
    });
  }

  std::size_t assign_one(const float* x, std::size_t anchor) const {
    const std::size_t k = cb_.K, d = cb_.dim;
    const double d2a = squared_distance(x, cb_.centroid(anchor), d);
    double best = d2a;
    std::size_t best_k = anchor;
    double bound = (std::sqrt(d2a) + std::sqrt(best)) * (1.0 + 1e-6);
    const Entry* row = neighbours_.data() + anchor * k;
    for (std::size_t r = 0; r < k; ++r) {
      if (double(row[r].dist) > bound) break;
      const std::size_t j = row[r].idx;
      if (j == anchor) continue;
      const float* c = cb_.centroid(j);
      double s = 0.0;
      std::size_t i = 0;
      for (; i < d; ++i) {
        const double dd = double(x[i]) - double(c[i]);
        s += dd * dd;
        if (s > best) break;
      }
      if (i < d) continue;
      if (s < best || (s == best && j < best_k)) {
        if (s < best) bound = (std::sqrt(d2a) + std::sqrt(s)) * (1.0 + 1e-6);
        best = s;
        best_k = j;
      }
    }
    return best_k;
  }

  // out[i] = exact nearest centroid of row i; anchors chain across rows for
  // locality but never affect the result.
  void assign_rows(const FeatureMatrix& m, std::uint32_t* out,
                   unsigned threads = 1) const {
    if (m.dim != cb_.dim) throw DataError("assign_rows: dimension mismatch");
    parallel_chunks(m.rows, 2048, threads,
                    [&](std::size_t, std::size_t b, std::size_t e) {
                      std::size_t anchor = assign(cb_, m.row(b), m.dim);
                      out[b] = std::uint32_t(anchor);
                      for (std::size_t i = b + 1; i < e; ++i) {
                        anchor = assign_one(m.row(i), anchor);
                        out[i] = std::uint32_t(anchor);
                      }
                    });
  }

 private:
  struct Entry {
    float dist;
    std::uint32_t idx;
  };
  const Codebook& cb_;
  std::vector<Entry> neighbours_;
};

}  // namespace fpad
