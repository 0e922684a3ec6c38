#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "fpad/common.hpp"
#include "fpad/dense_sift.hpp"
#include "fpad/gmm.hpp"
#include "fpad/kmeans.hpp"
#include "fpad/matrix.hpp"
#include "fpad/pca.hpp"

namespace fpad {

enum class EncodingKind : std::uint8_t { BoW = 1, FV = 2, VLAD = 3 };

inline const char* encoding_name(EncodingKind k) {
  switch (k) {
    case EncodingKind::BoW: return "bow";
    case EncodingKind::FV: return "fv";
    case EncodingKind::VLAD: return "vlad";
  }
  return "?";
}

inline EncodingKind parse_encoding(const std::string& s) {
  if (s == "bow") return EncodingKind::BoW;
  if (s == "fv") return EncodingKind::FV;
  if (s == "vlad") return EncodingKind::VLAD;
  throw DataError("unknown encoding '" + s + "' (bow|fv|vlad)");
}

// Spatial pyramid for BoW: per level, the image is divided into g x g cells.
struct PyramidSpec {
  std::vector<std::size_t> levels = {1, 2, 4};

  std::size_t total_cells() const {
    std::size_t n = 0;
    for (std::size_t g : levels) n += g * g;
    return n;
  }
  void validate() const {
    if (levels.empty()) throw DataError("pyramid: need at least one level");
    for (std::size_t g : levels)
      if (g == 0) throw DataError("pyramid: subdivisions must be >= 1");
  }
};

struct EncodedVector {
  EncodingKind kind = EncodingKind::BoW;
  std::vector<float> v;
  std::size_t K = 0;
  std::size_t d = 0;      // descriptor dim after PCA (FV/VLAD), 0 for BoW
  std::size_t cells = 0;  // pyramid cells (BoW), 0 otherwise
  bool empty_input = false;
};

enum class FvNorm { Improved, L2, None };

inline FvNorm parse_fv_norm(const std::string& s) {
  if (s == "improved") return FvNorm::Improved;
  if (s == "l2") return FvNorm::L2;
  if (s == "none") return FvNorm::None;
  throw DataError("unknown fv norm '" + s + "' (improved|l2|none)");
}

namespace detail {

// Cell of a coordinate under a g-way split of [0, extent]: half-open cells,
// a point on an interior boundary belongs to the larger-index cell, and the
// right/bottom edge belongs to the last cell.
inline std::size_t pyramid_cell_1d(double pos, std::size_t extent, std::size_t g) {
  std::size_t c = 0;
  while (c + 1 < g && pos * double(g) >= double((c + 1) * extent)) ++c;
  return c;
}

inline void l2_normalize_or_keep_zero(std::vector<float>& v) {
  double norm2 = 0.0;
  for (float x : v) norm2 += double(x) * double(x);
  if (norm2 <= 0.0) return;
  const double inv = 1.0 / std::sqrt(norm2);
  for (float& x : v) x = float(double(x) * inv);
}

}  // namespace detail

// ---- BoW with spatial pyramid -------------------------------------------
// Hard assignment of each raw descriptor to its nearest visual word; one
// K-bin count histogram per pyramid cell, concatenated level-major and
// row-major within a level, then L2-normalized as a whole.

class BowEncoder {
 public:
  BowEncoder(const Codebook& cb, PyramidSpec spec, unsigned threads = 1)
      : cb_(cb), spec_(std::move(spec)), assigner_(cb, threads) {
    spec_.validate();
  }

  EncodedVector encode(const DescriptorSet& ds, unsigned threads = 1) const {
    const std::size_t cells = spec_.total_cells();
    EncodedVector out;
    out.kind = EncodingKind::BoW;
    out.K = cb_.K;
    out.cells = cells;
    out.v.assign(cb_.K * cells, 0.0f);
    if (ds.empty()) {
      out.empty_input = true;
      return out;
    }
    if (kSiftDim != cb_.dim)
      throw DataError("bow: codebook dim " + std::to_string(cb_.dim) +
                      " != descriptor dim " + std::to_string(kSiftDim));

    const FeatureMatrix m = to_matrix(ds);
    std::vector<std::uint32_t> words(m.rows);
    assigner_.assign_rows(m, words.data(), threads);

    std::vector<double> counts(cb_.K * cells, 0.0);
    std::size_t level_offset = 0;
    for (std::size_t g : spec_.levels) {
      for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto& dsc = ds.descriptors[i];
        const std::size_t cx = detail::pyramid_cell_1d(dsc.x, ds.width, g);
        const std::size_t cy = detail::pyramid_cell_1d(dsc.y, ds.height, g);
        const std::size_t cell = level_offset + cy * g + cx;
        counts[cell * cb_.K + words[i]] += 1.0;
      }
      level_offset += g * g;
    }
    for (std::size_t j = 0; j < counts.size(); ++j) out.v[j] = float(counts[j]);
    detail::l2_normalize_or_keep_zero(out.v);
    return out;
  }

 private:
  const Codebook& cb_;
  PyramidSpec spec_;
  NearestAssigner assigner_;
};

inline EncodedVector encode_bow(const DescriptorSet& ds, const Codebook& cb,
                                const PyramidSpec& spec = {}) {
  return BowEncoder(cb, spec).encode(ds);
}

// ---- Fisher Vector --------------------------------------------------------
// First- and second-order soft-assignment statistics of the PCA-projected
// descriptors against each GMM component:
//   phi1_k = 1/(N*sqrt(w_k))   * sum_i a_i(k) * (x_i - mu_k) / sigma_k
//   phi2_k = 1/(N*sqrt(2*w_k)) * sum_i a_i(k) * ((x_i - mu_k)^2/sigma_k^2 - 1)
// stacked [phi1_1, phi2_1, ..., phi1_K, phi2_K], power- then L2-normalized
// by default.

class FvEncoder {
 public:
  FvEncoder(const PcaProjection& pca, const GmmModel& gmm,
            FvNorm norm = FvNorm::Improved)
      : pca_(pca), gmm_(gmm), norm_(norm) {
    if (pca.output_dim != gmm.dim)
      throw DataError("fv: gmm dim " + std::to_string(gmm.dim) +
                      " != pca output dim " + std::to_string(pca.output_dim));
  }

  EncodedVector encode(const DescriptorSet& ds, unsigned threads = 1) const {
    const std::size_t K = gmm_.K, d = gmm_.dim;
    EncodedVector out;
    out.kind = EncodingKind::FV;
    out.K = K;
    out.d = d;
    out.v.assign(2 * K * d, 0.0f);
    if (ds.empty()) {
      out.empty_input = true;
      return out;
    }
    const FeatureMatrix raw = to_matrix(ds);
    if (raw.dim != pca_.input_dim) throw DataError("fv: descriptor dim mismatch");
    const FeatureMatrix x = pca_.project_rows(raw, threads);

    // per-component constants
    std::vector<double> log_const(K), inv_sigma(K * d), inv_var(K * d);
    constexpr double log_two_pi = 1.8378770664093454836;
    for (std::size_t k = 0; k < K; ++k) {
      double logdet = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double v = double(gmm_.variances[k * d + j]);
        inv_var[k * d + j] = 1.0 / v;
        inv_sigma[k * d + j] = 1.0 / std::sqrt(v);
        logdet += std::log(v);
      }
      log_const[k] = std::log(double(gmm_.weights[k])) -
                     0.5 * (double(d) * log_two_pi + logdet);
    }

    const std::size_t n = x.rows;
    constexpr std::size_t chunk = 1024;
    const std::size_t n_chunks = (n + chunk - 1) / chunk;
    std::vector<std::vector<double>> acc1(n_chunks), acc2(n_chunks);
    parallel_chunks(n, chunk, threads, [&](std::size_t c, std::size_t b, std::size_t e) {
      auto& d1 = acc1[c];
      auto& d2 = acc2[c];
      d1.assign(K * d, 0.0);
      d2.assign(K * d, 0.0);
      std::vector<double> logp(K), t(K * d);
      for (std::size_t i = b; i < e; ++i) {
        const float* row = x.row(i);
        double max_lp = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < K; ++k) {
          double quad = 0.0;
          const double* is = inv_sigma.data() + k * d;
          const float* mu = gmm_.means.data() + k * d;
          double* tk = t.data() + k * d;
          for (std::size_t j = 0; j < d; ++j) {
            const double z = (double(row[j]) - double(mu[j])) * is[j];
            tk[j] = z;
            quad += z * z;
          }
          logp[k] = log_const[k] - 0.5 * quad;
          max_lp = std::max(max_lp, logp[k]);
        }
        double sum = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          logp[k] = std::exp(logp[k] - max_lp);
          sum += logp[k];
        }
        const double inv_sum = 1.0 / sum;
        for (std::size_t k = 0; k < K; ++k) {
          const double a = logp[k] * inv_sum;
          if (a == 0.0) continue;
          const double* tk = t.data() + k * d;
          double* d1k = d1.data() + k * d;
          double* d2k = d2.data() + k * d;
          for (std::size_t j = 0; j < d; ++j) {
            d1k[j] += a * tk[j];
            d2k[j] += a * (tk[j] * tk[j] - 1.0);
          }
        }
      }
    });

    std::vector<double> s1(K * d, 0.0), s2(K * d, 0.0);
    for (std::size_t c = 0; c < n_chunks; ++c)
      for (std::size_t j = 0; j < K * d; ++j) {
        s1[j] += acc1[c][j];
        s2[j] += acc2[c][j];
      }

    const double inv_n = 1.0 / double(n);
    std::vector<double> phi(2 * K * d);
    for (std::size_t k = 0; k < K; ++k) {
      const double w = double(gmm_.weights[k]);
      const double c1 = inv_n / std::sqrt(w);
      const double c2 = inv_n / std::sqrt(2.0 * w);
      for (std::size_t j = 0; j < d; ++j) {
        phi[2 * k * d + j] = c1 * s1[k * d + j];
        phi[(2 * k + 1) * d + j] = c2 * s2[k * d + j];
      }
    }

    if (norm_ == FvNorm::Improved)
      for (auto& z : phi) z = z >= 0 ? std::sqrt(z) : -std::sqrt(-z);
    for (std::size_t j = 0; j < phi.size(); ++j) out.v[j] = float(phi[j]);
    if (norm_ != FvNorm::None) detail::l2_normalize_or_keep_zero(out.v);
    return out;
  }

 private:
  const PcaProjection& pca_;
  const GmmModel& gmm_;
  FvNorm norm_;
};

inline EncodedVector encode_fv(const DescriptorSet& ds, const PcaProjection& pca,
                               const GmmModel& gmm, FvNorm norm = FvNorm::Improved) {
  return FvEncoder(pca, gmm, norm).encode(ds);
}

// ---- VLAD -----------------------------------------------------------------
// Sum of residuals x - c over the descriptors assigned to each visual word,
// in a PCA-projected space, concatenated in centroid order and
// L2-normalized (an all-zero vector is left as zero).

class VladEncoder {
 public:
  VladEncoder(const PcaProjection& pca, const Codebook& cb, unsigned threads = 1)
      : pca_(pca), cb_(cb), assigner_(cb, threads) {
    if (pca.output_dim != cb.dim)
      throw DataError("vlad: codebook dim " + std::to_string(cb.dim) +
                      " != pca output dim " + std::to_string(pca.output_dim));
  }

  EncodedVector encode(const DescriptorSet& ds, unsigned threads = 1) const {
    const std::size_t K = cb_.K, d = cb_.dim;
    EncodedVector out;
    out.kind = EncodingKind::VLAD;
    out.K = K;
    out.d = d;
    out.v.assign(K * d, 0.0f);
    if (ds.empty()) {
      out.empty_input = true;
      return out;
    }
    const FeatureMatrix raw = to_matrix(ds);
    if (raw.dim != pca_.input_dim) throw DataError("vlad: descriptor dim mismatch");
    const FeatureMatrix x = pca_.project_rows(raw, threads);

    std::vector<std::uint32_t> nn(x.rows);
    assigner_.assign_rows(x, nn.data(), threads);

    std::vector<double> res(K * d, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i) {
      const float* row = x.row(i);
      const float* c = cb_.centroid(nn[i]);
      double* dst = res.data() + nn[i] * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += double(row[j]) - double(c[j]);
    }
    for (std::size_t j = 0; j < K * d; ++j) out.v[j] = float(res[j]);
    detail::l2_normalize_or_keep_zero(out.v);
    return out;
  }

 private:
  const PcaProjection& pca_;
  const Codebook& cb_;
  NearestAssigner assigner_;
};

inline EncodedVector encode_vlad(const DescriptorSet& ds, const PcaProjection& pca,
                                 const Codebook& cb) {
  return VladEncoder(pca, cb).encode(ds);
}

// ---- encoded-vector batch file ("PADV") -----------------------------------
// little-endian; header {magic "PADV", version u32, kind u8, count u32,
// dim u32}, then count rows of dim f32. Row order follows the manifest.

inline void save_vectors(const std::vector<EncodedVector>& vs, EncodingKind kind,
                         const std::string& path) {
  std::size_t dim = 0;
  for (const auto& v : vs) {
    if (v.kind != kind) throw DataError("save_vectors: mixed encoding kinds");
    if (dim == 0) dim = v.v.size();
    if (v.v.size() != dim) throw DataError("save_vectors: inconsistent dims");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError(path + ": cannot open for writing");
  write_magic(os, "PADV");
  write_raw<std::uint32_t>(os, 1);
  write_raw<std::uint8_t>(os, std::uint8_t(kind));
  write_raw<std::uint32_t>(os, std::uint32_t(vs.size()));
  write_raw<std::uint32_t>(os, std::uint32_t(dim));
  for (const auto& v : vs) write_raw(os, v.v);
  if (!os) throw DataError(path + ": short write");
}

struct VectorBatch {
  EncodingKind kind = EncodingKind::BoW;
  FeatureMatrix m;
};

inline VectorBatch load_vectors(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(path + ": unreadable file");
  expect_magic(is, "PADV", path);
  const auto version = read_raw<std::uint32_t>(is, "PADV version");
  if (version != 1) throw DataError(path + ": unsupported PADV version");
  VectorBatch batch;
  batch.kind = EncodingKind(read_raw<std::uint8_t>(is, "PADV kind"));
  const auto count = read_raw<std::uint32_t>(is, "PADV count");
  const auto dim = read_raw<std::uint32_t>(is, "PADV dim");
  batch.m.rows = count;
  batch.m.dim = dim;
  read_raw(is, batch.m.data, std::size_t(count) * dim, "PADV rows");
  return batch;
}

}  // namespace fpad
