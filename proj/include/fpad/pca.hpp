#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fpad/common.hpp"
#include "fpad/linalg.hpp"
#include "fpad/matrix.hpp"
#include "fpad/parallel.hpp"

namespace fpad {

// Orthonormal projection onto the top principal directions of the training
// data. `scale` is all-ones unless whitening was requested at training time.
struct PcaProjection {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::vector<float> mean;   // input_dim
  std::vector<float> basis;  // output_dim x input_dim, rows orthonormal
  std::vector<float> scale;  // output_dim

  void project(const float* x, float* out) const {
    for (std::size_t r = 0; r < output_dim; ++r) {
      const float* b = basis.data() + r * input_dim;
      double s = 0.0;
      for (std::size_t j = 0; j < input_dim; ++j)
        s += double(b[j]) * (double(x[j]) - double(mean[j]));
      out[r] = float(s * double(scale[r]));
    }
  }

  FeatureMatrix project_rows(const FeatureMatrix& m, unsigned threads = 1) const {
    if (m.dim != input_dim) throw DataError("pca: dimension mismatch");
    FeatureMatrix out(m.rows, output_dim);
    parallel_chunks(m.rows, 4096, threads,
                    [&](std::size_t, std::size_t b, std::size_t e) {
                      for (std::size_t i = b; i < e; ++i)
                        project(m.row(i), out.row(i));
                    });
    return out;
  }
};

struct PcaOptions {
  bool whiten = false;  // decorrelation only by default
  unsigned threads = 1;
};

// Covariance eigendecomposition (the input dim is small and fixed, 128 for
// raw descriptors). Throws when the centered data has rank below the
// requested output dimension.
inline PcaProjection train_pca(const FeatureMatrix& x, std::size_t out_dim,
                               const PcaOptions& opt = {}) {
  const std::size_t n = x.rows, dim = x.dim;
  if (out_dim == 0 || out_dim > dim)
    throw DataError("pca: output dim must be in [1, input dim]");
  if (n < out_dim)
    throw DataError("pca: need at least " + std::to_string(out_dim) + " samples");

  std::vector<double> mean(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const float* row = x.row(i);
    for (std::size_t j = 0; j < dim; ++j) mean[j] += double(row[j]);
  }
  for (auto& m : mean) m /= double(n);

  // upper-triangular covariance, accumulated per fixed chunk then reduced
  const std::size_t n_chunks = (n + 4095) / 4096;
  std::vector<std::vector<double>> partial(n_chunks);
  parallel_chunks(n, 4096, opt.threads, [&](std::size_t c, std::size_t b, std::size_t e) {
    auto& acc = partial[c];
    acc.assign(dim * dim, 0.0);
    std::vector<double> centered(dim);
    for (std::size_t i = b; i < e; ++i) {
      const float* row = x.row(i);
      for (std::size_t j = 0; j < dim; ++j) centered[j] = double(row[j]) - mean[j];
      for (std::size_t r = 0; r < dim; ++r) {
        const double cr = centered[r];
        double* dst = acc.data() + r * dim;
        for (std::size_t s = r; s < dim; ++s) dst[s] += cr * centered[s];
      }
    }
  });
  std::vector<double> cov(dim * dim, 0.0);
  for (const auto& acc : partial)
    for (std::size_t j = 0; j < dim * dim; ++j) cov[j] += acc[j];
  for (std::size_t r = 0; r < dim; ++r)
    for (std::size_t s = r; s < dim; ++s) {
      cov[r * dim + s] /= double(n);
      cov[s * dim + r] = cov[r * dim + s];
    }

  const SymmetricEigen eig = jacobi_eigen_symmetric(cov, dim);

  const double lead = std::max(eig.eigenvalues[0], 0.0);
  const double rank_tol = lead * 1e-9 + 1e-300;
  std::size_t rank = 0;
  while (rank < dim && eig.eigenvalues[rank] > rank_tol) ++rank;
  if (rank < out_dim)
    throw DataError("pca: centered data has rank " + std::to_string(rank) +
                    ", need " + std::to_string(out_dim));

  PcaProjection p;
  p.input_dim = dim;
  p.output_dim = out_dim;
  p.mean.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) p.mean[j] = float(mean[j]);
  p.basis.resize(out_dim * dim);
  p.scale.assign(out_dim, 1.0f);
  for (std::size_t r = 0; r < out_dim; ++r) {
    for (std::size_t j = 0; j < dim; ++j)
      p.basis[r * dim + j] = float(eig.eigenvectors[r * dim + j]);
    if (opt.whiten)
      p.scale[r] = float(1.0 / std::sqrt(std::max(eig.eigenvalues[r], rank_tol)));
  }
  return p;
}

}  // namespace fpad
