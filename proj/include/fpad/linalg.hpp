#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "fpad/common.hpp"

namespace fpad {

// Dense symmetric matrix stored row-major.
struct SymmetricEigen {
  std::vector<double> eigenvalues;   // descending
  std::vector<double> eigenvectors;  // row i = eigenvector of eigenvalues[i]
  std::size_t dim = 0;
};

// Cyclic Jacobi eigendecomposition for small symmetric matrices (D <= a few
// hundred; we only ever see D = 128). Deterministic: fixed sweep order and a
// fixed sign convention (largest-magnitude component of each vector positive).
inline SymmetricEigen jacobi_eigen_symmetric(std::vector<double> a,
                                             std::size_t n,
                                             int max_sweeps = 64) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  auto off_diag_norm = [&] {
    double s = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) s += a[p * n + q] * a[p * n + q];
    return std::sqrt(s);
  };

  double scale = 0.0;
  for (std::size_t i = 0; i < n * n; ++i) scale = std::max(scale, std::abs(a[i]));
  const double tol = (scale > 0 ? scale : 1.0) * 1e-14 * double(n);

  for (int sweep = 0; sweep < max_sweeps && off_diag_norm() > tol; ++sweep) {
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (std::abs(apq) <= tol / double(n)) continue;
        const double app = a[p * n + p], aqq = a[q * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p], vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }

  SymmetricEigen out;
  out.dim = n;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return a[i * n + i] > a[j * n + j];
  });
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n * n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t col = order[r];
    out.eigenvalues[r] = a[col * n + col];
    // copy column `col` of v as row r, with deterministic sign
    std::size_t arg = 0;
    double best = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double x = std::abs(v[k * n + col]);
      if (x > best) {
        best = x;
        arg = k;
      }
    }
    const double sign = v[arg * n + col] < 0 ? -1.0 : 1.0;
    for (std::size_t k = 0; k < n; ++k)
      out.eigenvectors[r * n + k] = sign * v[k * n + col];
  }
  return out;
}

inline double dot(const float* a, const float* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += double(a[i]) * double(b[i]);
  return s;
}

inline double squared_distance(const float* a, const float* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = double(a[i]) - double(b[i]);
    s += d * d;
  }
  return s;
}

inline double l2_norm(const float* a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += double(a[i]) * double(a[i]);
  return std::sqrt(s);
}

}  // namespace fpad
