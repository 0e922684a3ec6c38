#pragma once

#include <cstddef>
#include <vector>

#include "fpad/common.hpp"
#include "fpad/dense_sift.hpp"
#include "fpad/rng.hpp"

namespace fpad {

// Row-major f32 feature matrix: one feature vector per row.
struct FeatureMatrix {
  std::vector<float> data;
  std::size_t rows = 0;
  std::size_t dim = 0;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t d) : data(r * d, 0.0f), rows(r), dim(d) {}

  const float* row(std::size_t i) const { return data.data() + i * dim; }
  float* row(std::size_t i) { return data.data() + i * dim; }

  void push_row(const float* v) {
    data.insert(data.end(), v, v + dim);
    ++rows;
  }
};

inline FeatureMatrix to_matrix(const DescriptorSet& ds) {
  FeatureMatrix m(ds.size(), kSiftDim);
  for (std::size_t i = 0; i < ds.size(); ++i)
    std::copy(ds.descriptors[i].v.begin(), ds.descriptors[i].v.end(), m.row(i));
  return m;
}

// Uniform reservoir sampler (algorithm R) for pooling descriptors across
// images without holding the whole corpus in memory. Feed order must be
// fixed (manifest order) for reproducibility.
class ReservoirSampler {
 public:
  ReservoirSampler(std::size_t capacity, std::size_t dim, std::uint64_t seed)
      : capacity_(capacity), rng_(seed) {
    pool_.dim = dim;
    pool_.data.reserve(std::min(capacity, std::size_t(1) << 20) * dim);
  }

  void add(const float* v) {
    ++seen_;
    if (pool_.rows < capacity_) {
      pool_.push_row(v);
      return;
    }
    const std::size_t j = rng_.next_index(seen_);
    if (j < capacity_)
      std::copy(v, v + pool_.dim, pool_.row(j));
  }

  void add_all(const FeatureMatrix& m) {
    for (std::size_t i = 0; i < m.rows; ++i) add(m.row(i));
  }

  std::size_t seen() const { return seen_; }
  FeatureMatrix take() { return std::move(pool_); }

 private:
  std::size_t capacity_;
  std::size_t seen_ = 0;
  Rng rng_;
  FeatureMatrix pool_;
};

}  // namespace fpad
