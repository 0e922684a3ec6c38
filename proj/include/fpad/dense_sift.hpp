#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "fpad/common.hpp"
#include "fpad/image.hpp"

namespace fpad {

inline constexpr std::size_t kSiftSpatialBins = 4;   // 4x4 cells
inline constexpr std::size_t kSiftOrientBins = 8;    // 45 degrees per bin
inline constexpr std::size_t kSiftDim = kSiftSpatialBins * kSiftSpatialBins * kSiftOrientBins;  // 128

struct DenseSiftParams {
  int spacing = 5;                        // grid stride S in pixels
  std::vector<int> scales = {5, 7, 10, 12};  // spatial bin size sigma per scale
  double contrast_threshold = 0.005;      // on the mean gradient norm, [0,1] images
  double clip_value = 0.2;

  void validate() const {
    if (spacing < 1) throw DataError("dense-sift: spacing must be >= 1");
    if (scales.empty()) throw DataError("dense-sift: need at least one scale");
    for (int s : scales)
      if (s < 1) throw DataError("dense-sift: scales must be >= 1");
    if (contrast_threshold < 0)
      throw DataError("dense-sift: contrast threshold must be >= 0");
  }
};

// One upright descriptor: a 4x4 grid of 8-bin gradient-orientation
// histograms over a square support of side 4*scale centered at (x, y).
struct Descriptor {
  float x = 0, y = 0;     // window center in pixels
  float scale = 0;        // spatial bin size sigma
  std::array<float, kSiftDim> v{};
};

struct DescriptorSet {
  std::vector<Descriptor> descriptors;
  std::size_t width = 0;   // source image dims (pyramid cells need them)
  std::size_t height = 0;

  std::size_t size() const { return descriptors.size(); }
  bool empty() const { return descriptors.empty(); }
};

namespace detail {

// Histogram layout: index = (cell_y * 4 + cell_x) * 8 + orientation_bin.
// Bilinear sharing across the 4x4 cells, linear sharing between the two
// nearest orientation bins. The final vector is L2-normalized, clipped and
// renormalized; the clip/renorm pass repeats until no component exceeds the
// clip value, so the per-component cap holds even for peaky histograms.
inline void normalize_descriptor(std::array<float, kSiftDim>& v, double clip) {
  double norm2 = 0.0;
  for (float x : v) norm2 += double(x) * double(x);
  if (norm2 <= 0.0) return;  // zero histogram stays zero
  double inv = 1.0 / std::sqrt(norm2);
  for (int round = 0; round < 64; ++round) {
    double max_c = 0.0;
    for (float& x : v) {
      x = float(double(x) * inv);
      max_c = std::max(max_c, double(x));
    }
    if (max_c <= clip * (1.0 + 1e-9)) return;
    norm2 = 0.0;
    for (float& x : v) {
      if (x > clip) x = float(clip);
      norm2 += double(x) * double(x);
    }
    inv = 1.0 / std::sqrt(norm2);
  }
}

struct GradientField {
  std::vector<float> mag;
  std::vector<float> angle;  // [0, 2*pi)
};

// Central differences in the interior, one-sided at the borders.
inline GradientField gradients(const GrayImage& img) {
  const std::ptrdiff_t w = std::ptrdiff_t(img.width), h = std::ptrdiff_t(img.height);
  GradientField g;
  g.mag.resize(img.data.size());
  g.angle.resize(img.data.size());
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      const auto v = [&](std::ptrdiff_t xx, std::ptrdiff_t yy) {
        return double(img.data[std::size_t(yy * w + xx)]);
      };
      double gx, gy;
      if (w == 1) gx = 0.0;
      else if (x == 0) gx = v(1, y) - v(0, y);
      else if (x == w - 1) gx = v(w - 1, y) - v(w - 2, y);
      else gx = 0.5 * (v(x + 1, y) - v(x - 1, y));
      if (h == 1) gy = 0.0;
      else if (y == 0) gy = v(x, 1) - v(x, 0);
      else if (y == h - 1) gy = v(x, h - 1) - v(x, h - 2);
      else gy = 0.5 * (v(x, y + 1) - v(x, y - 1));
      g.mag[std::size_t(y * w + x)] = float(std::sqrt(gx * gx + gy * gy));
      double a = std::atan2(gy, gx);
      if (a < 0) a += two_pi;
      if (a >= two_pi) a = 0.0;
      g.angle[std::size_t(y * w + x)] = float(a);
    }
  }
  return g;
}

}  // namespace detail

// Multi-scale dense-SIFT on a regular grid. Per scale sigma the support is a
// square of side 4*sigma; grid origins step by `spacing` wherever the support
// fits, so the per-scale grid is floor((W-4s)/S)+1 x floor((H-4s)/S)+1.
// The image is pre-smoothed per scale (Gaussian, stddev sigma/3) before
// gradients are taken. Windows whose mean gradient norm falls below the
// contrast threshold are dropped. Returns an empty set when the image cannot
// hold the largest support.
inline DescriptorSet extract(const GrayImage& img, const DenseSiftParams& p) {
  p.validate();
  DescriptorSet out;
  out.width = img.width;
  out.height = img.height;
  if (img.data.size() != img.width * img.height)
    throw DataError("dense-sift: malformed image buffer");

  const int max_scale = *std::max_element(p.scales.begin(), p.scales.end());
  if (img.width < std::size_t(4 * max_scale) || img.height < std::size_t(4 * max_scale))
    return out;

  constexpr double bin_angle = 2.0 * std::numbers::pi / double(kSiftOrientBins);

  for (const int sigma : p.scales) {
    const std::size_t support = std::size_t(4 * sigma);
    const GrayImage smoothed = gaussian_blur(img, double(sigma) / 3.0);
    const detail::GradientField grad = detail::gradients(smoothed);

    const std::size_t nx = (img.width - support) / std::size_t(p.spacing) + 1;
    const std::size_t ny = (img.height - support) / std::size_t(p.spacing) + 1;
    const double inv_area = 1.0 / double(support * support);

    for (std::size_t gy = 0; gy < ny; ++gy) {
      for (std::size_t gx = 0; gx < nx; ++gx) {
        const std::size_t x0 = gx * std::size_t(p.spacing);
        const std::size_t y0 = gy * std::size_t(p.spacing);

        std::array<double, kSiftDim> hist{};
        double mag_sum = 0.0;
        for (std::size_t py = y0; py < y0 + support; ++py) {
          for (std::size_t px = x0; px < x0 + support; ++px) {
            const std::size_t idx = py * img.width + px;
            const double m = grad.mag[idx];
            mag_sum += m;
            if (m == 0.0) continue;

            const double o = double(grad.angle[idx]) / bin_angle;
            std::size_t o0 = std::size_t(o);
            if (o0 >= kSiftOrientBins) o0 = kSiftOrientBins - 1;
            const double wo1 = o - double(o0);
            const std::size_t o1 = (o0 + 1) % kSiftOrientBins;

            const double u = (double(px - x0) + 0.5) / double(sigma) - 0.5;
            const double v = (double(py - y0) + 0.5) / double(sigma) - 0.5;
            const std::ptrdiff_t u0 = std::ptrdiff_t(std::floor(u));
            const std::ptrdiff_t v0 = std::ptrdiff_t(std::floor(v));
            const double wu1 = u - double(u0);
            const double wv1 = v - double(v0);

            for (int dv = 0; dv <= 1; ++dv) {
              const std::ptrdiff_t cv = v0 + dv;
              if (cv < 0 || cv >= std::ptrdiff_t(kSiftSpatialBins)) continue;
              const double wv = dv ? wv1 : 1.0 - wv1;
              for (int du = 0; du <= 1; ++du) {
                const std::ptrdiff_t cu = u0 + du;
                if (cu < 0 || cu >= std::ptrdiff_t(kSiftSpatialBins)) continue;
                const double wu = du ? wu1 : 1.0 - wu1;
                const std::size_t cell =
                    (std::size_t(cv) * kSiftSpatialBins + std::size_t(cu)) * kSiftOrientBins;
                hist[cell + o0] += m * wu * wv * (1.0 - wo1);
                hist[cell + o1] += m * wu * wv * wo1;
              }
            }
          }
        }

        if (mag_sum * inv_area < p.contrast_threshold) continue;

        Descriptor d;
        d.x = float(x0 + 2 * std::size_t(sigma));
        d.y = float(y0 + 2 * std::size_t(sigma));
        d.scale = float(sigma);
        for (std::size_t i = 0; i < kSiftDim; ++i) d.v[i] = float(hist[i]);
        detail::normalize_descriptor(d.v, p.clip_value);
        out.descriptors.push_back(d);
      }
    }
  }
  return out;
}

// ---- descriptor dump ("PADS") -------------------------------------------
// little-endian; header {magic "PADS", version u32, count u32, dim u32},
// then per descriptor {x f32, y f32, scale f32, v f32 * dim}.

inline void save_descriptors(const DescriptorSet& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError(path + ": cannot open for writing");
  write_magic(os, "PADS");
  write_raw<std::uint32_t>(os, 1);
  write_raw<std::uint32_t>(os, std::uint32_t(ds.descriptors.size()));
  write_raw<std::uint32_t>(os, std::uint32_t(kSiftDim));
  for (const auto& d : ds.descriptors) {
    write_raw<float>(os, d.x);
    write_raw<float>(os, d.y);
    write_raw<float>(os, d.scale);
    os.write(reinterpret_cast<const char*>(d.v.data()),
             std::streamsize(d.v.size() * sizeof(float)));
  }
  if (!os) throw DataError(path + ": short write");
}

inline DescriptorSet load_descriptors(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(path + ": unreadable file");
  expect_magic(is, "PADS", path);
  const auto version = read_raw<std::uint32_t>(is, "PADS version");
  if (version != 1) throw DataError(path + ": unsupported PADS version");
  const auto count = read_raw<std::uint32_t>(is, "PADS count");
  const auto dim = read_raw<std::uint32_t>(is, "PADS dim");
  if (dim != kSiftDim) throw DataError(path + ": unexpected descriptor dim");
  DescriptorSet ds;
  ds.descriptors.resize(count);
  for (auto& d : ds.descriptors) {
    d.x = read_raw<float>(is, "descriptor x");
    d.y = read_raw<float>(is, "descriptor y");
    d.scale = read_raw<float>(is, "descriptor scale");
    is.read(reinterpret_cast<char*>(d.v.data()),
            std::streamsize(d.v.size() * sizeof(float)));
    if (!is) throw DataError(path + ": truncated descriptor data");
  }
  return ds;
}

}  // namespace fpad
