#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "fpad/common.hpp"

namespace fpad {

// Single-channel raster with intensities in [0,1], row-major.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> data;

  float at(std::size_t x, std::size_t y) const { return data[y * width + x]; }
  float& at(std::size_t x, std::size_t y) { return data[y * width + x]; }

  bool valid() const {
    if (data.size() != width * height) return false;
    for (float v : data)
      if (!(v >= 0.0f && v <= 1.0f)) return false;
    return true;
  }
};

namespace detail {

inline int pgm_next_token_value(std::istream& is, const std::string& path) {
  // skips whitespace and '#' comment lines, then reads one decimal value
  int c = is.get();
  for (;;) {
    while (c != EOF && std::isspace(c)) c = is.get();
    if (c == '#') {
      while (c != EOF && c != '\n') c = is.get();
      continue;
    }
    break;
  }
  if (c == EOF || !std::isdigit(c))
    throw DataError(path + ": malformed PGM header");
  long v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    if (v > 1 << 30) throw DataError(path + ": absurd PGM header value");
    c = is.get();
  }
  if (c != EOF) is.unget();
  return static_cast<int>(v);
}

}  // namespace detail

// Reads an 8-bit binary PGM (P5). Intensities map linearly [0,255] -> [0,1].
inline GrayImage load_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(path + ": unreadable file");
  char m0 = 0, m1 = 0;
  is.get(m0);
  is.get(m1);
  if (m0 != 'P' || m1 != '5')
    throw DataError(path + ": unsupported format (need binary PGM, magic P5)");
  const int width = detail::pgm_next_token_value(is, path);
  const int height = detail::pgm_next_token_value(is, path);
  const int maxval = detail::pgm_next_token_value(is, path);
  if (width <= 0 || height <= 0)
    throw DataError(path + ": zero-sized image");
  if (maxval <= 0 || maxval > 255)
    throw DataError(path + ": unsupported format (only 8-bit PGM, maxval <= 255)");
  is.get();  // single whitespace after maxval
  const std::size_t n = std::size_t(width) * std::size_t(height);
  std::vector<std::uint8_t> raw(n);
  is.read(reinterpret_cast<char*>(raw.data()), std::streamsize(n));
  if (!is) throw DataError(path + ": truncated pixel data");

  GrayImage img;
  img.width = std::size_t(width);
  img.height = std::size_t(height);
  img.data.resize(n);
  const float scale = 1.0f / float(maxval);
  for (std::size_t i = 0; i < n; ++i) img.data[i] = float(raw[i]) * scale;
  return img;
}

// Writes an 8-bit binary PGM. Round-trips bit-exactly with load_pgm for
// images that originated from 8-bit data.
inline void save_pgm(const GrayImage& img, const std::string& path) {
  if (img.width == 0 || img.height == 0 || img.data.size() != img.width * img.height)
    throw DataError(path + ": refusing to write malformed image");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError(path + ": cannot open for writing");
  os << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<std::uint8_t> raw(img.data.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const float v = std::clamp(img.data[i], 0.0f, 1.0f);
    raw[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  os.write(reinterpret_cast<const char*>(raw.data()), std::streamsize(raw.size()));
  if (!os) throw DataError(path + ": short write");
}

// Format dispatch on magic bytes. Only PGM is implemented; PNG input is
// recognised and reported as unsupported rather than misread.
inline GrayImage load_grayscale(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw DataError(path + ": unreadable file");
  unsigned char sig[2] = {0, 0};
  probe.read(reinterpret_cast<char*>(sig), 2);
  probe.close();
  if (sig[0] == 'P' && sig[1] == '5') return load_pgm(path);
  if (sig[0] == 0x89 && sig[1] == 'P')
    throw DataError(path + ": unsupported format (PNG input not built in; convert to 8-bit PGM)");
  throw DataError(path + ": unsupported format (need binary PGM, magic P5)");
}

// Separable Gaussian blur with edge replication. Kernel radius = ceil(3*sigma).
inline GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(std::size_t(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * (double(i) * double(i)) / (sigma * sigma));
    kernel[std::size_t(i + radius)] = w;
    sum += w;
  }
  for (auto& w : kernel) w /= sum;

  const std::ptrdiff_t w = std::ptrdiff_t(img.width), h = std::ptrdiff_t(img.height);
  std::vector<float> tmp(img.data.size());
  GrayImage out;
  out.width = img.width;
  out.height = img.height;
  out.data.resize(img.data.size());

  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const std::ptrdiff_t xx = std::clamp<std::ptrdiff_t>(x + k, 0, w - 1);
        acc += kernel[std::size_t(k + radius)] * img.data[std::size_t(y * w + xx)];
      }
      tmp[std::size_t(y * w + x)] = float(acc);
    }
  }
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const std::ptrdiff_t yy = std::clamp<std::ptrdiff_t>(y + k, 0, h - 1);
        acc += kernel[std::size_t(k + radius)] * tmp[std::size_t(yy * w + x)];
      }
      out.data[std::size_t(y * w + x)] = float(std::clamp(acc, 0.0, 1.0));
    }
  }
  return out;
}

}  // namespace fpad
