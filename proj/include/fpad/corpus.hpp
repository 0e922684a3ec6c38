#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "fpad/image.hpp"
#include "fpad/manifest.hpp"
#include "fpad/rng.hpp"

namespace fpad {

// Synthetic fingerprint-like corpus so every protocol can be exercised
// without licensed data. Bona fide samples are oriented sinusoidal ridge
// patterns; attacks reuse the same patterns degraded by a per-"material"
// low-pass blur plus intensity noise. Two pseudo-sensors vary the raster
// size and contrast, and each sample is tagged with one of two pseudo
// datasets.
struct CorpusOptions {
  std::string out_dir = "corpus";
  std::size_t n_bona_fide = 100;
  std::size_t n_attack = 100;
  std::size_t base_size = 300;  // pixels per side before sensor variation
  std::uint64_t seed = 1;
};

struct CorpusMaterial {
  std::string name;
  double blur_sigma;
  double noise_amplitude;
};

inline const std::vector<CorpusMaterial>& corpus_materials() {
  static const std::vector<CorpusMaterial> m = {
      {"gelatine", 2.0, 0.06},  {"latex", 1.2, 0.12},   {"silgum", 3.0, 0.04},
      {"woodglue", 1.5, 0.09},  {"ecoflex", 2.5, 0.07},
  };
  return m;
}

namespace detail {

struct CorpusSensor {
  std::string name;
  int extra_w;
  int extra_h;
  double contrast;
};

inline const std::vector<CorpusSensor>& corpus_sensors() {
  static const std::vector<CorpusSensor> s = {
      {"synthsensor-a", 0, 0, 1.0},
      {"synthsensor-b", 24, -16, 0.85},
  };
  return s;
}

inline GrayImage ridge_pattern(std::size_t w, std::size_t h, double contrast, Rng& rng) {
  const double theta = rng.next_double() * std::numbers::pi;
  const double wavelength = 6.0 + rng.next_double() * 6.0;  // ridge period, px
  const double phase = rng.next_double() * 2.0 * std::numbers::pi;
  const double amp = (0.30 + rng.next_double() * 0.15) * contrast;
  // gentle amplitude modulation so histograms vary across the image
  const double mod_wavelength = 40.0 + rng.next_double() * 40.0;
  const double mod_phase = rng.next_double() * 2.0 * std::numbers::pi;
  const double kx = std::cos(theta) * 2.0 * std::numbers::pi / wavelength;
  const double ky = std::sin(theta) * 2.0 * std::numbers::pi / wavelength;
  const double mx = 2.0 * std::numbers::pi / mod_wavelength;

  GrayImage img;
  img.width = w;
  img.height = h;
  img.data.resize(w * h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double carrier = std::sin(kx * double(x) + ky * double(y) + phase);
      const double envelope = 0.75 + 0.25 * std::sin(mx * (double(x) + double(y)) + mod_phase);
      const double v = 0.5 + amp * envelope * carrier;
      img.data[y * w + x] = float(std::clamp(v, 0.0, 1.0));
    }
  return img;
}

inline GrayImage degrade(const GrayImage& img, const CorpusMaterial& mat, Rng& rng) {
  GrayImage out = gaussian_blur(img, mat.blur_sigma);
  for (auto& v : out.data) {
    const double noise = (rng.next_double() * 2.0 - 1.0) * mat.noise_amplitude;
    v = float(std::clamp(double(v) + noise, 0.0, 1.0));
  }
  return out;
}

}  // namespace detail

// Generates images plus a manifest.csv with paths relative to out_dir.
// Deterministic for a fixed seed.
inline std::vector<SampleRecord> generate_corpus(const CorpusOptions& opt) {
  namespace fs = std::filesystem;
  fs::create_directories(opt.out_dir);
  const auto& sensors = detail::corpus_sensors();
  const auto& materials = corpus_materials();

  std::vector<SampleRecord> records;
  for (std::size_t i = 0; i < opt.n_bona_fide + opt.n_attack; ++i) {
    const bool attack = i >= opt.n_bona_fide;
    Rng rng(derive_seed(opt.seed, "corpus-image-" + std::to_string(i)));
    const auto& sensor = sensors[i % sensors.size()];
    const std::size_t w = std::size_t(int(opt.base_size) + sensor.extra_w);
    const std::size_t h = std::size_t(int(opt.base_size) + sensor.extra_h);

    GrayImage img = detail::ridge_pattern(w, h, sensor.contrast, rng);
    SampleRecord rec;
    if (attack) {
      const auto& mat = materials[(i - opt.n_bona_fide) % materials.size()];
      img = detail::degrade(img, mat, rng);
      rec.label = Label::Attack;
      rec.material = mat.name;
    } else {
      rec.label = Label::BonaFide;
      rec.material = "none";
    }
    rec.sensor = sensor.name;
    rec.dataset = (i / 2) % 2 == 0 ? "synthdb-1" : "synthdb-2";
    rec.path = std::string(attack ? "attack" : "bonafide") + "_" +
               std::to_string(i) + ".pgm";
    save_pgm(img, (fs::path(opt.out_dir) / rec.path).string());
    records.push_back(std::move(rec));
  }
  save_manifest(records, (fs::path(opt.out_dir) / "manifest.csv").string());
  return records;
}

}  // namespace fpad
