#pragma once

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpad/common.hpp"
#include "fpad/gmm.hpp"
#include "fpad/kmeans.hpp"
#include "fpad/pca.hpp"
#include "fpad/svm.hpp"

namespace fpad {

// Model container ("PADM"), little-endian:
//   magic "PADM", version u32, kind u8, config_hash u64, seed u64,
//   then a kind-specific payload of dims and f32 arrays (the SVM bias is f64).
enum class ModelKind : std::uint8_t { Kmeans = 1, Pca = 2, Gmm = 3, Svm = 4 };

inline const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::Kmeans: return "kmeans";
    case ModelKind::Pca: return "pca";
    case ModelKind::Gmm: return "gmm";
    case ModelKind::Svm: return "svm";
  }
  return "?";
}

struct ModelFile {
  ModelKind kind = ModelKind::Kmeans;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  Codebook codebook;    // Kmeans
  PcaProjection pca;    // Pca
  GmmModel gmm;         // Gmm
  LinearSvm svm;        // Svm
};

inline void save_model(const ModelFile& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError(path + ": cannot open for writing");
  write_magic(os, "PADM");
  write_raw<std::uint32_t>(os, 1);
  write_raw<std::uint8_t>(os, std::uint8_t(m.kind));
  write_raw<std::uint64_t>(os, m.config_hash);
  write_raw<std::uint64_t>(os, m.seed);
  switch (m.kind) {
    case ModelKind::Kmeans:
      write_raw<std::uint32_t>(os, std::uint32_t(m.codebook.K));
      write_raw<std::uint32_t>(os, std::uint32_t(m.codebook.dim));
      write_raw(os, m.codebook.centroids);
      break;
    case ModelKind::Pca:
      write_raw<std::uint32_t>(os, std::uint32_t(m.pca.input_dim));
      write_raw<std::uint32_t>(os, std::uint32_t(m.pca.output_dim));
      write_raw(os, m.pca.mean);
      write_raw(os, m.pca.basis);
      write_raw(os, m.pca.scale);
      break;
    case ModelKind::Gmm:
      write_raw<std::uint32_t>(os, std::uint32_t(m.gmm.K));
      write_raw<std::uint32_t>(os, std::uint32_t(m.gmm.dim));
      write_raw(os, m.gmm.weights);
      write_raw(os, m.gmm.means);
      write_raw(os, m.gmm.variances);
      break;
    case ModelKind::Svm:
      write_raw<std::uint32_t>(os, std::uint32_t(m.svm.w.size()));
      write_raw<std::uint8_t>(os, m.svm.positive == Label::BonaFide ? 0 : 1);
      write_raw(os, m.svm.w);
      write_raw<double>(os, m.svm.b);
      write_raw<double>(os, m.svm.lambda);
      write_raw<std::uint32_t>(os, std::uint32_t(m.svm.epochs));
      break;
  }
  if (!os) throw DataError(path + ": short write");
}

inline ModelFile load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(path + ": unreadable file");
  expect_magic(is, "PADM", path);
  const auto version = read_raw<std::uint32_t>(is, "PADM version");
  if (version != 1) throw DataError(path + ": unsupported PADM version");
  ModelFile m;
  m.kind = ModelKind(read_raw<std::uint8_t>(is, "PADM kind"));
  m.config_hash = read_raw<std::uint64_t>(is, "PADM config hash");
  m.seed = read_raw<std::uint64_t>(is, "PADM seed");
  switch (m.kind) {
    case ModelKind::Kmeans: {
      m.codebook.K = read_raw<std::uint32_t>(is, "K");
      m.codebook.dim = read_raw<std::uint32_t>(is, "dim");
      read_raw(is, m.codebook.centroids, m.codebook.K * m.codebook.dim, "centroids");
      break;
    }
    case ModelKind::Pca: {
      m.pca.input_dim = read_raw<std::uint32_t>(is, "input dim");
      m.pca.output_dim = read_raw<std::uint32_t>(is, "output dim");
      read_raw(is, m.pca.mean, m.pca.input_dim, "mean");
      read_raw(is, m.pca.basis, m.pca.output_dim * m.pca.input_dim, "basis");
      read_raw(is, m.pca.scale, m.pca.output_dim, "scale");
      break;
    }
    case ModelKind::Gmm: {
      m.gmm.K = read_raw<std::uint32_t>(is, "K");
      m.gmm.dim = read_raw<std::uint32_t>(is, "dim");
      read_raw(is, m.gmm.weights, m.gmm.K, "weights");
      read_raw(is, m.gmm.means, m.gmm.K * m.gmm.dim, "means");
      read_raw(is, m.gmm.variances, m.gmm.K * m.gmm.dim, "variances");
      break;
    }
    case ModelKind::Svm: {
      const auto dim = read_raw<std::uint32_t>(is, "dim");
      m.svm.positive =
          read_raw<std::uint8_t>(is, "positive tag") == 0 ? Label::BonaFide : Label::Attack;
      read_raw(is, m.svm.w, dim, "weights");
      m.svm.b = read_raw<double>(is, "bias");
      m.svm.lambda = read_raw<double>(is, "lambda");
      m.svm.epochs = int(read_raw<std::uint32_t>(is, "epochs"));
      m.svm.seed = m.seed;
      break;
    }
    default:
      throw DataError(path + ": unknown model kind");
  }
  return m;
}

namespace detail {

// numbers are exported as decimal strings with enough digits to round-trip
inline std::string lossless(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline nlohmann::ordered_json lossless_array(const std::vector<float>& v) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (float x : v) a.push_back(lossless(double(x)));
  return a;
}

}  // namespace detail

inline nlohmann::ordered_json model_to_json(const ModelFile& m) {
  nlohmann::ordered_json j;
  j["kind"] = model_kind_name(m.kind);
  j["config_hash"] = m.config_hash;
  j["seed"] = m.seed;
  switch (m.kind) {
    case ModelKind::Kmeans:
      j["K"] = m.codebook.K;
      j["dim"] = m.codebook.dim;
      j["centroids"] = detail::lossless_array(m.codebook.centroids);
      break;
    case ModelKind::Pca:
      j["input_dim"] = m.pca.input_dim;
      j["output_dim"] = m.pca.output_dim;
      j["mean"] = detail::lossless_array(m.pca.mean);
      j["basis"] = detail::lossless_array(m.pca.basis);
      j["scale"] = detail::lossless_array(m.pca.scale);
      break;
    case ModelKind::Gmm:
      j["K"] = m.gmm.K;
      j["dim"] = m.gmm.dim;
      j["weights"] = detail::lossless_array(m.gmm.weights);
      j["means"] = detail::lossless_array(m.gmm.means);
      j["variances"] = detail::lossless_array(m.gmm.variances);
      break;
    case ModelKind::Svm:
      j["dim"] = m.svm.w.size();
      j["positive"] = label_name(m.svm.positive);
      j["w"] = detail::lossless_array(m.svm.w);
      j["b"] = detail::lossless(m.svm.b);
      j["lambda"] = detail::lossless(m.svm.lambda);
      j["epochs"] = m.svm.epochs;
      break;
  }
  return j;
}

inline void export_model_json(const ModelFile& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError(path + ": cannot open for writing");
  os << model_to_json(m).dump(2) << '\n';
  if (!os) throw DataError(path + ": short write");
}

}  // namespace fpad
