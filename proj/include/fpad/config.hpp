#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpad/common.hpp"
#include "fpad/dense_sift.hpp"
#include "fpad/encode.hpp"
#include "fpad/protocol.hpp"

namespace fpad {

inline constexpr const char* kToolVersion = "0.1.0";

// Everything a full pipeline run depends on. Flag overrides win over the
// JSON file; all stage seeds derive from the single `seed`.
struct PipelineConfig {
  std::string manifest;
  std::string out_dir = "out";

  ProtocolSpec protocol;

  DenseSiftParams sift;

  std::size_t bow_k = 1024;
  std::size_t vlad_k = 1024;
  std::size_t fv_k = 1024;
  std::size_t pca_dim = 64;
  bool pca_whiten = false;
  PyramidSpec pyramid;
  std::size_t vocab_samples = 200000;
  int kmeans_iters = 100;
  int gmm_iters = 100;
  double gmm_tol = 1e-5;

  double svm_lambda = 1e-4;
  int svm_epochs = 50;

  double fusion_step = 0.1;
  double val_fraction = 0.2;
  bool oracle_weights = false;  // tune (alpha,beta) on test scores: upper bound only
  double acer_threshold = 0.0;
  std::size_t det_resolution = 0;  // 0 = every distinct threshold
  FvNorm fv_norm = FvNorm::Improved;
  bool det_svg = false;

  std::uint64_t seed = 1;
  int threads = 0;  // 0 = PAD_THREADS env or hardware

  void validate() const {
    sift.validate();
    pyramid.validate();
    for (std::size_t k : {bow_k, vlad_k, fv_k})
      if (k < 2 || k > 65536)
        throw DataError("config: K must be in [2, 65536], got " + std::to_string(k));
    if (pca_dim == 0 || pca_dim > kSiftDim)
      throw DataError("config: pca dim must be in [1, 128]");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
      throw DataError("config: val_fraction must be in (0, 1)");
    if (!(fusion_step > 0.0 && fusion_step <= 1.0))
      throw DataError("config: fusion_step must be in (0, 1]");
    if (!(protocol.train_fraction > 0.0 && protocol.train_fraction < 1.0))
      throw DataError("config: train_fraction must be in (0, 1)");
  }
};

namespace detail {

inline nlohmann::ordered_json protocol_to_json(const ProtocolSpec& p) {
  nlohmann::ordered_json j;
  j["name"] = protocol_name(p.protocol);
  j["held_out_materials"] = p.held_out_materials;
  j["held_out_sensors"] = p.held_out_sensors;
  j["held_out_datasets"] = p.held_out_datasets;
  j["train_fraction"] = p.train_fraction;
  return j;
}

}  // namespace detail

inline nlohmann::ordered_json config_to_json(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  j["manifest"] = c.manifest;
  j["out_dir"] = c.out_dir;
  j["protocol"] = detail::protocol_to_json(c.protocol);
  j["sift"] = {{"spacing", c.sift.spacing},
               {"scales", c.sift.scales},
               {"contrast_threshold", c.sift.contrast_threshold},
               {"clip_value", c.sift.clip_value}};
  j["bow_k"] = c.bow_k;
  j["vlad_k"] = c.vlad_k;
  j["fv_k"] = c.fv_k;
  j["pca_dim"] = c.pca_dim;
  j["pca_whiten"] = c.pca_whiten;
  j["pyramid_levels"] = c.pyramid.levels;
  j["vocab_samples"] = c.vocab_samples;
  j["kmeans_iters"] = c.kmeans_iters;
  j["gmm_iters"] = c.gmm_iters;
  j["gmm_tol"] = c.gmm_tol;
  j["svm_lambda"] = c.svm_lambda;
  j["svm_epochs"] = c.svm_epochs;
  j["fusion_step"] = c.fusion_step;
  j["val_fraction"] = c.val_fraction;
  j["oracle_weights"] = c.oracle_weights;
  j["acer_threshold"] = c.acer_threshold;
  j["det_resolution"] = c.det_resolution;
  j["fv_norm"] = c.fv_norm == FvNorm::Improved ? "improved"
                 : c.fv_norm == FvNorm::L2     ? "l2"
                                               : "none";
  j["det_svg"] = c.det_svg;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return j;
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  auto get = [&](const char* key, auto& dst) {
    if (j.contains(key)) dst = j.at(key).template get<std::decay_t<decltype(dst)>>();
  };
  get("manifest", c.manifest);
  get("out_dir", c.out_dir);
  if (j.contains("protocol")) {
    const auto& p = j.at("protocol");
    if (p.contains("name")) c.protocol.protocol = parse_protocol(p.at("name").get<std::string>());
    if (p.contains("held_out_materials"))
      c.protocol.held_out_materials = p.at("held_out_materials").get<std::vector<std::string>>();
    if (p.contains("held_out_sensors"))
      c.protocol.held_out_sensors = p.at("held_out_sensors").get<std::vector<std::string>>();
    if (p.contains("held_out_datasets"))
      c.protocol.held_out_datasets = p.at("held_out_datasets").get<std::vector<std::string>>();
    if (p.contains("train_fraction"))
      c.protocol.train_fraction = p.at("train_fraction").get<double>();
  }
  if (j.contains("sift")) {
    const auto& s = j.at("sift");
    if (s.contains("spacing")) c.sift.spacing = s.at("spacing").get<int>();
    if (s.contains("scales")) c.sift.scales = s.at("scales").get<std::vector<int>>();
    if (s.contains("contrast_threshold"))
      c.sift.contrast_threshold = s.at("contrast_threshold").get<double>();
    if (s.contains("clip_value")) c.sift.clip_value = s.at("clip_value").get<double>();
  }
  get("bow_k", c.bow_k);
  get("vlad_k", c.vlad_k);
  get("fv_k", c.fv_k);
  get("pca_dim", c.pca_dim);
  get("pca_whiten", c.pca_whiten);
  if (j.contains("pyramid_levels"))
    c.pyramid.levels = j.at("pyramid_levels").get<std::vector<std::size_t>>();
  get("vocab_samples", c.vocab_samples);
  get("kmeans_iters", c.kmeans_iters);
  get("gmm_iters", c.gmm_iters);
  get("gmm_tol", c.gmm_tol);
  get("svm_lambda", c.svm_lambda);
  get("svm_epochs", c.svm_epochs);
  get("fusion_step", c.fusion_step);
  get("val_fraction", c.val_fraction);
  get("oracle_weights", c.oracle_weights);
  get("acer_threshold", c.acer_threshold);
  get("det_resolution", c.det_resolution);
  if (j.contains("fv_norm")) c.fv_norm = parse_fv_norm(j.at("fv_norm").get<std::string>());
  get("det_svg", c.det_svg);
  get("seed", c.seed);
  get("threads", c.threads);
  return c;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError(path + ": unreadable config");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": invalid JSON: " + std::string(e.what()));
  }
  return config_from_json(j);
}

// Stable hash over the model-relevant configuration. Output options,
// thread counts and report knobs are deliberately excluded: they cannot
// change any trained model. Stamped into every PADM file and echoed by
// reports so stale model/config mixtures abort instead of silently blending.
inline std::uint64_t config_hash(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  j["manifest"] = c.manifest;
  j["protocol"] = detail::protocol_to_json(c.protocol);
  j["sift"] = {{"spacing", c.sift.spacing},
               {"scales", c.sift.scales},
               {"contrast_threshold", c.sift.contrast_threshold},
               {"clip_value", c.sift.clip_value}};
  j["bow_k"] = c.bow_k;
  j["vlad_k"] = c.vlad_k;
  j["fv_k"] = c.fv_k;
  j["pca_dim"] = c.pca_dim;
  j["pca_whiten"] = c.pca_whiten;
  j["pyramid_levels"] = c.pyramid.levels;
  j["vocab_samples"] = c.vocab_samples;
  j["kmeans_iters"] = c.kmeans_iters;
  j["gmm_iters"] = c.gmm_iters;
  j["gmm_tol"] = c.gmm_tol;
  j["svm_lambda"] = c.svm_lambda;
  j["svm_epochs"] = c.svm_epochs;
  j["val_fraction"] = c.val_fraction;
  j["fv_norm"] = int(c.fv_norm);
  j["seed"] = c.seed;
  return fnv1a64(j.dump());
}

}  // namespace fpad
