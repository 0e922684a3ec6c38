#pragma once

#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "fpad/config.hpp"
#include "fpad/eval.hpp"

namespace fpad {

// Full evaluation report as JSON: all rates, the DET trace, a per-material
// APCER group-by and an echo of the producing configuration. The embedded
// config hash lets downstream consumers detect stale model/report mixes.
inline nlohmann::ordered_json report_to_json(
    const EvalReport& rep, const PipelineConfig& cfg, std::uint64_t cfg_hash,
    const std::map<std::string, double>& apcer_by_material,
    const nlohmann::ordered_json& extra, std::size_t empty_encodings) {
  nlohmann::ordered_json j;
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  j["config_hash"] = cfg_hash;
  j["counts"] = {{"bona_fide", rep.n_bona_fide},
                 {"attack", rep.n_attack},
                 {"empty_encodings", empty_encodings}};
  j["threshold"] = rep.threshold;
  j["apcer"] = rep.apcer;
  j["bpcer"] = rep.bpcer;
  j["acer"] = rep.acer;
  j["d_eer"] = rep.d_eer;
  j["d_eer_threshold"] = rep.d_eer_threshold;
  j["bpcer10"] = rep.bpcer10;
  j["bpcer20"] = rep.bpcer20;
  j["bpcer100"] = rep.bpcer100;
  j["apcer_by_material"] = apcer_by_material;
  nlohmann::ordered_json det = nlohmann::ordered_json::array();
  for (const auto& p : rep.det) det.push_back({p.threshold, p.apcer, p.bpcer});
  j["det"] = det;
  j["config"] = config_to_json(cfg);
  return j;
}

inline void write_report_json(const EvalReport& rep, const PipelineConfig& cfg,
                              std::uint64_t cfg_hash,
                              const std::map<std::string, double>& apcer_by_material,
                              const nlohmann::ordered_json& extra,
                              std::size_t empty_encodings, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError(path + ": cannot open for writing");
  os << report_to_json(rep, cfg, cfg_hash, apcer_by_material, extra, empty_encodings)
            .dump(2)
     << '\n';
  if (!os) throw DataError(path + ": short write");
}

}  // namespace fpad
