#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpad/config.hpp"
#include "fpad/corpus.hpp"
#include "fpad/encode.hpp"
#include "fpad/eval.hpp"
#include "fpad/model_io.hpp"
#include "fpad/pipeline_report.hpp"
#include "fpad/protocol.hpp"
#include "fpad/svm.hpp"

namespace fpad {

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
  double per_image_mean_ms = 0.0;  // 0 when the stage is not per-image
  double per_image_p95_ms = 0.0;
};

struct RunManifest {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  std::vector<std::string> model_files;
  std::vector<StageTiming> timings;
};

struct EncoderOutputs {
  std::vector<EncodedVector> train;
  std::vector<EncodedVector> test;
  DualScorer scorer;
  double encode_mean_ms = 0.0;
  std::size_t empty_train = 0;
  std::size_t empty_test = 0;
};

struct ProtocolRunResult {
  ProtocolSplit split;
  FusionWeights weights;
  std::map<std::string, EvalReport> reports;  // keys: fv, vlad, bow, fusion
  std::map<std::string, double> encode_mean_ms;
  RunManifest run_manifest;
};

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline double percentile95(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t idx =
      std::min(v.size() - 1, std::size_t(std::ceil(0.95 * double(v.size()))) - 1);
  return v[idx];
}

inline std::string resolve_path(const std::string& base_dir, const std::string& p) {
  namespace fs = std::filesystem;
  fs::path path(p);
  if (path.is_absolute()) return p;
  return (fs::path(base_dir) / path).string();
}

// Bounded-memory pass over a record list: images are loaded and extracted in
// parallel within a fixed-size window, then handed to `consume` in manifest
// order. Extraction errors carry the sample path.
template <typename Consume>
void extraction_pass(const std::vector<SampleRecord>& records,
                     const std::string& base_dir, const DenseSiftParams& sift,
                     unsigned threads, std::vector<double>* per_image_ms,
                     Consume&& consume) {
  constexpr std::size_t window = 8;
  std::vector<DescriptorSet> slots(std::min(window, records.size()));
  std::vector<double> times(slots.size());
  for (std::size_t base = 0; base < records.size(); base += window) {
    const std::size_t n = std::min(window, records.size() - base);
    parallel_for(n, threads, [&](std::size_t i) {
      const auto& rec = records[base + i];
      try {
        Stopwatch sw;
        const GrayImage img = load_grayscale(resolve_path(base_dir, rec.path));
        slots[i] = extract(img, sift);
        times[i] = sw.seconds() * 1e3;
      } catch (const DataError& e) {
        throw DataError(std::string("sample '") + rec.path + "': " + e.what());
      }
    });
    for (std::size_t i = 0; i < n; ++i) {
      if (per_image_ms) per_image_ms->push_back(times[i]);
      consume(base + i, std::move(slots[i]));
      slots[i] = DescriptorSet{};
    }
  }
}

inline std::vector<Label> labels_of(const std::vector<SampleRecord>& recs) {
  std::vector<Label> y;
  y.reserve(recs.size());
  for (const auto& r : recs) y.push_back(r.label);
  return y;
}

inline FeatureMatrix matrix_of(const std::vector<EncodedVector>& vs) {
  if (vs.empty()) throw DataError("no encoded vectors");
  FeatureMatrix m(vs.size(), vs.front().v.size());
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (vs[i].v.size() != m.dim) throw DataError("inconsistent encoding dims");
    std::copy(vs[i].v.begin(), vs[i].v.end(), m.row(i));
  }
  return m;
}

// Seeded stratified carve of validation indices out of the train split.
inline void carve_validation(const std::vector<SampleRecord>& train,
                             double val_fraction, std::uint64_t seed,
                             std::vector<std::size_t>& subtrain_idx,
                             std::vector<std::size_t>& val_idx) {
  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < train.size(); ++i)
    strata[std::string(label_name(train[i].label)) + '|' + train[i].material]
        .push_back(i);
  for (auto& [key, idx] : strata) {
    Rng rng(derive_seed(seed, "val-split:" + key));
    rng.shuffle(idx);
    const std::size_t n_val = std::max<std::size_t>(
        1, std::size_t(std::floor(val_fraction * double(idx.size()))));
    for (std::size_t i = 0; i < idx.size(); ++i)
      (i < n_val ? val_idx : subtrain_idx).push_back(idx[i]);
  }
  std::sort(subtrain_idx.begin(), subtrain_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
}

inline std::vector<ScoredSample> score_split(const DualScorer& scorer,
                                             const std::vector<EncodedVector>& vs,
                                             const std::vector<SampleRecord>& recs,
                                             ScoreSource source,
                                             std::vector<ScoreRow>* rows = nullptr) {
  std::vector<ScoredSample> out;
  out.reserve(vs.size());
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const DualScoreDebug d = dual_score_raw(scorer, vs[i].v.data(), vs[i].v.size());
    out.push_back({d.value, recs[i].label, recs[i].path});
    if (rows) rows->push_back({recs[i].path, recs[i].label, d.value, d.s_bf, d.s_pa});
    (void)source;
  }
  return out;
}

}  // namespace detail

// Full pipeline for one protocol: extract -> vocabularies (train split only)
// -> encode -> dual SVMs -> fusion-weight search on a validation carve ->
// test scoring -> per-encoder and fused reports. All artifacts land in
// cfg.out_dir; a `.stale` marker flags partially written output. Passing
// `fixed_weights` skips the weight search (e.g. to reuse known-scenario
// weights on another protocol).
inline ProtocolRunResult run_protocol(const PipelineConfig& cfg,
                                      std::ostream* log = nullptr,
                                      const FusionWeights* fixed_weights = nullptr) {
  namespace fs = std::filesystem;
  cfg.validate();
  const unsigned threads = resolve_threads(cfg.threads);
  const std::uint64_t hash = config_hash(cfg);
  auto say = [&](const std::string& s) {
    if (log) *log << "[run-protocol] " << s << "\n";
  };

  fs::create_directories(cfg.out_dir);
  const std::string stale_marker = (fs::path(cfg.out_dir) / ".stale").string();
  {
    std::ofstream marker(stale_marker);
    marker << "run in progress or aborted\n";
  }

  ProtocolRunResult result;
  RunManifest& rm = result.run_manifest;
  rm.config_hash = hash;
  rm.seed = cfg.seed;
  auto add_timing = [&](const std::string& stage, double secs,
                        const std::vector<double>& per_image) {
    StageTiming t;
    t.stage = stage;
    t.seconds = secs;
    if (!per_image.empty()) {
      double sum = 0.0;
      for (double v : per_image) sum += v;
      t.per_image_mean_ms = sum / double(per_image.size());
      t.per_image_p95_ms = detail::percentile95(per_image);
    }
    rm.timings.push_back(t);
  };
  auto save_stamped = [&](ModelFile m, const std::string& name) {
    m.config_hash = hash;
    const std::string path = (fs::path(cfg.out_dir) / name).string();
    save_model(m, path);
    rm.model_files.push_back(name);
    return path;
  };

  // ---- split ----
  std::vector<std::string> warnings;
  const std::vector<SampleRecord> records = load_manifest(cfg.manifest, &warnings);
  for (const auto& w : warnings) say("warning: " + w);
  const std::string base_dir = fs::path(cfg.manifest).parent_path().string();
  ProtocolSpec proto = cfg.protocol;
  proto.seed = derive_seed(cfg.seed, "protocol-split");
  result.split = build_split(records, proto);
  say("split: " + std::to_string(result.split.train.size()) + " train / " +
      std::to_string(result.split.test.size()) + " test");

  // ---- vocabularies (train split only) ----
  detail::Stopwatch vocab_watch;
  std::vector<double> extract_ms;
  ReservoirSampler sampler(cfg.vocab_samples, kSiftDim,
                           derive_seed(cfg.seed, "vocab-sample"));
  detail::extraction_pass(result.split.train, base_dir, cfg.sift, threads,
                          &extract_ms, [&](std::size_t, DescriptorSet&& ds) {
                            const FeatureMatrix m = to_matrix(ds);
                            sampler.add_all(m);
                          });
  const std::size_t pooled = sampler.seen();
  FeatureMatrix raw_sample = sampler.take();
  say("pooled " + std::to_string(pooled) + " descriptors, kept " +
      std::to_string(raw_sample.rows));
  add_timing("extract-vocab-pool", vocab_watch.seconds(), extract_ms);

  detail::Stopwatch train_watch;
  KmeansOptions ko;
  ko.max_iters = cfg.kmeans_iters;
  ko.threads = threads;
  ko.seed = derive_seed(cfg.seed, "kmeans-bow");
  const Codebook bow_cb = train_kmeans(raw_sample, cfg.bow_k, ko).codebook;

  PcaOptions po;
  po.whiten = cfg.pca_whiten;
  po.threads = threads;
  const PcaProjection pca = train_pca(raw_sample, cfg.pca_dim, po);
  const FeatureMatrix projected = pca.project_rows(raw_sample, threads);

  ko.seed = derive_seed(cfg.seed, "kmeans-vlad");
  const Codebook vlad_cb = train_kmeans(projected, cfg.vlad_k, ko).codebook;

  GmmOptions go;
  go.seed = derive_seed(cfg.seed, "gmm");
  go.max_iters = cfg.gmm_iters;
  go.tol = cfg.gmm_tol;
  go.threads = threads;
  const GmmModel gmm = train_gmm(projected, cfg.fv_k, go).model;
  add_timing("train-vocab", train_watch.seconds(), {});
  say("vocabularies trained");

  {
    ModelFile m;
    m.kind = ModelKind::Kmeans;
    m.seed = derive_seed(cfg.seed, "kmeans-bow");
    m.codebook = bow_cb;
    save_stamped(m, "model_bow_codebook.padm");
    m.seed = derive_seed(cfg.seed, "kmeans-vlad");
    m.codebook = vlad_cb;
    save_stamped(m, "model_vlad_codebook.padm");
    ModelFile mp;
    mp.kind = ModelKind::Pca;
    mp.seed = cfg.seed;
    mp.pca = pca;
    save_stamped(mp, "model_pca.padm");
    ModelFile mg;
    mg.kind = ModelKind::Gmm;
    mg.seed = derive_seed(cfg.seed, "gmm");
    mg.gmm = gmm;
    save_stamped(mg, "model_gmm.padm");
  }

  // ---- encode both splits ----
  const BowEncoder bow_enc(bow_cb, cfg.pyramid, threads);
  const FvEncoder fv_enc(pca, gmm, cfg.fv_norm);
  const VladEncoder vlad_enc(pca, vlad_cb, threads);

  std::map<std::string, EncoderOutputs> enc;
  for (const char* name : {"fv", "vlad", "bow"}) enc[name];

  auto encode_split = [&](const std::vector<SampleRecord>& recs, bool is_train) {
    std::vector<double> bow_ms, fv_ms, vlad_ms, ext_ms;
    auto& bow_out = is_train ? enc["bow"].train : enc["bow"].test;
    auto& fv_out = is_train ? enc["fv"].train : enc["fv"].test;
    auto& vlad_out = is_train ? enc["vlad"].train : enc["vlad"].test;
    bow_out.resize(recs.size());
    fv_out.resize(recs.size());
    vlad_out.resize(recs.size());
    std::vector<std::array<double, 3>> times(recs.size());
    detail::Stopwatch sw;
    detail::extraction_pass(
        recs, base_dir, cfg.sift, threads, &ext_ms,
        [&](std::size_t i, DescriptorSet&& ds) {
          detail::Stopwatch t0;
          bow_out[i] = bow_enc.encode(ds, threads);
          const double t_bow = t0.seconds();
          detail::Stopwatch t1;
          fv_out[i] = fv_enc.encode(ds, threads);
          const double t_fv = t1.seconds();
          detail::Stopwatch t2;
          vlad_out[i] = vlad_enc.encode(ds, threads);
          const double t_vlad = t2.seconds();
          times[i] = {t_bow * 1e3, t_fv * 1e3, t_vlad * 1e3};
        });
    for (const auto& t : times) {
      bow_ms.push_back(t[0]);
      fv_ms.push_back(t[1]);
      vlad_ms.push_back(t[2]);
    }
    const std::string tag = is_train ? "train" : "test";
    add_timing("extract-" + tag, sw.seconds(), ext_ms);
    add_timing("encode-bow-" + tag, 0.0, bow_ms);
    add_timing("encode-fv-" + tag, 0.0, fv_ms);
    add_timing("encode-vlad-" + tag, 0.0, vlad_ms);
    if (!is_train) {
      auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / double(v.size());
      };
      result.encode_mean_ms["bow"] = mean(bow_ms);
      result.encode_mean_ms["fv"] = mean(fv_ms);
      result.encode_mean_ms["vlad"] = mean(vlad_ms);
    }
  };
  encode_split(result.split.train, true);
  encode_split(result.split.test, false);
  say("encoded train and test splits");

  for (auto& [name, e] : enc) {
    for (const auto& v : e.train) e.empty_train += v.empty_input ? 1 : 0;
    for (const auto& v : e.test) e.empty_test += v.empty_input ? 1 : 0;
    const EncodingKind kind = parse_encoding(name);
    save_vectors(e.train, kind,
                 (fs::path(cfg.out_dir) / ("vectors_" + name + "_train.padv")).string());
    save_vectors(e.test, kind,
                 (fs::path(cfg.out_dir) / ("vectors_" + name + "_test.padv")).string());
  }

  // ---- dual SVMs on the full train split ----
  detail::Stopwatch svm_watch;
  const std::vector<Label> train_labels = detail::labels_of(result.split.train);
  for (auto& [name, e] : enc) {
    const FeatureMatrix x = detail::matrix_of(e.train);
    SvmOptions so;
    so.lambda = cfg.svm_lambda;
    so.epochs = cfg.svm_epochs;
    so.seed = derive_seed(cfg.seed, "svm-bf-" + name);
    e.scorer.svm_bf = train_svm(x, train_labels, Label::BonaFide, so).svm;
    so.seed = derive_seed(cfg.seed, "svm-pa-" + name);
    e.scorer.svm_pa = train_svm(x, train_labels, Label::Attack, so).svm;
    e.scorer.validate();
    ModelFile m;
    m.kind = ModelKind::Svm;
    m.seed = e.scorer.svm_bf.seed;
    m.svm = e.scorer.svm_bf;
    save_stamped(m, "svm_bf_" + name + ".padm");
    m.seed = e.scorer.svm_pa.seed;
    m.svm = e.scorer.svm_pa;
    save_stamped(m, "svm_pa_" + name + ".padm");
  }
  add_timing("train-svm", svm_watch.seconds(), {});
  say("dual SVMs trained");

  // ---- fusion weights ----
  detail::Stopwatch fuse_watch;
  if (fixed_weights) {
    fixed_weights->validate();
    result.weights = *fixed_weights;
  } else if (cfg.oracle_weights) {
    // explicit upper bound: weights tuned on the test scores themselves
    std::map<std::string, std::vector<ScoredSample>> test_scores;
    for (auto& [name, e] : enc)
      test_scores[name] = detail::score_split(e.scorer, e.test, result.split.test,
                                              ScoreSource::Fusion);
    result.weights = grid_search_weights(test_scores["fv"], test_scores["vlad"],
                                         test_scores["bow"], cfg.fusion_step);
  } else {
    std::vector<std::size_t> subtrain_idx, val_idx;
    detail::carve_validation(result.split.train, cfg.val_fraction, cfg.seed,
                             subtrain_idx, val_idx);
    std::vector<SampleRecord> val_recs;
    std::vector<Label> sub_labels;
    for (std::size_t i : subtrain_idx) sub_labels.push_back(train_labels[i]);
    for (std::size_t i : val_idx) val_recs.push_back(result.split.train[i]);
    std::map<std::string, std::vector<ScoredSample>> val_scores;
    for (auto& [name, e] : enc) {
      FeatureMatrix sub(subtrain_idx.size(), e.train.front().v.size());
      for (std::size_t r = 0; r < subtrain_idx.size(); ++r)
        std::copy(e.train[subtrain_idx[r]].v.begin(), e.train[subtrain_idx[r]].v.end(),
                  sub.row(r));
      SvmOptions so;
      so.lambda = cfg.svm_lambda;
      so.epochs = cfg.svm_epochs;
      DualScorer val_scorer;
      so.seed = derive_seed(cfg.seed, "svm-bf-" + name + "-val");
      val_scorer.svm_bf = train_svm(sub, sub_labels, Label::BonaFide, so).svm;
      so.seed = derive_seed(cfg.seed, "svm-pa-" + name + "-val");
      val_scorer.svm_pa = train_svm(sub, sub_labels, Label::Attack, so).svm;
      std::vector<EncodedVector> val_vecs;
      for (std::size_t i : val_idx) val_vecs.push_back(enc[name].train[i]);
      val_scores[name] = detail::score_split(val_scorer, val_vecs, val_recs,
                                             ScoreSource::Fusion);
    }
    result.weights = grid_search_weights(val_scores["fv"], val_scores["vlad"],
                                         val_scores["bow"], cfg.fusion_step);
  }
  add_timing("fusion-weights", fuse_watch.seconds(), {});
  say("fusion weights: alpha=" + std::to_string(result.weights.alpha) +
      " beta=" + std::to_string(result.weights.beta));

  // ---- test scoring, fusion, reports ----
  std::map<std::string, std::vector<ScoredSample>> test_scores;
  std::map<std::string, std::vector<ScoreRow>> test_rows;
  const std::map<std::string, ScoreSource> sources = {
      {"fv", ScoreSource::FV}, {"vlad", ScoreSource::VLAD}, {"bow", ScoreSource::BoW}};
  for (auto& [name, e] : enc)
    test_scores[name] = detail::score_split(e.scorer, e.test, result.split.test,
                                            sources.at(name), &test_rows[name]);

  std::vector<ScoredSample> fused;
  std::vector<ScoreRow> fused_rows;
  for (std::size_t i = 0; i < result.split.test.size(); ++i) {
    const PadScore s = fuse(PadScore{test_scores["fv"][i].score, ScoreSource::FV},
                            PadScore{test_scores["vlad"][i].score, ScoreSource::VLAD},
                            PadScore{test_scores["bow"][i].score, ScoreSource::BoW},
                            result.weights);
    fused.push_back({s.value, result.split.test[i].label, result.split.test[i].path});
    fused_rows.push_back({result.split.test[i].path, result.split.test[i].label,
                          s.value, 0.0, 0.0});
  }
  test_scores["fusion"] = fused;
  test_rows["fusion"] = fused_rows;

  std::vector<std::string> test_materials;
  for (const auto& r : result.split.test) test_materials.push_back(r.material);

  for (const auto& [name, scores] : test_scores) {
    save_scores(test_rows[name],
                (fs::path(cfg.out_dir) / ("scores_" + name + "_test.csv")).string());
    EvalReport rep = compute_report(scores, cfg.acer_threshold, cfg.det_resolution);
    const auto by_material = apcer_by_group(scores, test_materials, cfg.acer_threshold);
    nlohmann::ordered_json extra;
    extra["encoder"] = name;
    extra["protocol"] = protocol_name(cfg.protocol.protocol);
    if (name == "fusion") {
      extra["fusion_weights"] = {{"alpha", result.weights.alpha},
                                 {"beta", result.weights.beta},
                                 {"oracle", cfg.oracle_weights}};
    }
    std::size_t empties = name == "fusion" ? 0 : enc[name].empty_test;
    write_report_json(rep, cfg, hash, by_material, extra, empties,
                      (fs::path(cfg.out_dir) / ("report_" + name + ".json")).string());
    save_det_csv(rep.det, (fs::path(cfg.out_dir) / ("det_" + name + ".csv")).string());
    if (cfg.det_svg)
      save_det_svg(rep.det, (fs::path(cfg.out_dir) / ("det_" + name + ".svg")).string(),
                   "DET (" + name + ")");
    result.reports[name] = std::move(rep);
  }

  // run manifest carries wall-clock timings; it is not part of the
  // deterministic artifact set
  {
    nlohmann::ordered_json j;
    j["tool_version"] = rm.tool_version;
    j["config_hash"] = rm.config_hash;
    j["seed"] = rm.seed;
    j["model_files"] = rm.model_files;
    nlohmann::ordered_json ts = nlohmann::ordered_json::array();
    for (const auto& t : rm.timings)
      ts.push_back({{"stage", t.stage},
                    {"seconds", t.seconds},
                    {"per_image_mean_ms", t.per_image_mean_ms},
                    {"per_image_p95_ms", t.per_image_p95_ms}});
    j["timings"] = ts;
    std::ofstream os((fs::path(cfg.out_dir) / "run_manifest.json").string());
    os << j.dump(2) << '\n';
  }

  fs::remove(stale_marker);
  say("done");
  return result;
}

// ---- K sweep ---------------------------------------------------------------

struct SweepRow {
  std::size_t k = 0;
  std::string encoder;
  double d_eer = 0.0;
  double acer = 0.0;
  double encode_mean_ms = 0.0;
  std::size_t vector_length = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::map<std::string, std::size_t> best_k;  // encoder -> argmin d_eer
};

inline SweepResult sweep_k(const PipelineConfig& base,
                           const std::vector<std::size_t>& ks,
                           std::ostream* log = nullptr) {
  namespace fs = std::filesystem;
  if (ks.empty()) throw DataError("sweep: need at least one K");
  SweepResult sweep;
  std::map<std::string, double> best_eer;
  for (const std::size_t k : ks) {
    PipelineConfig cfg = base;
    cfg.bow_k = cfg.vlad_k = cfg.fv_k = k;
    cfg.out_dir = (fs::path(base.out_dir) / ("k" + std::to_string(k))).string();
    if (log) *log << "[sweep-k] K=" << k << "\n";
    const ProtocolRunResult run = run_protocol(cfg, log);
    for (const char* name : {"fv", "vlad", "bow"}) {
      SweepRow row;
      row.k = k;
      row.encoder = name;
      row.d_eer = run.reports.at(name).d_eer;
      row.acer = run.reports.at(name).acer;
      row.encode_mean_ms = run.encode_mean_ms.at(name);
      const std::string n = name;
      row.vector_length = n == "fv"     ? 2 * k * cfg.pca_dim
                          : n == "vlad" ? k * cfg.pca_dim
                                        : k * cfg.pyramid.total_cells();
      sweep.rows.push_back(row);
      if (!best_eer.count(n) || row.d_eer < best_eer[n]) {
        best_eer[n] = row.d_eer;
        sweep.best_k[n] = k;
      }
    }
  }

  nlohmann::ordered_json j;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : sweep.rows)
    rows.push_back({{"k", r.k},
                    {"encoder", r.encoder},
                    {"d_eer", r.d_eer},
                    {"acer", r.acer},
                    {"encode_mean_ms", r.encode_mean_ms},
                    {"vector_length", r.vector_length}});
  j["rows"] = rows;
  j["best_k"] = sweep.best_k;
  fs::create_directories(base.out_dir);
  std::ofstream os((fs::path(base.out_dir) / "sweep.json").string());
  os << j.dump(2) << '\n';
  return sweep;
}

}  // namespace fpad
