// Command-line front end for the PAD pipeline. Subcommands mirror the
// pipeline stages; `run-protocol` drives everything end to end from one
// config. Exit codes: 0 ok, 1 usage, 2 bad data, 3 numerical failure.

#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fpad/fpad.hpp"

namespace fs = std::filesystem;
using namespace fpad;

namespace {

struct SiftFlags {
  int spacing = -1;
  std::vector<int> scales;
  double contrast = -1.0;
  double clip = -1.0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--spacing", spacing, "grid spacing S in pixels");
    cmd->add_option("--scales", scales, "descriptor scales (spatial bin sizes)");
    cmd->add_option("--contrast-threshold", contrast,
                    "low-contrast filter on the mean gradient norm");
    cmd->add_option("--clip", clip, "descriptor component clip value");
  }
  void apply(DenseSiftParams& p) const {
    if (spacing > 0) p.spacing = spacing;
    if (!scales.empty()) p.scales = scales;
    if (contrast >= 0) p.contrast_threshold = contrast;
    if (clip >= 0) p.clip_value = clip;
  }
};

std::string sanitize_stem(const std::string& path) {
  std::string s = path;
  for (char& c : s)
    if (c == '/' || c == '\\' || c == ':') c = '_';
  return s;
}

std::vector<std::string> collect_pads_files(const std::vector<std::string>& inputs) {
  std::vector<std::string> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (const auto& e : fs::directory_iterator(in))
        if (e.path().extension() == ".pads") files.push_back(e.path().string());
    } else {
      files.push_back(in);
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no descriptor (.pads) files found");
  return files;
}

std::vector<SampleRecord> manifest_for_run(const std::string& path,
                                           std::vector<std::string>& warnings) {
  auto records = load_manifest(path, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  return records;
}

void check_same_hash(const std::vector<const ModelFile*>& models, bool allow_mixed) {
  std::set<std::uint64_t> hashes;
  for (const auto* m : models) hashes.insert(m->config_hash);
  if (hashes.size() > 1 && !allow_mixed)
    throw DataError(
        "input models carry different config hashes (stale mix of training "
        "runs); re-train them from one config or pass --allow-mixed-models");
}

// staged invocations assemble the same unified config a run-protocol run
// would use, so equal flags produce equal stamped hashes
struct StagedConfig {
  std::string config_path;
  PipelineConfig cfg;
  SiftFlags sift;
  std::size_t k = 0;
  std::size_t d = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;

  void add_common(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "pipeline config JSON");
    cmd->add_option("--k", k, "vocabulary size (applies to all encoders)");
    cmd->add_option("--d", d, "PCA output dimension");
    cmd->add_option("--seed", seed, "global seed")->each([this](const std::string&) {
      seed_set = true;
    });
    sift.add_to(cmd);
  }
  PipelineConfig assemble() {
    PipelineConfig c = config_path.empty() ? PipelineConfig{} : load_config(config_path);
    sift.apply(c.sift);
    if (k > 0) c.bow_k = c.vlad_k = c.fv_k = k;
    if (d > 0) c.pca_dim = d;
    if (seed_set) c.seed = seed;
    return c;
  }
};

int cmd_gen_corpus(CLI::App& app) {
  auto* cmd = app.add_subcommand("gen-corpus", "generate the synthetic test corpus");
  auto opt = std::make_shared<CorpusOptions>();
  cmd->add_option("--out-dir", opt->out_dir, "output directory")->required();
  cmd->add_option("--bona-fide", opt->n_bona_fide, "number of bona fide images");
  cmd->add_option("--attacks", opt->n_attack, "number of attack images");
  cmd->add_option("--size", opt->base_size, "base image side in pixels");
  cmd->add_option("--seed", opt->seed, "generator seed");
  cmd->callback([opt] {
    const auto records = generate_corpus(*opt);
    std::cout << "wrote " << records.size() << " images + manifest.csv under "
              << opt->out_dir << "\n";
  });
  return 0;
}

int cmd_extract(CLI::App& app) {
  auto* cmd = app.add_subcommand("extract", "dense-SIFT descriptors for a manifest");
  struct Args {
    std::string manifest, out_dir;
    SiftFlags sift;
    int threads = 0;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--manifest", a->manifest, "manifest CSV/JSON")->required();
  cmd->add_option("--out-dir", a->out_dir, "directory for .pads files")->required();
  cmd->add_option("--threads", a->threads, "worker threads (default: PAD_THREADS or hardware)");
  a->sift.add_to(cmd);
  cmd->callback([a] {
    std::vector<std::string> warnings;
    const auto records = manifest_for_run(a->manifest, warnings);
    if (records.empty()) {
      std::cerr << "warning: empty manifest, nothing to extract\n";
      return;
    }
    DenseSiftParams params;
    a->sift.apply(params);
    fs::create_directories(a->out_dir);
    const std::string base_dir = fs::path(a->manifest).parent_path().string();
    const unsigned threads = resolve_threads(a->threads);
    std::size_t total = 0;
    detail::extraction_pass(records, base_dir, params, threads, nullptr,
                            [&](std::size_t i, DescriptorSet&& ds) {
                              total += ds.size();
                              const std::string name =
                                  sanitize_stem(records[i].path) + ".pads";
                              save_descriptors(ds, (fs::path(a->out_dir) / name).string());
                            });
    std::cout << "extracted " << total << " descriptors from " << records.size()
              << " images\n";
  });
  return 0;
}

int cmd_train_vocab(CLI::App& app) {
  auto* cmd = app.add_subcommand("train-vocab", "train kmeans / pca / gmm models");
  struct Args {
    std::string kind, out, pca_model, export_json;
    std::vector<std::string> descriptors;
    StagedConfig staged;
    std::size_t samples = 0;
    bool whiten = false;
    int threads = 0;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--kind", a->kind, "kmeans|pca|gmm")->required();
  cmd->add_option("--descriptors", a->descriptors, "PADS files or directories")->required();
  cmd->add_option("--out", a->out, "output .padm model")->required();
  cmd->add_option("--pca", a->pca_model,
                  "project descriptors with this PCA first (kmeans for VLAD, gmm)");
  cmd->add_option("--samples", a->samples, "descriptor subsample budget");
  cmd->add_flag("--whiten", a->whiten, "PCA whitening (off by default)");
  cmd->add_option("--export-json", a->export_json, "also write a lossless JSON export");
  cmd->add_option("--threads", a->threads, "worker threads");
  a->staged.add_common(cmd);
  cmd->callback([a] {
    PipelineConfig cfg = a->staged.assemble();
    if (a->samples > 0) cfg.vocab_samples = a->samples;
    if (a->whiten) cfg.pca_whiten = true;
    cfg.validate();
    const unsigned threads = resolve_threads(a->threads);
    const std::uint64_t hash = config_hash(cfg);

    ReservoirSampler sampler(cfg.vocab_samples, kSiftDim,
                             derive_seed(cfg.seed, "vocab-sample"));
    for (const auto& f : collect_pads_files(a->descriptors)) {
      const DescriptorSet ds = load_descriptors(f);
      const FeatureMatrix m = to_matrix(ds);
      sampler.add_all(m);
    }
    FeatureMatrix pool = sampler.take();
    std::cout << "pooled " << sampler.seen() << " descriptors, kept " << pool.rows
              << "\n";

    ModelFile out;
    out.config_hash = hash;
    if (a->kind == "pca") {
      PcaOptions po;
      po.whiten = cfg.pca_whiten;
      po.threads = threads;
      out.kind = ModelKind::Pca;
      out.seed = cfg.seed;
      out.pca = train_pca(pool, cfg.pca_dim, po);
    } else {
      FeatureMatrix train_data = std::move(pool);
      bool projected = false;
      if (!a->pca_model.empty()) {
        const ModelFile pm = load_model(a->pca_model);
        if (pm.kind != ModelKind::Pca) throw DataError("--pca: not a PCA model");
        train_data = pm.pca.project_rows(train_data, threads);
        projected = true;
      }
      if (a->kind == "kmeans") {
        KmeansOptions ko;
        ko.max_iters = cfg.kmeans_iters;
        ko.threads = threads;
        ko.seed = derive_seed(cfg.seed, projected ? "kmeans-vlad" : "kmeans-bow");
        out.kind = ModelKind::Kmeans;
        out.seed = ko.seed;
        out.codebook =
            train_kmeans(train_data, projected ? cfg.vlad_k : cfg.bow_k, ko).codebook;
      } else if (a->kind == "gmm") {
        if (!projected)
          throw DataError("gmm training requires --pca (decorrelated descriptors)");
        GmmOptions go;
        go.seed = derive_seed(cfg.seed, "gmm");
        go.max_iters = cfg.gmm_iters;
        go.tol = cfg.gmm_tol;
        go.threads = threads;
        out.kind = ModelKind::Gmm;
        out.seed = go.seed;
        out.gmm = train_gmm(train_data, cfg.fv_k, go).model;
      } else {
        throw DataError("unknown --kind '" + a->kind + "' (kmeans|pca|gmm)");
      }
    }
    save_model(out, a->out);
    if (!a->export_json.empty()) export_model_json(out, a->export_json);
    std::cout << "wrote " << a->out << " (" << model_kind_name(out.kind) << ")\n";
  });
  return 0;
}

int cmd_encode(CLI::App& app) {
  auto* cmd = app.add_subcommand("encode", "encode a manifest into fixed-length vectors");
  struct Args {
    std::string manifest, kind, out, codebook, pca, gmm, fv_norm = "improved";
    StagedConfig staged;
    std::vector<std::size_t> pyramid;
    bool allow_mixed = false;
    int threads = 0;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--manifest", a->manifest, "manifest CSV/JSON")->required();
  cmd->add_option("--kind", a->kind, "bow|fv|vlad")->required();
  cmd->add_option("--out", a->out, "output .padv batch")->required();
  cmd->add_option("--codebook", a->codebook, "kmeans model (bow, vlad)");
  cmd->add_option("--pca", a->pca, "PCA model (fv, vlad)");
  cmd->add_option("--gmm", a->gmm, "GMM model (fv)");
  cmd->add_option("--pyramid", a->pyramid, "BoW pyramid subdivisions (default 1 2 4)");
  cmd->add_option("--fv-norm", a->fv_norm, "improved|l2|none");
  cmd->add_flag("--allow-mixed-models", a->allow_mixed,
                "skip the config-hash consistency check");
  cmd->add_option("--threads", a->threads, "worker threads");
  a->staged.add_common(cmd);
  cmd->callback([a] {
    const EncodingKind kind = parse_encoding(a->kind);
    PipelineConfig cfg = a->staged.assemble();
    if (!a->pyramid.empty()) cfg.pyramid.levels = a->pyramid;
    cfg.fv_norm = parse_fv_norm(a->fv_norm);
    cfg.validate();
    const unsigned threads = resolve_threads(a->threads);

    std::vector<std::string> warnings;
    const auto records = manifest_for_run(a->manifest, warnings);
    const std::string base_dir = fs::path(a->manifest).parent_path().string();

    ModelFile cb_m, pca_m, gmm_m;
    std::vector<const ModelFile*> used;
    if (kind == EncodingKind::BoW || kind == EncodingKind::VLAD) {
      if (a->codebook.empty()) throw DataError("--codebook required for " + a->kind);
      cb_m = load_model(a->codebook);
      if (cb_m.kind != ModelKind::Kmeans) throw DataError("--codebook: not a kmeans model");
      used.push_back(&cb_m);
    }
    if (kind == EncodingKind::FV || kind == EncodingKind::VLAD) {
      if (a->pca.empty()) throw DataError("--pca required for " + a->kind);
      pca_m = load_model(a->pca);
      if (pca_m.kind != ModelKind::Pca) throw DataError("--pca: not a PCA model");
      used.push_back(&pca_m);
    }
    if (kind == EncodingKind::FV) {
      if (a->gmm.empty()) throw DataError("--gmm required for fv");
      gmm_m = load_model(a->gmm);
      if (gmm_m.kind != ModelKind::Gmm) throw DataError("--gmm: not a GMM model");
      used.push_back(&gmm_m);
    }
    check_same_hash(used, a->allow_mixed);

    std::optional<BowEncoder> bow;
    std::optional<FvEncoder> fv;
    std::optional<VladEncoder> vlad;
    if (kind == EncodingKind::BoW) bow.emplace(cb_m.codebook, cfg.pyramid, threads);
    if (kind == EncodingKind::FV) fv.emplace(pca_m.pca, gmm_m.gmm, cfg.fv_norm);
    if (kind == EncodingKind::VLAD) vlad.emplace(pca_m.pca, cb_m.codebook, threads);

    std::vector<EncodedVector> vectors(records.size());
    detail::extraction_pass(records, base_dir, cfg.sift, threads, nullptr,
                            [&](std::size_t i, DescriptorSet&& ds) {
                              if (bow) vectors[i] = bow->encode(ds, threads);
                              if (fv) vectors[i] = fv->encode(ds, threads);
                              if (vlad) vectors[i] = vlad->encode(ds, threads);
                            });
    save_vectors(vectors, kind, a->out);
    std::cout << "wrote " << vectors.size() << " " << a->kind << " vectors ("
              << (vectors.empty() ? 0 : vectors.front().v.size()) << " dims) to "
              << a->out << "\n";
  });
  return 0;
}

int cmd_train_svm(CLI::App& app) {
  auto* cmd = app.add_subcommand("train-svm", "train the dual linear SVMs for one encoder");
  struct Args {
    std::string vectors, manifest, out_bf, out_pa, export_json;
    StagedConfig staged;
    double lambda = -1.0;
    int epochs = -1;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--vectors", a->vectors, "encoded .padv batch")->required();
  cmd->add_option("--manifest", a->manifest, "manifest aligned with the batch rows")->required();
  cmd->add_option("--out-bf", a->out_bf, "bona fide-positive SVM output")->required();
  cmd->add_option("--out-pa", a->out_pa, "attack-positive SVM output")->required();
  cmd->add_option("--lambda", a->lambda, "regularization strength");
  cmd->add_option("--epochs", a->epochs, "SGD epochs");
  cmd->add_option("--export-json", a->export_json, "JSON export path prefix");
  a->staged.add_common(cmd);
  cmd->callback([a] {
    PipelineConfig cfg = a->staged.assemble();
    if (a->lambda > 0) cfg.svm_lambda = a->lambda;
    if (a->epochs > 0) cfg.svm_epochs = a->epochs;
    cfg.validate();
    const std::uint64_t hash = config_hash(cfg);

    std::vector<std::string> warnings;
    const auto records = manifest_for_run(a->manifest, warnings);
    const VectorBatch batch = load_vectors(a->vectors);
    if (batch.m.rows != records.size())
      throw DataError("vector count " + std::to_string(batch.m.rows) +
                      " != manifest rows " + std::to_string(records.size()));
    const std::vector<Label> labels = detail::labels_of(records);
    const std::string enc = encoding_name(batch.kind);

    SvmOptions so;
    so.lambda = cfg.svm_lambda;
    so.epochs = cfg.svm_epochs;
    so.seed = derive_seed(cfg.seed, "svm-bf-" + enc);
    ModelFile bf;
    bf.kind = ModelKind::Svm;
    bf.config_hash = hash;
    bf.seed = so.seed;
    bf.svm = train_svm(batch.m, labels, Label::BonaFide, so).svm;
    save_model(bf, a->out_bf);
    so.seed = derive_seed(cfg.seed, "svm-pa-" + enc);
    ModelFile pa;
    pa.kind = ModelKind::Svm;
    pa.config_hash = hash;
    pa.seed = so.seed;
    pa.svm = train_svm(batch.m, labels, Label::Attack, so).svm;
    save_model(pa, a->out_pa);
    if (!a->export_json.empty()) {
      export_model_json(bf, a->export_json + ".bf.json");
      export_model_json(pa, a->export_json + ".pa.json");
    }
    std::cout << "wrote " << a->out_bf << " and " << a->out_pa << "\n";
  });
  return 0;
}

int cmd_score(CLI::App& app) {
  auto* cmd = app.add_subcommand("score", "dual-SVM PAD scores for an encoded batch");
  struct Args {
    std::string vectors, svm_bf, svm_pa, manifest, out;
    bool allow_mixed = false;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--vectors", a->vectors, "encoded .padv batch")->required();
  cmd->add_option("--svm-bf", a->svm_bf, "bona fide-positive SVM")->required();
  cmd->add_option("--svm-pa", a->svm_pa, "attack-positive SVM")->required();
  cmd->add_option("--manifest", a->manifest, "manifest aligned with the batch rows")->required();
  cmd->add_option("--out", a->out, "output scores CSV")->required();
  cmd->add_flag("--allow-mixed-models", a->allow_mixed,
                "skip the config-hash consistency check");
  cmd->callback([a] {
    std::vector<std::string> warnings;
    const auto records = manifest_for_run(a->manifest, warnings);
    const VectorBatch batch = load_vectors(a->vectors);
    if (batch.m.rows != records.size())
      throw DataError("vector count != manifest rows");
    const ModelFile bf = load_model(a->svm_bf);
    const ModelFile pa = load_model(a->svm_pa);
    if (bf.kind != ModelKind::Svm || pa.kind != ModelKind::Svm)
      throw DataError("svm model files expected");
    check_same_hash({&bf, &pa}, a->allow_mixed);
    DualScorer scorer{bf.svm, pa.svm};
    scorer.validate();

    std::vector<ScoreRow> rows;
    for (std::size_t i = 0; i < batch.m.rows; ++i) {
      const DualScoreDebug d = dual_score_raw(scorer, batch.m.row(i), batch.m.dim);
      rows.push_back({records[i].path, records[i].label, d.value, d.s_bf, d.s_pa});
    }
    save_scores(rows, a->out);
    std::cout << "wrote " << rows.size() << " scores to " << a->out << "\n";
  });
  return 0;
}

int cmd_fuse(CLI::App& app) {
  auto* cmd = app.add_subcommand("fuse", "weighted fusion of per-encoder scores");
  struct Args {
    std::string fv, vlad, bow, out;
    double alpha = 0.0, beta = 0.0, step = 0.1;
    bool grid_search = false;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--fv", a->fv, "FV scores CSV")->required();
  cmd->add_option("--vlad", a->vlad, "VLAD scores CSV")->required();
  cmd->add_option("--bow", a->bow, "BoW scores CSV")->required();
  cmd->add_option("--out", a->out, "fused scores CSV")->required();
  cmd->add_option("--alpha", a->alpha, "FV weight");
  cmd->add_option("--beta", a->beta, "VLAD weight");
  cmd->add_flag("--grid-search", a->grid_search,
                "pick (alpha, beta) minimizing D-EER on these scores");
  cmd->add_option("--step", a->step, "grid step for --grid-search");
  cmd->callback([a] {
    const auto fv = load_scores(a->fv);
    const auto vlad = load_scores(a->vlad);
    const auto bow = load_scores(a->bow);
    FusionWeights w{a->alpha, a->beta};
    if (a->grid_search)
      w = grid_search_weights(to_scored_samples(fv), to_scored_samples(vlad),
                              to_scored_samples(bow), a->step);
    w.validate();
    if (fv.size() != vlad.size() || fv.size() != bow.size())
      throw DataError("score lists have different sizes");
    std::vector<ScoreRow> rows;
    for (std::size_t i = 0; i < fv.size(); ++i) {
      if (fv[i].id != vlad[i].id || fv[i].id != bow[i].id)
        throw DataError("sample ids misaligned at row " + std::to_string(i));
      const PadScore s = fuse(PadScore{fv[i].score, ScoreSource::FV},
                              PadScore{vlad[i].score, ScoreSource::VLAD},
                              PadScore{bow[i].score, ScoreSource::BoW}, w);
      rows.push_back({fv[i].id, fv[i].label, s.value, 0.0, 0.0});
    }
    save_scores(rows, a->out);
    std::cout << "fused with alpha=" << w.alpha << " beta=" << w.beta << " -> "
              << a->out << "\n";
  });
  return 0;
}

int cmd_evaluate(CLI::App& app) {
  auto* cmd = app.add_subcommand("evaluate", "ISO 30107 metrics + DET for a score file");
  struct Args {
    std::string scores, out, det_csv, det_svg, manifest;
    double threshold = 0.0;
    std::size_t det_resolution = 0;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--scores", a->scores, "scores CSV")->required();
  cmd->add_option("--out", a->out, "report JSON")->required();
  cmd->add_option("--det-csv", a->det_csv, "DET curve CSV");
  cmd->add_option("--det-svg", a->det_svg, "DET curve SVG plot");
  cmd->add_option("--acer-threshold", a->threshold,
                  "decision threshold for APCER/BPCER/ACER (default 0)");
  cmd->add_option("--det-resolution", a->det_resolution,
                  "subsample the DET to this many points (0 = all)");
  cmd->add_option("--manifest", a->manifest,
                  "join materials by id for the per-material APCER block");
  cmd->callback([a] {
    const auto rows = load_scores(a->scores);
    const auto samples = to_scored_samples(rows);
    const EvalReport rep = compute_report(samples, a->threshold, a->det_resolution);

    std::map<std::string, double> by_material;
    if (!a->manifest.empty()) {
      std::vector<std::string> warnings;
      const auto records = manifest_for_run(a->manifest, warnings);
      std::map<std::string, std::string> material_of;
      for (const auto& r : records) material_of[r.path] = r.material;
      std::vector<std::string> groups;
      for (const auto& s : samples) {
        const auto it = material_of.find(s.id);
        groups.push_back(it == material_of.end() ? "unknown" : it->second);
      }
      by_material = apcer_by_group(samples, groups, a->threshold);
    }

    PipelineConfig cfg;  // standalone evaluation: echo only the knobs used
    cfg.acer_threshold = a->threshold;
    cfg.det_resolution = a->det_resolution;
    nlohmann::ordered_json extra;
    extra["scores_file"] = a->scores;
    write_report_json(rep, cfg, 0, by_material, extra, 0, a->out);
    if (!a->det_csv.empty()) save_det_csv(rep.det, a->det_csv);
    if (!a->det_svg.empty()) save_det_svg(rep.det, a->det_svg);
    std::cout << "apcer=" << rep.apcer << " bpcer=" << rep.bpcer
              << " acer=" << rep.acer << " d_eer=" << rep.d_eer << "\n";
  });
  return 0;
}

void print_reports(const ProtocolRunResult& res) {
  for (const char* name : {"fv", "vlad", "bow", "fusion"}) {
    const EvalReport& r = res.reports.at(name);
    char line[160];
    std::snprintf(line, sizeof(line),
                  "%-7s apcer=%.4f bpcer=%.4f acer=%.4f d_eer=%.4f bpcer100=%.4f",
                  name, r.apcer, r.bpcer, r.acer, r.d_eer, r.bpcer100);
    std::cout << line << "\n";
  }
  std::cout << "fusion weights: alpha=" << res.weights.alpha
            << " beta=" << res.weights.beta << "\n";
}

int cmd_run_protocol(CLI::App& app) {
  auto* cmd = app.add_subcommand("run-protocol",
                                 "full pipeline: split, train, encode, score, report");
  struct Args {
    std::string config, protocol, manifest, out_dir, fv_norm;
    std::vector<std::string> hold_materials, hold_sensors, hold_datasets;
    std::uint64_t seed = 0;
    bool seed_set = false, oracle = false, svg = false;
    int threads = -1;
    std::size_t k = 0, d = 0;
    double alpha = -1.0, beta = -1.0;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--config", a->config, "pipeline config JSON");
  cmd->add_option("--manifest", a->manifest, "dataset manifest (overrides config)");
  cmd->add_option("--out-dir", a->out_dir, "output directory (overrides config)");
  cmd->add_option("--protocol", a->protocol, "known|unknown-material|unknown-sensor|cross-database");
  cmd->add_option("--hold-out-materials", a->hold_materials, "held-out PAI materials");
  cmd->add_option("--hold-out-sensors", a->hold_sensors, "held-out sensors");
  cmd->add_option("--hold-out-datasets", a->hold_datasets, "held-out datasets");
  cmd->add_option("--seed", a->seed, "global seed")->each([a](const std::string&) {
    a->seed_set = true;
  });
  cmd->add_option("--threads", a->threads, "worker threads");
  cmd->add_option("--k", a->k, "vocabulary size for all encoders");
  cmd->add_option("--d", a->d, "PCA output dimension");
  cmd->add_option("--alpha", a->alpha, "fixed FV fusion weight (skips grid search)");
  cmd->add_option("--beta", a->beta, "fixed VLAD fusion weight (skips grid search)");
  cmd->add_option("--fv-norm", a->fv_norm, "improved|l2|none");
  cmd->add_flag("--oracle-weights", a->oracle,
                "tune fusion weights on test scores (upper bound, never default)");
  cmd->add_flag("--det-svg", a->svg, "emit DET plots as SVG");
  cmd->callback([a] {
    PipelineConfig cfg = a->config.empty() ? PipelineConfig{} : load_config(a->config);
    if (!a->manifest.empty()) cfg.manifest = a->manifest;
    if (!a->out_dir.empty()) cfg.out_dir = a->out_dir;
    if (!a->protocol.empty()) cfg.protocol.protocol = parse_protocol(a->protocol);
    if (!a->hold_materials.empty()) cfg.protocol.held_out_materials = a->hold_materials;
    if (!a->hold_sensors.empty()) cfg.protocol.held_out_sensors = a->hold_sensors;
    if (!a->hold_datasets.empty()) cfg.protocol.held_out_datasets = a->hold_datasets;
    if (a->seed_set) cfg.seed = a->seed;
    if (a->threads >= 0) cfg.threads = a->threads;
    if (a->k > 0) cfg.bow_k = cfg.vlad_k = cfg.fv_k = a->k;
    if (a->d > 0) cfg.pca_dim = a->d;
    if (!a->fv_norm.empty()) cfg.fv_norm = parse_fv_norm(a->fv_norm);
    if (a->oracle) cfg.oracle_weights = true;
    if (a->svg) cfg.det_svg = true;
    if (cfg.manifest.empty()) throw DataError("run-protocol: --manifest or config required");

    if (a->alpha >= 0.0 || a->beta >= 0.0) {
      const FusionWeights w{a->alpha < 0 ? 0.0 : a->alpha, a->beta < 0 ? 0.0 : a->beta};
      w.validate();
      print_reports(run_protocol(cfg, &std::cerr, &w));
      return;
    }
    print_reports(run_protocol(cfg, &std::cerr));
  });
  return 0;
}

int cmd_sweep_k(CLI::App& app) {
  auto* cmd = app.add_subcommand("sweep-k", "run the pipeline for each vocabulary size");
  struct Args {
    std::string config;
    std::vector<std::size_t> ks = {256, 512, 1024, 2048};
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--config", a->config, "pipeline config JSON")->required();
  cmd->add_option("--ks", a->ks, "vocabulary sizes to sweep");
  cmd->callback([a] {
    const PipelineConfig cfg = load_config(a->config);
    const SweepResult sweep = sweep_k(cfg, a->ks, &std::cerr);
    std::cout << "K       encoder  d_eer     acer      encode_ms  length\n";
    for (const auto& r : sweep.rows) {
      char line[128];
      std::snprintf(line, sizeof(line), "%-7zu %-8s %-9.4f %-9.4f %-10.2f %zu",
                    r.k, r.encoder.c_str(), r.d_eer, r.acer, r.encode_mean_ms,
                    r.vector_length);
      std::cout << line << "\n";
    }
    for (const auto& [enc, k] : sweep.best_k)
      std::cout << "best K for " << enc << ": " << k << "\n";
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fingerprint presentation-attack detection via encoded local features"};
  app.require_subcommand(1);
  cmd_gen_corpus(app);
  cmd_extract(app);
  cmd_train_vocab(app);
  cmd_encode(app);
  cmd_train_svm(app);
  cmd_score(app);
  cmd_fuse(app);
  cmd_evaluate(app);
  cmd_run_protocol(app);
  cmd_sweep_k(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
