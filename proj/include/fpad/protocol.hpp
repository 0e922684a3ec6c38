#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fpad/common.hpp"
#include "fpad/manifest.hpp"
#include "fpad/rng.hpp"

namespace fpad {

enum class Protocol { Known, UnknownMaterial, UnknownSensor, CrossDatabase };

inline const char* protocol_name(Protocol p) {
  switch (p) {
    case Protocol::Known: return "known";
    case Protocol::UnknownMaterial: return "unknown-material";
    case Protocol::UnknownSensor: return "unknown-sensor";
    case Protocol::CrossDatabase: return "cross-database";
  }
  return "?";
}

inline Protocol parse_protocol(const std::string& s) {
  const std::string t = detail::lowercase(detail::trim(s));
  if (t == "known") return Protocol::Known;
  if (t == "unknown-material" || t == "unknownmaterial") return Protocol::UnknownMaterial;
  if (t == "unknown-sensor" || t == "unknownsensor") return Protocol::UnknownSensor;
  if (t == "cross-database" || t == "crossdatabase") return Protocol::CrossDatabase;
  throw DataError("unknown protocol '" + s + "'");
}

struct ProtocolSpec {
  Protocol protocol = Protocol::Known;
  // held-out sets; which one applies depends on the protocol
  std::vector<std::string> held_out_materials;
  std::vector<std::string> held_out_sensors;
  std::vector<std::string> held_out_datasets;
  // fraction of each stratum that goes to train where a random partition is
  // needed (known protocol; bona fide side of unknown-material)
  double train_fraction = 0.5;
  std::uint64_t seed = 1;
};

struct ProtocolSplit {
  Protocol protocol = Protocol::Known;
  std::vector<SampleRecord> train;
  std::vector<SampleRecord> test;
};

namespace detail {

// Seeded stratified partition: within each stratum the record order follows
// the manifest, the shuffle is keyed on (seed, stratum), and the first
// ceil(fraction * n) go to train. Deterministic for a fixed manifest order.
inline void stratified_partition(const std::vector<const SampleRecord*>& records,
                                 double fraction, std::uint64_t seed,
                                 std::vector<SampleRecord>& train,
                                 std::vector<SampleRecord>& test) {
  std::map<std::string, std::vector<const SampleRecord*>> strata;
  for (const auto* r : records)
    strata[std::string(label_name(r->label)) + '|' + r->material + '|' +
           r->sensor + '|' + r->dataset]
        .push_back(r);
  for (auto& [key, group] : strata) {
    Rng rng(derive_seed(seed, "split:" + key));
    std::vector<std::size_t> order(group.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    const std::size_t n_train =
        static_cast<std::size_t>(std::ceil(fraction * double(group.size())));
    for (std::size_t i = 0; i < group.size(); ++i)
      (i < n_train ? train : test).push_back(*group[order[i]]);
  }
}

inline bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace detail

// Materializes one of the four evaluation protocols as a train/test split.
// Throws DataError when the held-out configuration empties an entire class
// on either side.
inline ProtocolSplit build_split(const std::vector<SampleRecord>& records,
                                 const ProtocolSpec& spec) {
  ProtocolSplit split;
  split.protocol = spec.protocol;

  switch (spec.protocol) {
    case Protocol::Known: {
      std::vector<const SampleRecord*> all;
      all.reserve(records.size());
      for (const auto& r : records) all.push_back(&r);
      detail::stratified_partition(all, spec.train_fraction, spec.seed,
                                   split.train, split.test);
      break;
    }
    case Protocol::UnknownMaterial: {
      if (spec.held_out_materials.empty())
        throw DataError("unknown-material protocol needs held_out_materials");
      std::vector<const SampleRecord*> bona_fide;
      for (const auto& r : records) {
        if (r.label == Label::BonaFide) {
          bona_fide.push_back(&r);
        } else if (detail::contains(spec.held_out_materials, r.material)) {
          split.test.push_back(r);
        } else {
          split.train.push_back(r);
        }
      }
      detail::stratified_partition(bona_fide, spec.train_fraction, spec.seed,
                                   split.train, split.test);
      break;
    }
    case Protocol::UnknownSensor:
    case Protocol::CrossDatabase: {
      const bool by_sensor = spec.protocol == Protocol::UnknownSensor;
      const auto& held = by_sensor ? spec.held_out_sensors : spec.held_out_datasets;
      if (held.empty())
        throw DataError(std::string(protocol_name(spec.protocol)) +
                        " protocol needs a held-out " +
                        (by_sensor ? "sensor" : "dataset") + " list");
      for (const auto& r : records) {
        const std::string& key = by_sensor ? r.sensor : r.dataset;
        (detail::contains(held, key) ? split.test : split.train).push_back(r);
      }
      break;
    }
  }

  auto count = [](const std::vector<SampleRecord>& v, Label l) {
    return std::count_if(v.begin(), v.end(),
                         [&](const SampleRecord& r) { return r.label == l; });
  };
  for (Label l : {Label::BonaFide, Label::Attack}) {
    if (count(split.train, l) == 0)
      throw DataError(std::string("empty train class: no ") + label_name(l) +
                      " samples left in training under protocol " +
                      protocol_name(spec.protocol));
    if (count(split.test, l) == 0)
      throw DataError(std::string("empty test class: no ") + label_name(l) +
                      " samples left in test under protocol " +
                      protocol_name(spec.protocol));
  }
  return split;
}

}  // namespace fpad
