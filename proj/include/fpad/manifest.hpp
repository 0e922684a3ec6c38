#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpad/common.hpp"

namespace fpad {

enum class Label { BonaFide, Attack };

inline const char* label_name(Label l) {
  return l == Label::BonaFide ? "bonafide" : "attack";
}

struct SampleRecord {
  std::string path;
  Label label = Label::BonaFide;
  std::string material = "none";  // "none" for bona fide samples
  std::string sensor;
  std::string dataset;
};

namespace detail {

inline std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return s;
}

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline Label parse_label(const std::string& token, const std::string& context) {
  const std::string t = lowercase(trim(token));
  if (t == "bonafide") return Label::BonaFide;
  if (t == "attack") return Label::Attack;
  throw DataError(context + ": unknown label token '" + token +
                  "' (expected 'bonafide' or 'attack')");
}

inline SampleRecord validate_record(SampleRecord r, const std::string& context) {
  if (r.path.empty()) throw DataError(context + ": empty path");
  if (r.material.empty()) r.material = "none";
  if (r.label == Label::BonaFide && r.material != "none")
    throw DataError(context + ": bona fide sample with material '" + r.material +
                    "' (must be 'none')");
  return r;
}

}  // namespace detail

// CSV manifest: header `path,label,material,sensor,dataset`, UTF-8, LF/CRLF.
// A JSON array of objects with the same field names is accepted as well.
// Duplicate paths produce a warning but are kept.
inline std::vector<SampleRecord> load_manifest(
    const std::string& path, std::vector<std::string>* warnings = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(path + ": unreadable manifest");

  std::vector<SampleRecord> records;
  std::set<std::string> seen;
  auto warn_duplicate = [&](const SampleRecord& r, std::size_t line_no) {
    if (!seen.insert(r.path).second && warnings)
      warnings->push_back(path + ":" + std::to_string(line_no) +
                          ": duplicate path '" + r.path + "' (kept)");
  };

  const int first = is.peek();
  if (first == '[') {
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ": invalid JSON manifest: " + e.what());
    }
    std::size_t idx = 0;
    for (const auto& o : j) {
      const std::string ctx = path + "[" + std::to_string(idx++) + "]";
      for (const char* field : {"path", "label", "material", "sensor", "dataset"})
        if (!o.contains(field))
          throw DataError(ctx + ": missing column '" + std::string(field) + "'");
      SampleRecord r;
      r.path = o.at("path").get<std::string>();
      r.label = detail::parse_label(o.at("label").get<std::string>(), ctx);
      r.material = o.at("material").get<std::string>();
      r.sensor = o.at("sensor").get<std::string>();
      r.dataset = o.at("dataset").get<std::string>();
      records.push_back(detail::validate_record(std::move(r), ctx));
      warn_duplicate(records.back(), idx);
    }
    return records;
  }

  std::string line;
  if (!std::getline(is, line)) throw DataError(path + ": empty manifest");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  {
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(detail::lowercase(detail::trim(col)));
    const std::vector<std::string> expected = {"path", "label", "material",
                                               "sensor", "dataset"};
    if (cols != expected) {
      for (const auto& e : expected)
        if (std::find(cols.begin(), cols.end(), e) == cols.end())
          throw DataError(path + ": missing column '" + e + "' in header");
      throw DataError(path + ": manifest header must be exactly `path,label,material,sensor,dataset`");
    }
  }

  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (line.back() == ',') fields.push_back("");
    const std::string ctx = path + ":" + std::to_string(line_no);
    if (fields.size() != 5)
      throw DataError(ctx + ": expected 5 comma-separated fields, got " +
                      std::to_string(fields.size()));
    SampleRecord r;
    r.path = detail::trim(fields[0]);
    r.label = detail::parse_label(fields[1], ctx);
    r.material = detail::trim(fields[2]);
    r.sensor = detail::trim(fields[3]);
    r.dataset = detail::trim(fields[4]);
    records.push_back(detail::validate_record(std::move(r), ctx));
    warn_duplicate(records.back(), line_no);
  }
  return records;
}

inline void save_manifest(const std::vector<SampleRecord>& records,
                          const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError(path + ": cannot open for writing");
  os << "path,label,material,sensor,dataset\n";
  for (const auto& r : records)
    os << r.path << ',' << label_name(r.label) << ',' << r.material << ','
       << r.sensor << ',' << r.dataset << '\n';
  if (!os) throw DataError(path + ": short write");
}

}  // namespace fpad
