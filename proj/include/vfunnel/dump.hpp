#pragma once

// Attention dump: the JSON document an attention extractor writes for one
// (image, question) pair.
//
//   {
//     "version": 1,
//     "image": {"width": W, "height": H},
//     "grid": {"rows": R, "cols": C, "weights": [R*C numbers, row-major]},
//       -- or, for models with a query-transformer connector --
//     "connector": {"rows": R, "cols": C,
//                   "token_weights": [T numbers],
//                   "token_to_patch": [T arrays of R*C numbers]},
//     "provenance": {"model": "...", "prompt": "...", "question": "..."},
//     "flags": ["..."]
//   }
//
// Exactly one of "grid" and "connector" is present. "provenance" and
// "flags" are optional.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "vfunnel/attention.hpp"
#include "vfunnel/error.hpp"
#include "vfunnel/geometry.hpp"

namespace vfunnel {

inline constexpr int kDumpVersion = 1;

struct DumpGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> weights;

  friend bool operator==(const DumpGrid &, const DumpGrid &) = default;
};

struct DumpConnector {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> token_weights;
  std::vector<std::vector<double>> token_to_patch;

  friend bool operator==(const DumpConnector &, const DumpConnector &) = default;
};

struct DumpProvenance {
  std::string model;
  std::string prompt;
  std::string question;

  friend bool operator==(const DumpProvenance &, const DumpProvenance &) = default;
};

struct AttentionDump {
  int version = kDumpVersion;
  std::int64_t image_width = 0;
  std::int64_t image_height = 0;
  std::optional<DumpGrid> grid;
  std::optional<DumpConnector> connector;
  std::optional<DumpProvenance> provenance;
  std::vector<std::string> flags;

  std::size_t grid_rows() const { return grid ? grid->rows : connector->rows; }
  std::size_t grid_cols() const { return grid ? grid->cols : connector->cols; }

  friend bool operator==(const AttentionDump &, const AttentionDump &) = default;
};

struct DumpReport {
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
  std::string summary() const {
    std::string s;
    for (const auto &v : violations) {
      if (!s.empty()) {
        s += "; ";
      }
      s += v;
    }
    return s;
  }
};

namespace detail {

using json = nlohmann::json;

inline bool is_count(const json &j) {
  return j.is_number_unsigned() || (j.is_number_integer() && j.get<std::int64_t>() >= 0);
}

inline void check_weight_array(const json &arr, const std::string &field, std::size_t expected,
                               DumpReport &report) {
  if (!arr.is_array()) {
    report.violations.push_back(field + ": expected an array");
    return;
  }
  if (arr.size() != expected) {
    report.violations.push_back(field + ": expected " + std::to_string(expected) +
                                " values, found " + std::to_string(arr.size()));
  }
  for (std::size_t k = 0; k < arr.size(); ++k) {
    const json &v = arr[k];
    if (!v.is_number()) {
      report.violations.push_back(field + "[" + std::to_string(k) + "]: not a number");
      return;
    }
    const double d = v.get<double>();
    if (!std::isfinite(d) || d < 0.0) {
      report.violations.push_back(field + "[" + std::to_string(k) + "]: negative or non-finite");
      return;
    }
  }
}

inline bool check_dims(const json &obj, const std::string &prefix, DumpReport &report) {
  bool good = true;
  for (const char *key : {"rows", "cols"}) {
    if (!obj.contains(key) || !is_count(obj[key]) || obj[key].get<std::int64_t>() < 1) {
      report.violations.push_back(prefix + "." + key + ": expected a positive integer");
      good = false;
    }
  }
  return good;
}

} // namespace detail

/// Schema, shape and sign checks. Every violation is reported by field name.
inline DumpReport validate_dump(const nlohmann::json &doc) {
  using detail::json;
  DumpReport report;
  if (!doc.is_object()) {
    report.violations.push_back("document: expected a JSON object");
    return report;
  }
  if (!doc.contains("version") || !doc["version"].is_number_integer()) {
    report.violations.push_back("version: expected an integer");
  } else if (doc["version"].get<int>() != kDumpVersion) {
    report.violations.push_back("version: unsupported value " +
                                std::to_string(doc["version"].get<int>()));
  }

  if (!doc.contains("image") || !doc["image"].is_object()) {
    report.violations.push_back("image: expected an object");
  } else {
    for (const char *key : {"width", "height"}) {
      const json &im = doc["image"];
      if (!im.contains(key) || !detail::is_count(im[key]) || im[key].get<std::int64_t>() < 1) {
        report.violations.push_back(std::string("image.") + key + ": expected a positive integer");
      }
    }
  }

  const bool has_grid = doc.contains("grid");
  const bool has_conn = doc.contains("connector");
  if (has_grid && has_conn) {
    report.violations.push_back("grid/connector: both present, exactly one is allowed");
  } else if (!has_grid && !has_conn) {
    report.violations.push_back("grid/connector: one of them is required");
  }

  if (has_grid) {
    const json &g = doc["grid"];
    if (!g.is_object()) {
      report.violations.push_back("grid: expected an object");
    } else if (detail::check_dims(g, "grid", report)) {
      const auto cells = g["rows"].get<std::size_t>() * g["cols"].get<std::size_t>();
      if (!g.contains("weights")) {
        report.violations.push_back("grid.weights: missing");
      } else {
        detail::check_weight_array(g["weights"], "grid.weights", cells, report);
      }
    }
  }

  if (has_conn) {
    const json &c = doc["connector"];
    if (!c.is_object()) {
      report.violations.push_back("connector: expected an object");
    } else if (detail::check_dims(c, "connector", report)) {
      const auto cells = c["rows"].get<std::size_t>() * c["cols"].get<std::size_t>();
      if (!c.contains("token_weights") || !c["token_weights"].is_array() ||
          c["token_weights"].empty()) {
        report.violations.push_back("connector.token_weights: expected a non-empty array");
      } else {
        const std::size_t tokens = c["token_weights"].size();
        detail::check_weight_array(c["token_weights"], "connector.token_weights", tokens, report);
        if (!c.contains("token_to_patch") || !c["token_to_patch"].is_array()) {
          report.violations.push_back("connector.token_to_patch: expected an array of rows");
        } else {
          const json &m = c["token_to_patch"];
          if (m.size() != tokens) {
            report.violations.push_back("connector.token_to_patch: expected " +
                                        std::to_string(tokens) + " rows, found " +
                                        std::to_string(m.size()));
          }
          for (std::size_t t = 0; t < m.size(); ++t) {
            detail::check_weight_array(m[t], "connector.token_to_patch[" + std::to_string(t) + "]",
                                       cells, report);
          }
        }
      }
    }
  }

  if (doc.contains("provenance")) {
    const json &p = doc["provenance"];
    if (!p.is_object()) {
      report.violations.push_back("provenance: expected an object");
    } else {
      for (const char *key : {"model", "prompt", "question"}) {
        if (p.contains(key) && !p[key].is_string()) {
          report.violations.push_back(std::string("provenance.") + key + ": expected a string");
        }
      }
    }
  }
  if (doc.contains("flags")) {
    const json &f = doc["flags"];
    if (!f.is_array() || !std::all_of(f.begin(), f.end(), [](const json &x) { return x.is_string(); })) {
      report.violations.push_back("flags: expected an array of strings");
    }
  }
  return report;
}

inline AttentionDump parse_dump(const nlohmann::json &doc) {
  const DumpReport report = validate_dump(doc);
  if (!report.ok()) {
    throw InvalidInput("invalid attention dump: " + report.summary());
  }
  AttentionDump d;
  d.version = doc["version"].get<int>();
  d.image_width = doc["image"]["width"].get<std::int64_t>();
  d.image_height = doc["image"]["height"].get<std::int64_t>();
  if (doc.contains("grid")) {
    const auto &g = doc["grid"];
    d.grid = DumpGrid{g["rows"].get<std::size_t>(), g["cols"].get<std::size_t>(),
                      g["weights"].get<std::vector<double>>()};
  } else {
    const auto &c = doc["connector"];
    d.connector = DumpConnector{c["rows"].get<std::size_t>(), c["cols"].get<std::size_t>(),
                                c["token_weights"].get<std::vector<double>>(),
                                c["token_to_patch"].get<std::vector<std::vector<double>>>()};
  }
  if (doc.contains("provenance")) {
    const auto &p = doc["provenance"];
    d.provenance = DumpProvenance{p.value("model", ""), p.value("prompt", ""),
                                  p.value("question", "")};
  }
  if (doc.contains("flags")) {
    d.flags = doc["flags"].get<std::vector<std::string>>();
  }
  return d;
}

inline AttentionDump parse_dump_text(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error &e) {
    throw InvalidInput(std::string("attention dump is not valid JSON: ") + e.what());
  }
  return parse_dump(doc);
}

inline AttentionDump load_dump(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InvalidInput("cannot open attention dump " + path.string());
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_dump_text(buf.str());
}

inline nlohmann::ordered_json dump_to_json(const AttentionDump &d) {
  nlohmann::ordered_json j;
  j["version"] = d.version;
  j["image"] = {{"width", d.image_width}, {"height", d.image_height}};
  if (d.grid) {
    j["grid"] = {{"rows", d.grid->rows}, {"cols", d.grid->cols}, {"weights", d.grid->weights}};
  }
  if (d.connector) {
    j["connector"] = {{"rows", d.connector->rows},
                      {"cols", d.connector->cols},
                      {"token_weights", d.connector->token_weights},
                      {"token_to_patch", d.connector->token_to_patch}};
  }
  if (d.provenance) {
    j["provenance"] = {{"model", d.provenance->model},
                       {"prompt", d.provenance->prompt},
                       {"question", d.provenance->question}};
  }
  if (!d.flags.empty()) {
    j["flags"] = d.flags;
  }
  return j;
}

inline std::string serialize_dump(const AttentionDump &d, int indent = 2) {
  return dump_to_json(d).dump(indent);
}

/// Raw (unnormalized) spatial grid carried by the dump; connector factors
/// are composed here.
inline AttentionGrid dump_grid(const AttentionDump &d) {
  if (d.grid) {
    return AttentionGrid(d.grid->rows, d.grid->cols, d.grid->weights);
  }
  if (!d.connector) {
    throw InvalidInput("attention dump carries neither grid nor connector factors");
  }
  const DumpConnector &c = *d.connector;
  std::vector<double> flat;
  flat.reserve(c.token_to_patch.size() * c.rows * c.cols);
  for (const auto &row : c.token_to_patch) {
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return compose_connector(TokenAttention{c.token_weights},
                           ConnectorMatrix(c.token_weights.size(), c.rows, c.cols, std::move(flat)));
}

inline GridGeometry dump_geometry(const AttentionDump &d) {
  return GridGeometry(d.image_width, d.image_height, d.grid_rows(), d.grid_cols());
}

} // namespace vfunnel
