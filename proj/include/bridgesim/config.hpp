#pragma once

// JSON run configuration (schema version 1).
//
// {
//   "schema_version": 1,
//   "model": {"name": "ou", "dim": 2, "F": [-1, -0.5], "c": [0, 0],
//             "sigma": [[1, 0], [0, 1.5]], "drift_split": false, "bound": 10},
//   "initial_state": [0, 0],
//   "observations": [{"time": 1.0, "matrix": [[1, 0]], "value": [0.4],
//                     "window": 1.0, "anchor": [0.4, 0]}],
//   "grid": {"horizon": 1.0, "dt_base": 0.01, "dt_min": 1e-5, "refine_ratio": 0.5},
//   "n_paths": 10000, "seed": 1, "threads": 4, "validate": false,
//   "functionals": [{"type": "coordinate", "time": 0.5, "index": 1}],
//   "outputs": {"report": "report.json", "ensemble_csv": "paths.csv"}
// }
//
// "sigma" may also be a list, read as a diagonal. Optional fields: F, c,
// sigma, drift_split, bound, initial_state (zeros), window (T_k - T_{k-1}),
// anchor (L^T v), horizon (last observation time), dt_min (1e-5 horizon),
// refine_ratio (0.5), threads, validate, outputs.

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "bridgesim/error.hpp"
#include "bridgesim/grid.hpp"
#include "bridgesim/models.hpp"
#include "bridgesim/observation.hpp"

namespace bridgesim {

enum class FunctionalType { Coordinate, MarginalMean, MarginalVar };

inline std::string to_string(FunctionalType type) {
  switch (type) {
    case FunctionalType::Coordinate: return "coordinate";
    case FunctionalType::MarginalMean: return "marginal_mean";
    case FunctionalType::MarginalVar: return "marginal_var";
  }
  return "unknown";
}

/// Each functional reads coordinate `index` at grid time `time`; the type
/// selects whether the conditional mean or variance is reported.
struct FunctionalSpec {
  FunctionalType type = FunctionalType::Coordinate;
  double time = 0.0;
  int index = 0;
};

struct OutputSpec {
  std::optional<std::string> report;
  std::optional<std::string> ensemble_csv;
};

struct RunConfig {
  int schema_version = 1;
  BuiltinModel model;
  Vector initial_state;
  ObservationSet observations;
  double horizon = 0.0;
  GridOptions grid;
  std::size_t n_paths = 1000;
  std::uint64_t seed = 0;
  std::optional<unsigned> threads;
  bool validate = false;
  std::vector<FunctionalSpec> functionals;
  OutputSpec outputs;
  /// Canonical JSON of the parsed document, used for the digest.
  std::string canonical;
};

/// Grid for a configuration: functional times become nodes.
inline std::shared_ptr<const TimeGrid> make_grid(const RunConfig& cfg) {
  std::vector<double> extra;
  for (const auto& f : cfg.functionals) extra.push_back(f.time);
  return std::make_shared<const TimeGrid>(
      build_grid(cfg.horizon, cfg.observations, cfg.grid, extra));
}

/// FNV-1a 64 of the canonical configuration text.
inline std::uint64_t config_digest(const RunConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : cfg.canonical) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace detail {

using json = nlohmann::json;

inline Error schema_error(const std::string& path, const std::string& message) {
  return Error(ErrorKind::InvalidConfiguration, message).at(path);
}

inline void reject_unknown_keys(const json& j, const std::string& path,
                                std::initializer_list<const char*> allowed) {
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& item : j.items()) {
    if (!keys.count(item.key())) {
      throw schema_error(path.empty() ? item.key() : path + "." + item.key(),
                         "unknown field");
    }
  }
}

inline const json& require(const json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) {
    throw schema_error(path.empty() ? key : path + "." + key, "missing required field");
  }
  return j.at(key);
}

inline double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw schema_error(path, "expected a number");
  return j.get<double>();
}

inline std::int64_t as_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw schema_error(path, "expected an integer");
  return j.get<std::int64_t>();
}

inline Vector as_vector(const json& j, const std::string& path) {
  if (!j.is_array()) throw schema_error(path, "expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = as_number(j[i], path + "[" + std::to_string(i) + "]");
  }
  return v;
}

inline Matrix as_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw schema_error(path, "expected a non-empty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const std::string row_path = path + "[" + std::to_string(r) + "]";
    const Vector row = as_vector(j[r], row_path);
    if (static_cast<std::size_t>(row.size()) != cols || cols == 0) {
      throw schema_error(row_path, "rows must be non-empty and of equal length");
    }
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

inline BuiltinModel parse_model(const json& j) {
  const std::string path = "model";
  if (!j.is_object()) throw schema_error(path, "expected an object");
  reject_unknown_keys(j, path, {"name", "dim", "sigma", "F", "c", "drift_split", "bound",
                                "ellipticity_bound"});
  BuiltinModel m;
  const json& name = require(j, "name", path);
  if (!name.is_string()) throw schema_error("model.name", "expected a string");
  m.name = name.get<std::string>();
  m.dim = static_cast<int>(as_integer(require(j, "dim", path), "model.dim"));
  if (j.contains("sigma")) {
    const json& s = j.at("sigma");
    if (s.is_array() && !s.empty() && s[0].is_number()) {
      m.sigma = as_vector(s, "model.sigma").asDiagonal();
    } else {
      m.sigma = as_matrix(s, "model.sigma");
    }
  }
  if (j.contains("F")) m.F = as_vector(j.at("F"), "model.F");
  if (j.contains("c")) m.c = as_vector(j.at("c"), "model.c");
  if (j.contains("drift_split")) {
    if (!j.at("drift_split").is_boolean()) throw schema_error("model.drift_split", "expected a boolean");
    m.drift_split = j.at("drift_split").get<bool>();
  }
  if (j.contains("bound")) m.split_bound = as_number(j.at("bound"), "model.bound");
  if (j.contains("ellipticity_bound")) {
    m.ellipticity_bound = as_number(j.at("ellipticity_bound"), "model.ellipticity_bound");
  }
  try {
    return detail::normalize(m);
  } catch (const Error& e) {
    throw e.at(path);
  }
}

inline ObservationSet parse_observations(const json& j, int dim) {
  if (!j.is_array()) throw schema_error("observations", "expected an array");
  ObservationSet obs;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const std::string path = "observations[" + std::to_string(k) + "]";
    const json& item = j[k];
    if (!item.is_object()) throw schema_error(path, "expected an object");
    reject_unknown_keys(item, path, {"time", "matrix", "value", "window", "anchor"});
    Observation o;
    o.time = as_number(require(item, "time", path), path + ".time");
    o.matrix = as_matrix(require(item, "matrix", path), path + ".matrix");
    o.value = as_vector(require(item, "value", path), path + ".value");
    if (item.contains("window")) o.window = as_number(item.at("window"), path + ".window");
    if (item.contains("anchor")) o.anchor = as_vector(item.at("anchor"), path + ".anchor");
    obs.items.push_back(std::move(o));
  }
  try {
    return validate(obs, dim);
  } catch (const Error& e) {
    throw e.at("observations");
  }
}

inline FunctionalSpec parse_functional(const json& j, const std::string& path, int dim) {
  if (!j.is_object()) throw schema_error(path, "expected an object");
  reject_unknown_keys(j, path, {"type", "time", "index"});
  FunctionalSpec f;
  const json& type = require(j, "type", path);
  const std::string name = type.is_string() ? type.get<std::string>() : "";
  if (name == "coordinate") {
    f.type = FunctionalType::Coordinate;
  } else if (name == "marginal_mean") {
    f.type = FunctionalType::MarginalMean;
  } else if (name == "marginal_var") {
    f.type = FunctionalType::MarginalVar;
  } else {
    throw schema_error(path + ".type", "expected coordinate, marginal_mean or marginal_var");
  }
  f.time = as_number(require(j, "time", path), path + ".time");
  f.index = j.contains("index") ? static_cast<int>(as_integer(j.at("index"), path + ".index")) : 0;
  if (f.index < 0 || f.index >= dim) throw schema_error(path + ".index", "coordinate index out of range");
  return f;
}

}  // namespace detail

/// Parses and fully validates a configuration. Errors carry the JSON path
/// of the offending field in `Error::field()`.
inline RunConfig parse_config(const std::string& text) {
  using detail::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::InvalidConfiguration, std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw detail::schema_error("", "configuration must be a JSON object");
  detail::reject_unknown_keys(doc, "", {"schema_version", "model", "initial_state", "observations",
                                        "grid", "n_paths", "seed", "threads", "validate",
                                        "functionals", "outputs"});

  RunConfig cfg;
  cfg.schema_version =
      static_cast<int>(detail::as_integer(detail::require(doc, "schema_version", ""), "schema_version"));
  if (cfg.schema_version != 1) {
    throw detail::schema_error("schema_version", "unsupported schema version");
  }
  cfg.model = detail::parse_model(detail::require(doc, "model", ""));
  const auto n = static_cast<Eigen::Index>(cfg.model.dim);
  cfg.initial_state = doc.contains("initial_state")
                          ? detail::as_vector(doc.at("initial_state"), "initial_state")
                          : Vector(Vector::Zero(n));
  if (cfg.initial_state.size() != n) {
    throw detail::schema_error("initial_state", "length must equal model.dim");
  }
  cfg.observations = detail::parse_observations(detail::require(doc, "observations", ""), cfg.model.dim);

  const json& grid = detail::require(doc, "grid", "");
  if (!grid.is_object()) throw detail::schema_error("grid", "expected an object");
  detail::reject_unknown_keys(grid, "grid", {"horizon", "dt_base", "dt_min", "refine_ratio"});
  cfg.horizon = grid.contains("horizon") ? detail::as_number(grid.at("horizon"), "grid.horizon")
                                         : cfg.observations.last_time();
  cfg.grid.dt_base = detail::as_number(detail::require(grid, "dt_base", "grid"), "grid.dt_base");
  if (grid.contains("dt_min")) cfg.grid.dt_min = detail::as_number(grid.at("dt_min"), "grid.dt_min");
  if (grid.contains("refine_ratio")) {
    cfg.grid.refine_ratio = detail::as_number(grid.at("refine_ratio"), "grid.refine_ratio");
  }

  const auto n_paths = detail::as_integer(detail::require(doc, "n_paths", ""), "n_paths");
  if (n_paths < 1) throw detail::schema_error("n_paths", "must be >= 1");
  cfg.n_paths = static_cast<std::size_t>(n_paths);
  const auto seed = detail::as_integer(detail::require(doc, "seed", ""), "seed");
  if (seed < 0) throw detail::schema_error("seed", "must be non-negative");
  cfg.seed = static_cast<std::uint64_t>(seed);
  if (doc.contains("threads")) {
    const auto threads = detail::as_integer(doc.at("threads"), "threads");
    if (threads < 1) throw detail::schema_error("threads", "must be >= 1");
    cfg.threads = static_cast<unsigned>(threads);
  }
  if (doc.contains("validate")) {
    if (!doc.at("validate").is_boolean()) throw detail::schema_error("validate", "expected a boolean");
    cfg.validate = doc.at("validate").get<bool>();
  }

  if (doc.contains("functionals")) {
    const json& fs = doc.at("functionals");
    if (!fs.is_array()) throw detail::schema_error("functionals", "expected an array");
    for (std::size_t i = 0; i < fs.size(); ++i) {
      cfg.functionals.push_back(detail::parse_functional(
          fs[i], "functionals[" + std::to_string(i) + "]", cfg.model.dim));
    }
  }
  if (doc.contains("outputs")) {
    const json& out = doc.at("outputs");
    if (!out.is_object()) throw detail::schema_error("outputs", "expected an object");
    detail::reject_unknown_keys(out, "outputs", {"report", "ensemble_csv"});
    for (const char* key : {"report", "ensemble_csv"}) {
      if (!out.contains(key)) continue;
      if (!out.at(key).is_string()) {
        throw detail::schema_error(std::string("outputs.") + key, "expected a path string");
      }
      (key == std::string("report") ? cfg.outputs.report : cfg.outputs.ensemble_csv) =
          out.at(key).get<std::string>();
    }
  }

  try {
    make_grid(cfg);
  } catch (const Error& e) {
    throw e.at("grid");
  }
  cfg.canonical = doc.dump();
  return cfg;
}

}  // namespace bridgesim
