#pragma once

// Run orchestration behind the command-line tool: simulate, weight,
// estimate, compare with the exact oracle when one exists, and serialize.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bridgesim/config.hpp"
#include "bridgesim/error.hpp"
#include "bridgesim/estimator.hpp"
#include "bridgesim/models.hpp"
#include "bridgesim/oracle.hpp"

#ifndef BRIDGESIM_VERSION
#define BRIDGESIM_VERSION "0.0.0"
#endif

namespace bridgesim {

/// 17 significant digits; round-trips every double.
inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string hex_digest(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Seed and path-count overrides from the command line. They are folded
/// into the canonical text so the digest identifies the effective run.
inline void apply_overrides(RunConfig& cfg, std::optional<std::uint64_t> seed,
                            std::optional<std::size_t> paths) {
  auto doc = nlohmann::json::parse(cfg.canonical);
  if (seed) {
    cfg.seed = *seed;
    doc["seed"] = *seed;
  }
  if (paths) {
    if (*paths < 1) throw Error(ErrorKind::InvalidConfiguration, "n_paths must be >= 1").at("n_paths");
    cfg.n_paths = *paths;
    doc["n_paths"] = *paths;
  }
  cfg.canonical = doc.dump();
}

/// Thread count: explicit request, then the config, then BRIDGESIM_THREADS,
/// then the hardware concurrency.
inline unsigned resolve_threads(const RunConfig& cfg, std::optional<unsigned> requested) {
  if (requested && *requested > 0) return *requested;
  if (cfg.threads) return *cfg.threads;
  if (const char* env = std::getenv("BRIDGESIM_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return 0;
}

struct OracleValue {
  double mean = 0.0;
  double variance = 0.0;
};

/// Exact conditional mean and variance for each functional, or nullopt when
/// the model is not linear-Gaussian.
inline std::optional<std::vector<OracleValue>> oracle_values(const RunConfig& cfg) {
  const auto lm = linear_model(cfg.model, cfg.initial_state);
  if (!lm) return std::nullopt;
  std::vector<OracleValue> out;
  for (const auto& f : cfg.functionals) {
    const double t = f.time;
    const GaussianLaw law = conditional_law(*lm, cfg.observations, std::span(&t, 1));
    out.push_back({law.mean[f.index], law.cov(f.index, f.index)});
  }
  return out;
}

struct RunResult {
  WeightedEnsemble ensemble;
  EstimateReport report;
  nlohmann::json report_json;
  std::string csv;
};

inline std::string ensemble_csv(const WeightedEnsemble& ens, std::size_t n_obs) {
  std::ostringstream os;
  os << "path_id,log_weight";
  for (std::size_t k = 0; k < n_obs; ++k) {
    os << ",log_eta_" << k << ",boundary_" << k << ",drift_" << k << ",dA_" << k << ",covar_" << k;
  }
  os << ",girsanov";
  for (Eigen::Index f = 0; f < ens.values.cols(); ++f) os << ",f" << f;
  os << '\n';
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const LogWeightBreakdown& b = ens.breakdowns[i];
    os << ens.path_ids[i] << ',' << format_double(ens.log_weights[i]);
    for (const auto& t : b.per_observation) {
      os << ',' << format_double(t.log_eta) << ',' << format_double(t.boundary) << ','
         << format_double(t.drift) << ',' << format_double(t.dA) << ','
         << format_double(t.covar);
    }
    os << ',' << format_double(b.girsanov);
    for (Eigen::Index f = 0; f < ens.values.cols(); ++f) {
      os << ',' << format_double(ens.values(static_cast<Eigen::Index>(i), f));
    }
    os << '\n';
  }
  return os.str();
}

/// Runs the configured experiment in memory.
inline RunResult execute(const RunConfig& cfg, unsigned threads = 0) {
  const ModelSpec model = make_model(cfg.model);
  const auto grid = make_grid(cfg);
  if (cfg.validate) validate_model(model, 0.0, cfg.initial_state);

  EnsembleOptions options;
  options.threads = threads;
  options.validate = cfg.validate;
  for (const auto& f : cfg.functionals) {
    options.functionals.push_back(coordinate_at(f.time, f.index));
  }

  RunResult result;
  result.ensemble = run_ensemble(model, cfg.observations, grid, cfg.initial_state, cfg.n_paths,
                                 cfg.seed, options);
  result.ensemble.config_digest = config_digest(cfg);
  const auto norm = normalize_log_weights(result.ensemble.log_weights);
  const auto oracle = oracle_values(cfg);

  EstimateReport& report = result.report;
  report.ess = norm.ess;
  report.n_paths = result.ensemble.size();
  report.n_failed = result.ensemble.n_failed;

  nlohmann::json estimates = nlohmann::json::array();
  for (std::size_t i = 0; i < cfg.functionals.size(); ++i) {
    const FunctionalSpec& f = cfg.functionals[i];
    const Vector column = result.ensemble.values.col(static_cast<Eigen::Index>(i));
    const std::span values(column.data(), static_cast<std::size_t>(column.size()));
    const WeightedStatistic stat = f.type == FunctionalType::MarginalVar
                                       ? weighted_variance(norm.weights, values)
                                       : weighted_mean(norm.weights, values);
    report.value.push_back(stat.value);
    report.std_error.push_back(stat.std_error);

    nlohmann::json entry{{"type", to_string(f.type)}, {"time", f.time}, {"index", f.index},
                         {"value", stat.value}, {"std_error", stat.std_error}};
    if (oracle) {
      const OracleValue& o = (*oracle)[i];
      const double exact = f.type == FunctionalType::MarginalVar ? o.variance : o.mean;
      const double dev = std::abs(stat.value - exact);
      entry["oracle"] = {{"value", exact},
                         {"abs_deviation", dev},
                         {"se_deviation", stat.std_error > 0.0 ? dev / stat.std_error : 0.0}};
    }
    estimates.push_back(entry);
  }

  result.report_json = {
      {"schema_version", 1},
      {"version", BRIDGESIM_VERSION},
      {"config_digest", hex_digest(result.ensemble.config_digest)},
      {"seed", cfg.seed},
      {"n_requested", cfg.n_paths},
      {"n_paths", report.n_paths},
      {"n_failed", report.n_failed},
      {"ess", report.ess},
      {"log_norm", norm.log_norm},
      {"estimates", estimates},
  };
  result.csv = ensemble_csv(result.ensemble, cfg.observations.size());
  return result;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidConfiguration, "cannot open output file " + path);
  out << text;
  if (!out) throw Error(ErrorKind::InvalidConfiguration, "failed writing " + path);
}

/// Runs the experiment and writes the configured report and CSV files.
inline RunResult run(const RunConfig& cfg, unsigned threads = 0) {
  RunResult result = execute(cfg, threads);
  if (cfg.outputs.report) write_text(*cfg.outputs.report, result.report_json.dump(2) + "\n");
  if (cfg.outputs.ensemble_csv) write_text(*cfg.outputs.ensemble_csv, result.csv);
  return result;
}

/// Oracle-only report: exact conditional mean and variance per functional.
inline nlohmann::json oracle_report(const RunConfig& cfg) {
  const auto oracle = oracle_values(cfg);
  if (!oracle) {
    throw Error(ErrorKind::InvalidConfiguration,
                "model '" + cfg.model.name + "' has no exact Gaussian oracle")
        .at("model.name");
  }
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t i = 0; i < cfg.functionals.size(); ++i) {
    const FunctionalSpec& f = cfg.functionals[i];
    entries.push_back({{"type", to_string(f.type)}, {"time", f.time}, {"index", f.index},
                       {"mean", (*oracle)[i].mean}, {"variance", (*oracle)[i].variance}});
  }
  return {{"schema_version", 1}, {"version", BRIDGESIM_VERSION},
          {"config_digest", hex_digest(config_digest(cfg))}, {"oracle", entries}};
}

inline nlohmann::json error_json(const Error& e) {
  nlohmann::json err{{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}};
  if (!e.field().empty()) err["field"] = e.field();
  if (e.step()) err["step"] = *e.step();
  return {{"error", err}};
}

}  // namespace bridgesim
