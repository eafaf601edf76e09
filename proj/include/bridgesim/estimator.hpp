#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <span>
#include <thread>
#include <vector>

#include "bridgesim/bridge.hpp"
#include "bridgesim/error.hpp"
#include "bridgesim/grid.hpp"
#include "bridgesim/model.hpp"
#include "bridgesim/observation.hpp"
#include "bridgesim/path.hpp"
#include "bridgesim/weights.hpp"

namespace bridgesim {

using PathFunctional = std::function<double(const PathSample&)>;

/// Value of coordinate `index` at grid time `t`.
inline PathFunctional coordinate_at(double t, Eigen::Index index) {
  return [t, index](const PathSample& p) { return p.states(index, p.grid->index_of(t)); };
}

struct EnsembleOptions {
  /// Worker threads; 0 uses the hardware concurrency.
  unsigned threads = 0;
  bool keep_paths = false;
  bool validate = false;
  /// Evaluated on every successful path; stored row-wise in `values`.
  std::vector<PathFunctional> functionals;
  /// Maximum tolerated fraction of aborted paths.
  double max_failure_fraction = 0.01;
};

/// Successful bridge paths of a run with their log-weights. Rows are in
/// increasing path_id order regardless of scheduling.
struct WeightedEnsemble {
  std::vector<std::uint64_t> path_ids;
  std::vector<double> log_weights;
  std::vector<LogWeightBreakdown> breakdowns;
  /// values(i, f) = functionals[f](path i)
  Matrix values;
  std::vector<PathSample> paths;
  std::uint64_t config_digest = 0;
  std::size_t n_requested = 0;
  std::size_t n_failed = 0;

  std::size_t size() const { return log_weights.size(); }
};

struct EstimateReport {
  std::vector<double> value;
  std::vector<double> std_error;
  double ess = 0.0;
  std::size_t n_paths = 0;
  std::size_t n_failed = 0;
};

/// Simulates paths 0..n-1 of the guided bridge and weights each one. Paths
/// aborted by numerical blowup are dropped and counted; any other error is
/// rethrown (the one from the lowest path id).
inline WeightedEnsemble run_ensemble(const ModelSpec& model, const ObservationSet& obs,
                                     std::shared_ptr<const TimeGrid> grid, const Vector& u,
                                     std::size_t n, std::uint64_t seed,
                                     const EnsembleOptions& options = {}) {
  if (n < 1) throw Error(ErrorKind::InvalidConfiguration, "need at least one path");

  struct Slot {
    bool ok = false;
    bool failed = false;
    std::exception_ptr error;
    LogWeightBreakdown breakdown;
    std::vector<double> values;
    PathSample path;
  };
  std::vector<Slot> slots(n);
  BridgeConfig cfg;
  cfg.validate = options.validate;

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Slot& slot = slots[i];
      try {
        PathSample path = simulate_bridge(model, obs, grid, u, seed, i, cfg);
        slot.breakdown = log_weight(path, model, obs);
        slot.values.reserve(options.functionals.size());
        for (const auto& f : options.functionals) slot.values.push_back(f(path));
        if (options.keep_paths) slot.path = std::move(path);
        slot.ok = true;
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::NumericalBlowup) {
          slot.failed = true;
        } else {
          slot.error = std::current_exception();
        }
      } catch (...) {
        slot.error = std::current_exception();
      }
    }
  };

  unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (threads == 1) {
    work(0, n);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned w = 0; w < threads; ++w) {
      const std::size_t begin = std::min(n, w * chunk);
      const std::size_t end = std::min(n, begin + chunk);
      pool.emplace_back(work, begin, end);
    }
  }

  WeightedEnsemble out;
  out.n_requested = n;
  for (const Slot& slot : slots) {
    if (slot.error) std::rethrow_exception(slot.error);
  }
  std::size_t n_ok = 0;
  for (const Slot& slot : slots) {
    if (slot.failed) ++out.n_failed;
    if (slot.ok) ++n_ok;
  }
  if (static_cast<double>(out.n_failed) > options.max_failure_fraction * static_cast<double>(n)) {
    throw Error(ErrorKind::UnstableRun,
                std::to_string(out.n_failed) + " of " + std::to_string(n) +
                    " paths aborted; check the model coefficients and grid");
  }
  if (n_ok == 0) throw Error(ErrorKind::DegenerateEnsemble, "every path failed");

  out.values.resize(static_cast<Eigen::Index>(n_ok),
                    static_cast<Eigen::Index>(options.functionals.size()));
  for (std::size_t i = 0; i < n; ++i) {
    Slot& slot = slots[i];
    if (!slot.ok) continue;
    const auto row = static_cast<Eigen::Index>(out.log_weights.size());
    for (std::size_t f = 0; f < slot.values.size(); ++f) {
      out.values(row, static_cast<Eigen::Index>(f)) = slot.values[f];
    }
    out.path_ids.push_back(i);
    out.log_weights.push_back(slot.breakdown.total);
    out.breakdowns.push_back(std::move(slot.breakdown));
    if (options.keep_paths) out.paths.push_back(std::move(slot.path));
  }
  return out;
}

struct WeightedStatistic {
  double value = 0.0;
  double std_error = 0.0;
};

/// Self-normalized mean sum w_i f_i with standard error
/// sqrt(sum w_i^2 (f_i - mean)^2). Summation runs in index order.
inline WeightedStatistic weighted_mean(std::span<const double> weights,
                                       std::span<const double> values) {
  WeightedStatistic out;
  if (values.empty()) return out;
  // offsets from the first value keep constant functionals exact
  const double ref = values[0];
  double offset = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) offset += weights[i] * (values[i] - ref);
  out.value = ref + offset;
  double var = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double d = values[i] - out.value;
    var += weights[i] * weights[i] * d * d;
  }
  out.std_error = std::sqrt(var);
  return out;
}

/// Self-normalized variance sum w_i (f_i - mean)^2; its standard error uses
/// the influence values (f_i - mean)^2 - variance.
inline WeightedStatistic weighted_variance(std::span<const double> weights,
                                           std::span<const double> values) {
  const double mean = weighted_mean(weights, values).value;
  std::vector<double> squared(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    squared[i] = (values[i] - mean) * (values[i] - mean);
  }
  return weighted_mean(weights, squared);
}

/// Estimates E[f(x) | observations] for every functional stored in the
/// ensemble.
inline EstimateReport estimate(const WeightedEnsemble& ensemble) {
  const auto norm = normalize_log_weights(ensemble.log_weights);
  EstimateReport out;
  out.ess = norm.ess;
  out.n_paths = ensemble.size();
  out.n_failed = ensemble.n_failed;
  for (Eigen::Index f = 0; f < ensemble.values.cols(); ++f) {
    const Vector column = ensemble.values.col(f);
    const auto stat = weighted_mean(norm.weights, std::span(column.data(), column.size()));
    out.value.push_back(stat.value);
    out.std_error.push_back(stat.std_error);
  }
  return out;
}

/// Estimates E[f(x) | observations] for a functional of retained paths.
inline EstimateReport estimate(const WeightedEnsemble& ensemble, const PathFunctional& f) {
  if (ensemble.paths.size() != ensemble.size()) {
    throw Error(ErrorKind::InvalidConfiguration,
                "ensemble was run without keep_paths; evaluate functionals during the run");
  }
  const auto norm = normalize_log_weights(ensemble.log_weights);
  std::vector<double> values;
  values.reserve(ensemble.size());
  for (const auto& p : ensemble.paths) values.push_back(f(p));
  const auto stat = weighted_mean(norm.weights, values);
  return EstimateReport{{stat.value}, {stat.std_error}, norm.ess, ensemble.size(),
                        ensemble.n_failed};
}

}  // namespace bridgesim
