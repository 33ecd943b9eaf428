#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stablesim/config.hpp"
#include "stablesim/io.hpp"
#include "stablesim/metrics.hpp"

namespace stablesim {

/// Outcome of one (method, shock, run) trajectory.
struct RunRecord {
  int run_id = 0;
  bool failed = false;
  std::string error;
  RunMetrics metrics;
  std::vector<LabeledTrust> trust;
};

struct CellResult {
  Method method = Method::MVFComposer;
  ShockKind shock = ShockKind::Normal;
  std::vector<RunRecord> runs;

  int failures() const;
  MetricsRow metrics_row(int horizon, int shock_step) const;
  SecuritySummary security(double threshold) const;
};

struct BatchResult {
  std::vector<CellResult> cells;
  int failures = 0;

  const CellResult* find(Method method, ShockKind shock) const;
};

struct BatchOptions {
  std::optional<std::string> out_dir;  // nothing is written when empty
  std::ostream* log = nullptr;
};

/// Every (method, shock) cell for runs 0..n-1 with seed base + run_id, so methods are paired.
BatchResult run_batch(const AppConfig& config, const BatchOptions& options = {});

/// Deterministic summary: no timings, no paths.
nlohmann::json summary_json(const AppConfig& config, const BatchResult& result);

/// Writes the per-run artifacts and summary.json; returns 0 unless every run failed.
int cmd_run(const AppConfig& config, const std::string& out_dir, std::ostream& log);

const std::vector<std::string>& sweep_parameters();
/// Applies `value` for the named parameter; throws ConfigError for unknown names.
void apply_sweep_value(AppConfig& config, const std::string& parameter, double value);

/// One cmd_run per value, aggregated into out_dir/sweep_<parameter>.csv.
int cmd_sweep(const AppConfig& config, const std::string& parameter,
              const std::vector<double>& values, const std::string& out_dir, std::ostream& log);

}  // namespace stablesim
