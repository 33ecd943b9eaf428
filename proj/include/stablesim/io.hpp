#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stablesim/controller.hpp"
#include "stablesim/metrics.hpp"

namespace stablesim {

struct TrajectoryRow {
  int run_id = 0;
  int step = 0;
  double peg_deviation = 0.0;
  double sentiment = 0.0;
  double liquidity = 0.0;
  double supply = 0.0;
  double collateral_value = 0.0;
};

std::vector<TrajectoryRow> trajectory_rows(int run_id, std::span<const MarketState> states);

void write_trajectory_csv(std::ostream& out, std::span<const TrajectoryRow> rows);
std::vector<TrajectoryRow> read_trajectory_csv(std::istream& in);

/// Same values as compute_run_metrics on the states the rows came from.
RunMetrics compute_run_metrics(std::span<const TrajectoryRow> rows, int shock_step,
                               double epsilon = 0.01);

void write_trust_header(std::ostream& out);
void write_trust_rows(std::ostream& out, int run_id, std::span<const EpochResult> epochs);

nlohmann::json to_json(const EpochResult& epoch);
void write_epochs_jsonl(std::ostream& out, std::span<const EpochResult> epochs);

struct MetricsRow {
  std::string method;
  std::string shock;
  int runs = 0;
  double peak_dev = 0.0;
  double recovery = 0.0;  // censored mean
  int recovered = 0;
  double bad_debt = 0.0;
  double liq_ret = 0.0;
};

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace stablesim
