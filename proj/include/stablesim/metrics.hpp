#pragma once

#include <optional>
#include <span>
#include <vector>

#include "stablesim/market.hpp"
#include "stablesim/trust.hpp"

namespace stablesim {

double peak_deviation(std::span<const double> peg);
double peak_deviation(std::span<const MarketState> states);

/// Steps after t_s until |peg| first drops below epsilon; nullopt if it never does.
std::optional<int> recovery_time(std::span<const double> peg, int shock_step, double epsilon = 0.01);
std::optional<int> recovery_time(std::span<const MarketState> states, int shock_step,
                                 double epsilon = 0.01);

/// Steps with collateral value below stablecoin supply.
int bad_debt(std::span<const MarketState> states);
int bad_debt(std::span<const double> collateral_value, std::span<const double> supply);

/// Final over pre-shock (t_s - 1) pool liquidity.
double liquidity_retention(std::span<const double> liquidity, int shock_step);
double liquidity_retention(std::span<const MarketState> states, int shock_step);

std::vector<double> peg_series(std::span<const MarketState> states);
std::vector<double> liquidity_series(std::span<const MarketState> states);

struct RunMetrics {
  double peak_deviation = 0.0;
  std::optional<int> recovery;
  int bad_debt = 0;
  double liquidity_retention = 1.0;
};

RunMetrics compute_run_metrics(std::span<const MarketState> states, int shock_step,
                               double epsilon = 0.01);

/// One epoch's trust scores with ground-truth labels.
struct LabeledTrust {
  std::vector<TrustReport> reports;
  std::vector<bool> labels;
};

struct SecuritySummary {
  double tpr = 0.0;
  double fpr = 0.0;
  double mean_influence = 0.0;
  double mean_fraction = 0.0;        // mean adversarial share of agents (uniform influence)
  double influence_reduction = 0.0;  // 1 - mean_influence / mean_fraction
  int windows = 0;
};

/// Pools detection counts over all windows; influence is averaged per window.
SecuritySummary security_summary(std::span<const LabeledTrust> windows, double threshold);

struct PairedComparison {
  int pairs = 0;
  int wins = 0;  // pairs where a < b strictly
  double win_fraction = 0.0;
  double mean_a = 0.0;
  double mean_b = 0.0;
};

PairedComparison compare_paired(std::span<const double> a, std::span<const double> b);

/// Mean recovery with unrecovered runs censored at `censor` steps.
double mean_recovery(std::span<const std::optional<int>> recoveries, int censor);

}  // namespace stablesim
