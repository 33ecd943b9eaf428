#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stablesim/agents.hpp"
#include "stablesim/market.hpp"
#include "stablesim/optimizer.hpp"
#include "stablesim/risk.hpp"
#include "stablesim/trust.hpp"

namespace stablesim {

enum class Method { MVFComposer, MVFNoTrust, SAS, Static6040, Unconstrained };

std::string to_string(Method m);
Method method_from_string(const std::string& s);
const std::vector<Method>& all_methods();

struct StressConfig {
  int n_runs = 8;
  int horizon = 20;
  double drawdown_min = 0.05;
  double drawdown_max = 0.15;
  double sentiment_target = -0.8;
  double withdrawal_max = 0.25;
  int jobs = 1;

  void validate() const;
};

struct ControllerConfig {
  Method method = Method::MVFComposer;
  double risk_aversion = 2.5;
  double turnover_limit = 0.15;
  double weight_min = 0.05;
  double weight_max = 0.60;
  Vector expected_returns;  // per step; empty means zero
  int horizon = 100;
  int epoch_length = 10;
  StressConfig stress;
  TrustParams trust;
  double epsilon = 0.01;

  bool force_uniform_trust = false;
  std::optional<double> force_alpha;

  void validate(std::size_t n_assets) const;
  PortfolioProblem problem(const Matrix& covariance, const Vector& prev_weights) const;
};

struct EpochResult {
  int epoch = 0;
  int step = 0;
  Vector weights;
  double risk_state = 0.0;
  double alpha = 0.0;
  std::vector<TrustReport> trust_reports;
  RiskState risk;
  Solution solution;
  double stress_trace_ratio = 0.0;
  bool stress_fallback = false;
  double wall_time = 0.0;
};

/// Produces per-run (observations x assets) return matrices for a stress episode starting at
/// `state`. Implementations may throw; the epoch then falls back to the historical matrix.
using StressHarness = std::function<std::vector<Matrix>(const MarketState& state, std::uint64_t seed)>;

/// Default harness: clones the population, applies a randomized Black-Thursday-like shock at the
/// first step and records asset returns over the stress horizon.
StressHarness make_stress_harness(const MarketModel& model, const Population& population,
                                  const StressConfig& stress, const BehaviorParams& behavior);

std::vector<Matrix> run_stress_scenarios(const MarketModel& model, const MarketState& state,
                                         const Population& population, const StressConfig& stress,
                                         std::uint64_t seed);

/// Everything an epoch observes. `window` holds the records strictly before the epoch step.
struct EpochInputs {
  int epoch = 0;
  const MarketState* state = nullptr;
  const TrustWindow* window = nullptr;  // null or empty before any records exist
  StressHarness harness;
  double max_qty = 1.0e4;
  double impact = 0.5;
};

/// Simulate, Score, Aggregate, Blend, Optimize. The caller executes the returned weights.
EpochResult run_epoch(const ControllerConfig& config, const Matrix& hist_cov,
                      const Vector& prev_weights, std::uint64_t seed, const EpochInputs& inputs);

struct SimulationConfig {
  MarketParams market = MarketParams::defaults();
  PopulationSpec population;
  ControllerConfig controller;
  Matrix hist_cov;  // empty means the calm covariance of the market

  const Matrix& historical() const { return hist_cov.size() ? hist_cov : market.calm_covariance; }
  void validate() const;
};

struct Trajectory {
  std::vector<MarketState> states;                // horizon + 1 snapshots, after rebalancing
  std::vector<std::vector<AgentRecord>> records;  // one row per step
  std::vector<EpochResult> epochs;
  std::vector<AgentId> agents;
};

/// Closed loop: agents act on each step, the controller rebalances at every epoch boundary.
Trajectory run_trajectory(const SimulationConfig& config, const ShockSpec& shock, std::uint64_t seed,
                          const std::optional<StressHarness>& harness_override = std::nullopt);

/// The last `window` steps of records before `step`, arranged per agent.
TrustWindow trailing_window(const Trajectory& trajectory, int step, int window, double impact);

}  // namespace stablesim
