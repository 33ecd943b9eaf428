#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "stablesim/config.hpp"

namespace stablesim {

struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
  double budget_seconds = 0.0;
};

struct VerifyOptions {
  AppConfig config = AppConfig::defaults();
  int runs = 100;  // per cell for the simulation checks
  int determinism_runs = 4;
  std::vector<int> only;  // empty runs every check
};

CheckResult check_trust_arithmetic(const TrustParams& params);
CheckResult check_influence_bounds();
CheckResult check_trust_properties(const TrustParams& params, std::uint64_t seed);
CheckResult check_risk_properties(std::uint64_t seed);
CheckResult check_optimizer_oracles(std::uint64_t seed);
CheckResult check_recovery_oracle(std::uint64_t seed);
/// Checks 7 and 8 share one batch of paired runs.
std::vector<CheckResult> check_simulation(const AppConfig& config, int runs);
CheckResult check_baseline_reduction(const AppConfig& config);
CheckResult check_determinism(const AppConfig& config, int runs);

std::vector<CheckResult> run_acceptance(const VerifyOptions& options, std::ostream* progress = nullptr);

/// One line per check.
std::string format_check(const CheckResult& r);

/// Prints the table; returns 0 iff every check passed.
int cmd_verify(const VerifyOptions& options, std::ostream& out);

}  // namespace stablesim
