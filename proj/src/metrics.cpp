#include "stablesim/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "stablesim/errors.hpp"
#include "stablesim/risk.hpp"

namespace stablesim {

std::vector<double> peg_series(std::span<const MarketState> states) {
  std::vector<double> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(s.peg_deviation);
  return out;
}

std::vector<double> liquidity_series(std::span<const MarketState> states) {
  std::vector<double> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(s.pool_liquidity);
  return out;
}

double peak_deviation(std::span<const double> peg) {
  double peak = 0.0;
  for (double d : peg) peak = std::max(peak, std::abs(d));
  return peak;
}

double peak_deviation(std::span<const MarketState> states) {
  return peak_deviation(peg_series(states));
}

std::optional<int> recovery_time(std::span<const double> peg, int shock_step, double epsilon) {
  if (shock_step < 0 || static_cast<std::size_t>(shock_step) >= peg.size()) {
    throw InvalidInput("shock step outside the trajectory");
  }
  for (std::size_t t = static_cast<std::size_t>(shock_step) + 1; t < peg.size(); ++t) {
    if (std::abs(peg[t]) < epsilon) return static_cast<int>(t) - shock_step;
  }
  return std::nullopt;
}

std::optional<int> recovery_time(std::span<const MarketState> states, int shock_step,
                                 double epsilon) {
  return recovery_time(peg_series(states), shock_step, epsilon);
}

int bad_debt(std::span<const MarketState> states) {
  return static_cast<int>(std::count_if(states.begin(), states.end(), [](const MarketState& s) {
    return s.collateral_value < s.stablecoin_supply;
  }));
}

int bad_debt(std::span<const double> collateral_value, std::span<const double> supply) {
  if (collateral_value.size() != supply.size()) throw InvalidInput("series differ in length");
  int count = 0;
  for (std::size_t t = 0; t < supply.size(); ++t) count += collateral_value[t] < supply[t];
  return count;
}

double liquidity_retention(std::span<const double> liquidity, int shock_step) {
  if (shock_step < 1 || static_cast<std::size_t>(shock_step) > liquidity.size()) {
    throw InvalidInput("liquidity retention needs 1 <= t_s <= trajectory length");
  }
  const double before = liquidity[static_cast<std::size_t>(shock_step) - 1];
  if (!(before > 0.0)) throw UndefinedValue("zero pre-shock liquidity");
  return liquidity.back() / before;
}

double liquidity_retention(std::span<const MarketState> states, int shock_step) {
  return liquidity_retention(liquidity_series(states), shock_step);
}

RunMetrics compute_run_metrics(std::span<const MarketState> states, int shock_step, double epsilon) {
  RunMetrics m;
  m.peak_deviation = peak_deviation(states);
  m.recovery = recovery_time(states, shock_step, epsilon);
  m.bad_debt = bad_debt(states);
  m.liquidity_retention = liquidity_retention(states, shock_step);
  return m;
}

SecuritySummary security_summary(std::span<const LabeledTrust> windows, double threshold) {
  SecuritySummary out;
  int adv = 0, ben = 0, tp = 0, fp = 0;
  double influence = 0.0, fraction = 0.0;
  for (const auto& w : windows) {
    if (w.reports.size() != w.labels.size()) throw InvalidInput("labels must align with reports");
    if (w.reports.empty()) continue;
    std::vector<double> scores;
    int n_adv = 0;
    for (std::size_t i = 0; i < w.reports.size(); ++i) {
      scores.push_back(w.reports[i].score);
      const bool flagged = w.reports[i].score < threshold;
      if (w.labels[i]) {
        ++adv;
        ++n_adv;
        tp += flagged;
      } else {
        ++ben;
        fp += flagged;
      }
    }
    influence += adversarial_influence(scores, w.labels);
    fraction += static_cast<double>(n_adv) / static_cast<double>(w.reports.size());
    ++out.windows;
  }
  if (out.windows == 0) return out;
  out.tpr = adv ? static_cast<double>(tp) / adv : 0.0;
  out.fpr = ben ? static_cast<double>(fp) / ben : 0.0;
  out.mean_influence = influence / out.windows;
  out.mean_fraction = fraction / out.windows;
  out.influence_reduction = out.mean_fraction > 0.0 ? 1.0 - out.mean_influence / out.mean_fraction : 0.0;
  return out;
}

PairedComparison compare_paired(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("paired samples differ in length");
  PairedComparison c;
  c.pairs = static_cast<int>(a.size());
  if (a.empty()) return c;
  for (std::size_t i = 0; i < a.size(); ++i) {
    c.wins += a[i] < b[i];
    c.mean_a += a[i];
    c.mean_b += b[i];
  }
  c.win_fraction = static_cast<double>(c.wins) / c.pairs;
  c.mean_a /= c.pairs;
  c.mean_b /= c.pairs;
  return c;
}

double mean_recovery(std::span<const std::optional<int>> recoveries, int censor) {
  if (recoveries.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : recoveries) sum += r ? *r : censor;
  return sum / static_cast<double>(recoveries.size());
}

}  // namespace stablesim
