#include <doctest.h>

#include <cmath>
#include <sstream>

#include "stablesim/io.hpp"
#include "stablesim/metrics.hpp"

using namespace stablesim;

namespace {

std::vector<double> decay(double start, double gamma, int steps) {
  std::vector<double> out(static_cast<std::size_t>(steps) + 1);
  out[0] = start;
  for (int k = 1; k <= steps; ++k) out[static_cast<std::size_t>(k)] = out[static_cast<std::size_t>(k) - 1] * std::exp(-gamma);
  return out;
}

LabeledTrust population(const std::vector<double>& adv, const std::vector<double>& ben) {
  LabeledTrust w;
  for (double s : adv) {
    TrustReport r;
    r.score = s;
    w.reports.push_back(r);
    w.labels.push_back(true);
  }
  for (double s : ben) {
    TrustReport r;
    r.score = s;
    w.reports.push_back(r);
    w.labels.push_back(false);
  }
  return w;
}

}  // namespace

TEST_CASE("peak deviation") {
  CHECK(peak_deviation(std::vector<double>(10, 0.0)) == 0.0);
  CHECK(peak_deviation(std::vector<double>{0.01, -0.074, 0.02}) == 0.074);
}

TEST_CASE("recovery time") {
  CHECK(recovery_time(std::vector<double>{0.05, 0.005, 0.0}, 0) == 1);
  CHECK_FALSE(recovery_time(std::vector<double>{0.05, 0.04, 0.03}, 0).has_value());
  CHECK_THROWS_AS(recovery_time(std::vector<double>{0.0}, 3), InvalidInput);

  // Continuous-rate decay from 0.1 at 0.23 per step.
  CHECK(recovery_time(decay(0.1, 0.23, 30), 0) == 11);
  CHECK(std::ceil(std::log(10.0) / 0.23) == 11);

  // The market's geometric reversion (1 - 0.23 per step) is faster.
  std::vector<double> peg = {0.1};
  for (int k = 0; k < 20; ++k) peg.push_back(peg.back() * 0.77);
  CHECK(recovery_time(peg, 0) == 9);
  CHECK(std::ceil(std::log(10.0) / -std::log(0.77)) == 9);
}

TEST_CASE("recovery matches the exponential closed form") {
  Rng rng(12);
  for (int k = 0; k < 100; ++k) {
    const double start = 0.02 + 0.3 * uniform01(rng);
    const double gamma = 0.05 + 0.5 * uniform01(rng);
    const auto peg = decay(start, gamma, 200);
    const auto measured = recovery_time(peg, 0, 0.01);
    REQUIRE(measured);
    const double closed = std::log(start / 0.01) / gamma;
    REQUIRE(std::abs(*measured - std::ceil(closed)) <= 1.0);
  }
}

TEST_CASE("bad debt counts under-collateralized steps") {
  CHECK(bad_debt(std::vector<double>{1.2, 1.1, 1.0}, std::vector<double>{1.0, 1.0, 1.0}) == 0);
  CHECK(bad_debt(std::vector<double>{0.9, 1.1, 0.8, 0.95}, std::vector<double>{1.0, 1.0, 1.0, 1.0}) == 3);
  CHECK_THROWS_AS(bad_debt(std::vector<double>{1.0}, std::vector<double>{}), InvalidInput);
}

TEST_CASE("liquidity retention") {
  CHECK(liquidity_retention(std::vector<double>{100, 100, 100, 100}, 2) == 1.0);
  CHECK(liquidity_retention(std::vector<double>{100, 100, 70, 50}, 2) == 0.5);
  CHECK_THROWS_AS(liquidity_retention(std::vector<double>{0, 0, 10}, 1), UndefinedValue);
  CHECK_THROWS_AS(liquidity_retention(std::vector<double>{1, 1}, 0), InvalidInput);
}

TEST_CASE("security summary") {
  const std::vector<LabeledTrust> equal = {population({0.5, 0.5}, {0.5, 0.5, 0.5, 0.5})};
  CHECK(security_summary(equal, 0.5).influence_reduction == doctest::Approx(0.0));

  const std::vector<LabeledTrust> worked = {population({0.35, 0.35}, std::vector<double>(8, 0.75))};
  const SecuritySummary w = security_summary(worked, 0.5);
  CHECK(w.mean_influence == doctest::Approx(0.07 / 0.67));
  CHECK(w.influence_reduction == doctest::Approx(1.0 - (0.07 / 0.67) / 0.2));
  CHECK(w.influence_reduction == doctest::Approx(0.48).epsilon(0.01));
  CHECK(w.tpr == 1.0);
  CHECK(w.fpr == 0.0);

  const std::vector<LabeledTrust> sybil = {population(std::vector<double>(5, 0.31), std::vector<double>(10, 0.75))};
  const SecuritySummary s = security_summary(sybil, 0.5);
  CHECK(s.mean_influence == doctest::Approx(1.55 / 9.05));
  CHECK(s.mean_fraction == doctest::Approx(1.0 / 3.0));
  CHECK(s.influence_reduction == doctest::Approx(0.49).epsilon(0.01));
}

TEST_CASE("paired comparison and censored recovery") {
  const PairedComparison c = compare_paired(std::vector<double>{1, 2, 3, 4}, std::vector<double>{2, 2, 4, 5});
  CHECK(c.pairs == 4);
  CHECK(c.wins == 3);
  CHECK(c.win_fraction == 0.75);
  CHECK(c.mean_a == 2.5);
  CHECK(c.mean_b == 3.25);
  CHECK_THROWS_AS(compare_paired(std::vector<double>{1}, std::vector<double>{}), InvalidInput);

  const std::vector<std::optional<int>> rec = {3, std::nullopt, 5};
  CHECK(mean_recovery(rec, 70) == doctest::Approx(26.0));
}

TEST_CASE("metrics recomputed from csv match in memory") {
  const MarketModel model(MarketParams::defaults());
  std::vector<MarketState> states = {model.initial_state(Vector::Constant(4, 0.25))};
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    OrderFlow flow = OrderFlow::zero(4);
    flow.net_sell[t % 4] = 5000.0 * (uniform01(rng) - 0.3);
    flow.lp_withdrawal = t > 30 ? 1000.0 : 0.0;
    flow.minted = -2000.0 * uniform01(rng);
    states.push_back(model.step(states.back(), flow, generate_news(5, t, ShockSpec::black_thursday(30)),
                                ShockSpec::black_thursday(30), MarketNoise::draw(rng, 4)));
  }
  const RunMetrics direct = compute_run_metrics(states, 30);

  std::stringstream csv;
  const auto rows = trajectory_rows(7, states);
  write_trajectory_csv(csv, rows);
  CHECK(csv.str().rfind("run_id,step,peg_deviation,sentiment,liquidity,supply,collateral_value\n", 0) == 0);
  const auto back = read_trajectory_csv(csv);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    REQUIRE(back[i].peg_deviation == rows[i].peg_deviation);
    REQUIRE(back[i].collateral_value == rows[i].collateral_value);
    REQUIRE(back[i].liquidity == rows[i].liquidity);
  }
  const RunMetrics again = compute_run_metrics(back, 30);
  CHECK(again.peak_deviation == direct.peak_deviation);
  CHECK(again.recovery == direct.recovery);
  CHECK(again.bad_debt == direct.bad_debt);
  CHECK(again.liquidity_retention == direct.liquidity_retention);
}

TEST_CASE("malformed trajectory csv is rejected") {
  std::stringstream bad("run_id,step\n1,2\n");
  CHECK_THROWS(read_trajectory_csv(bad));
}

TEST_CASE("summary csv columns") {
  std::stringstream out;
  const std::vector<MetricsRow> rows = {{"SAS", "BlackThursday", 10, 0.08, 17.5, 9, 3.0, 0.6}};
  write_metrics_csv(out, rows);
  std::string header;
  std::getline(out, header);
  CHECK(header == "method,shock,runs,peak_dev,recovery,recovered,bad_debt,liq_ret");
}
