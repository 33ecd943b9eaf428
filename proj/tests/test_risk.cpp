#include <doctest.h>

#include <sstream>

#include "stablesim/risk.hpp"

using namespace stablesim;

namespace {

AgentRecord record(double panic, double quantity) {
  AgentRecord r;
  r.panic_level = panic;
  r.quantity = quantity;
  r.action_type = quantity > 0 ? ActionType::Sell : (quantity < 0 ? ActionType::Buy : ActionType::Hold);
  return r;
}

Matrix random_psd(Rng& rng, Eigen::Index n) {
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = 2.0 * uniform01(rng) - 1.0;
  return a * a.transpose();
}

}  // namespace

TEST_CASE("per-agent risk state") {
  CHECK(agent_risk_state(record(0, 0), 1000, 0.0) == 0.0);
  CHECK(agent_risk_state(record(1, 1000), 1000, 0.01) == 1.0);
  CHECK(agent_risk_state(record(1, 5000), 1000, 0.5) == 1.0);
  CHECK(agent_risk_state(record(0.6, 300), 1000, 0.009) == doctest::Approx(0.6));
  CHECK(agent_risk_state(record(0.6, -300), 1000, -0.009) == doctest::Approx(0.3));
  CHECK_THROWS_AS(agent_risk_state(record(0, 0), 0.0, 0.0), InvalidInput);
}

TEST_CASE("trust-weighted aggregate") {
  CHECK(aggregate_risk({0.2, 0.8}, {0.75, 0.25}) == doctest::Approx(0.35));
  CHECK(aggregate_risk({0.2, 0.4, 0.9}, {1.0, 1.0, 1.0}) == doctest::Approx(0.5));
  CHECK(aggregate_risk({0.42}, {0.3}) == doctest::Approx(0.42));
  CHECK_THROWS_AS(aggregate_risk(std::vector<double>{}, std::vector<double>{}), UndefinedValue);
  CHECK_THROWS_AS(aggregate_risk({0.1, 0.2}, {1.0}), InvalidInput);
  CHECK_THROWS_AS(aggregate_risk({0.1, 0.2}, {1.0, 0.0}), InvalidInput);
}

TEST_CASE("aggregate is a convex combination") {
  Rng rng(5);
  for (int k = 0; k < 1000; ++k) {
    const int n = 1 + static_cast<int>(uniform01(rng) * 20);
    std::vector<double> r(static_cast<std::size_t>(n)), t(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      r[static_cast<std::size_t>(i)] = uniform01(rng);
      t[static_cast<std::size_t>(i)] = 1e-3 + uniform01(rng);
    }
    const double agg = aggregate_risk(r, t);
    REQUIRE(agg >= *std::min_element(r.begin(), r.end()) - 1e-15);
    REQUIRE(agg <= *std::max_element(r.begin(), r.end()) + 1e-15);
  }
}

TEST_CASE("adversarial influence and its bound") {
  std::vector<double> trust;
  std::vector<bool> labels;
  for (int i = 0; i < 2; ++i) trust.push_back(0.35), labels.push_back(true);
  for (int i = 0; i < 8; ++i) trust.push_back(0.75), labels.push_back(false);
  CHECK(influence_bound(0.2, 0.35, 0.75) == doctest::Approx(0.07 / 0.67).epsilon(1e-12));
  CHECK(influence_bound(0.2, 0.35, 0.75) == doctest::Approx(0.1045).epsilon(1e-3));
  CHECK(adversarial_influence(trust, labels) == doctest::Approx(0.07 / 0.67).epsilon(1e-12));

  std::vector<double> sybil(5, 0.31);
  std::vector<bool> sybil_labels(5, true);
  for (int i = 0; i < 10; ++i) sybil.push_back(0.75), sybil_labels.push_back(false);
  CHECK(adversarial_influence(sybil, sybil_labels) == doctest::Approx(1.55 / 9.05).epsilon(1e-12));
  CHECK(adversarial_influence(sybil, sybil_labels) == doctest::Approx(0.1713).epsilon(1e-3));

  CHECK(adversarial_influence(std::vector<double>{0.5, 0.6}, {false, false}) == 0.0);
}

TEST_CASE("influence stays below the group-mean bound") {
  Rng rng(6);
  for (int k = 0; k < 1000; ++k) {
    const int n_adv = 1 + static_cast<int>(uniform01(rng) * 5);
    const int n_ben = 1 + static_cast<int>(uniform01(rng) * 15);
    std::vector<double> t;
    std::vector<bool> labels;
    double sum_adv = 0.0, sum_ben = 0.0;
    for (int i = 0; i < n_adv; ++i) {
      t.push_back(0.05 + 0.5 * uniform01(rng));
      sum_adv += t.back();
      labels.push_back(true);
    }
    for (int i = 0; i < n_ben; ++i) {
      t.push_back(0.3 + 0.65 * uniform01(rng));
      sum_ben += t.back();
      labels.push_back(false);
    }
    const double rho = static_cast<double>(n_adv) / (n_adv + n_ben);
    const double bound = influence_bound(rho, sum_adv / n_adv, sum_ben / n_ben);
    REQUIRE(adversarial_influence(t, labels) <= bound + 1e-12);
    if (sum_adv / n_adv < sum_ben / n_ben) REQUIRE(adversarial_influence(t, labels) < rho);
  }
}

TEST_CASE("stress covariance from runs") {
  Matrix run(4, 2);
  run << 1, -1, -1, 1, 1, -1, -1, 1;
  const Matrix c = estimate_stress_covariance(std::vector<Matrix>{run});
  Matrix expected(2, 2);
  expected << 4.0 / 3.0, -4.0 / 3.0, -4.0 / 3.0, 4.0 / 3.0;
  CHECK(c.isApprox(expected, 1e-14));

  const Matrix flat = Matrix::Constant(5, 3, 0.01);
  CHECK(estimate_stress_covariance(std::vector<Matrix>{flat, flat}).isZero(0.0));

  Rng rng(3);
  Matrix a(10, 3), b(10, 3);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = uniform01(rng), b.data()[i] = uniform01(rng);
  const Matrix mean = estimate_stress_covariance(std::vector<Matrix>{a, b});
  CHECK(mean.isApprox(0.5 * (sample_covariance(a) + sample_covariance(b)), 1e-14));
  CHECK(min_eigenvalue(mean) >= -1e-12);

  CHECK_THROWS_AS(estimate_stress_covariance(std::vector<Matrix>{Matrix::Zero(1, 2)}), InvalidInput);
  CHECK_THROWS_AS(estimate_stress_covariance(std::vector<Matrix>{}), InvalidInput);
}

TEST_CASE("quadratic blend coefficient") {
  CHECK(blend_alpha(0.0) == 0.0);
  CHECK(blend_alpha(1.0) == 1.0);
  CHECK(blend_alpha(0.5) == 0.25);
  CHECK(blend_alpha_derivative(0.5) == 1.0);
  CHECK_THROWS_AS(blend_alpha(1.1), InvalidInput);
  CHECK_THROWS_AS(blend_alpha(-0.1), InvalidInput);
}

TEST_CASE("covariance blending") {
  const Matrix h = Matrix::Identity(3, 3);
  const Matrix s = 7.17 * Matrix::Identity(3, 3);
  CHECK(blend_covariance(h, s, 0.0).blended == h);
  CHECK(blend_covariance(h, s, 1.0).blended == s);
  CHECK(blend_covariance(h, s, 0.5).blended.isApprox(4.085 * Matrix::Identity(3, 3), 1e-14));
  CHECK(blend(h, s, 0.5).isApprox(4.085 * Matrix::Identity(3, 3), 1e-14));

  CHECK_THROWS_AS(blend_covariance(h, Matrix::Identity(2, 2), 0.5), InvalidInput);
  Matrix indefinite = Matrix::Identity(3, 3);
  indefinite(0, 0) = -1.0;
  CHECK_THROWS_AS(blend_covariance(h, indefinite, 0.5), InvalidInput);
  Matrix asymmetric = Matrix::Identity(3, 3);
  asymmetric(0, 1) = 0.1;
  CHECK_THROWS_AS(blend_covariance(asymmetric, h, 0.5), InvalidInput);
}

TEST_CASE("blend stays PSD within Weyl bounds") {
  Rng rng(4);
  for (int k = 0; k < 500; ++k) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(uniform01(rng) * 5);
    const Matrix h = random_psd(rng, n), s = random_psd(rng, n);
    const double a = uniform01(rng);
    const Matrix b = blend_covariance(h, s, a).blended;
    REQUIRE(is_symmetric(b));
    REQUIRE(min_eigenvalue(b) >= -1e-10);
    REQUIRE(min_eigenvalue(b) >= (1 - a) * min_eigenvalue(h) + a * min_eigenvalue(s) - 1e-10);
    REQUIRE(max_eigenvalue(b) <= (1 - a) * max_eigenvalue(h) + a * max_eigenvalue(s) + 1e-10);
  }
}

TEST_CASE("fragility ratio") {
  const Matrix h = Matrix::Identity(2, 2);
  Matrix s(2, 2);
  s << 12, 0, 0, 1;
  CHECK(fragility_ratio(Eigen::Vector2d(1, 0), h, s) == doctest::Approx(12.0));
  CHECK(fragility_ratio(Eigen::Vector2d(0.3, 0.7), h, h) == doctest::Approx(1.0));
  CHECK(rayleigh_bound(h, s) == doctest::Approx(12.0));
  CHECK_THROWS_AS(fragility_ratio(Eigen::Vector2d(1, 0), Matrix::Zero(2, 2), s), UndefinedValue);

  Rng rng(9);
  for (int k = 0; k < 500; ++k) {
    const Matrix hh = random_psd(rng, 4) + 0.01 * Matrix::Identity(4, 4);
    const Matrix ss = random_psd(rng, 4);
    Vector w(4);
    for (Eigen::Index i = 0; i < 4; ++i) w[i] = uniform01(rng);
    w /= w.sum();
    REQUIRE(fragility_ratio(w, hh, ss) <= rayleigh_bound(hh, ss) * (1 + 1e-10));
  }
}

TEST_CASE("risk state from windows") {
  std::vector<std::vector<AgentRecord>> windows = {{record(0.6, 3000), record(0.6, 3000)},
                                                   {record(0.0, 0.0), record(0.0, 0.0)}};
  const std::vector<double> liquidity = {1e6, 1e6};
  // Peg contribution 0.5 * 3000 / 1e6 = 0.0015 against epsilon 0.01.
  const RiskState rs = compute_risk_state(windows, liquidity, std::vector<double>{0.5, 0.5}, 10000, 0.5);
  REQUIRE(rs.per_agent.size() == 2);
  CHECK(rs.per_agent[0] == doctest::Approx((0.6 + 0.3 + 0.15) / 3.0));
  CHECK(rs.per_agent[1] == 0.0);
  CHECK(rs.aggregate == doctest::Approx(0.5 * rs.per_agent[0]));
}

TEST_CASE("covariance csv round trip") {
  Matrix m(2, 2);
  m << 1.0e-4, 2.5e-5, 2.5e-5, 3.1e-4;
  std::stringstream buf;
  write_covariance_csv(buf, m, {"USDC", "DAI"});
  std::vector<std::string> names;
  const Matrix back = read_covariance_csv(buf, &names);
  CHECK(back == m);
  CHECK(names == std::vector<std::string>{"USDC", "DAI"});

  std::stringstream bad("a,b\n1,2\n");
  CHECK_THROWS_AS(read_covariance_csv(bad), InvalidInput);
}
