#include <doctest.h>

#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include "stablesim/errors.hpp"
#include "stablesim/trust.hpp"

using namespace stablesim;

namespace {

std::vector<AgentRecord> window_of(const std::vector<double>& phi, const std::vector<double>& delta) {
  std::vector<AgentRecord> out(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i) {
    out[i].step = static_cast<int>(i);
    out[i].stated_sentiment = phi[i];
    out[i].quantity = -delta[i];
    out[i].action_type = delta[i] > 0 ? ActionType::Buy : (delta[i] < 0 ? ActionType::Sell : ActionType::Hold);
  }
  return out;
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST_CASE("f1 sentiment-action consistency") {
  CHECK(feature_f1(window_of({1, -1, 1, -1}, {1, -1, 1, -1})) == doctest::Approx(1.0));
  CHECK(feature_f1(window_of({0.3, 0.3, 0.3, 0.3}, {1, -1, 2, 0})) == 0.0);
  CHECK(feature_f1(window_of({0.5, -0.5, 0.8, -0.2}, {-0.5, 0.5, -0.8, 0.2})) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(feature_f1(window_of({1}, {1})), InsufficientData);
}

TEST_CASE("f2 profitability or belief alignment") {
  const auto recs = window_of({1, 1, 1, 1, 1, 1, 1, 1, 1, 1}, {-1, -1, -1, -1, -1, -1, -1, -1, -1, -1});
  std::vector<double> pnl(10, 1.0);
  CHECK(feature_f2(recs, pnl) == 1.0);

  std::fill(pnl.begin(), pnl.end(), -1.0);
  CHECK(feature_f2(recs, pnl) == 0.0);

  // Six profitable steps, one aligned loss, three misaligned losses.
  auto mixed = recs;
  mixed[6].stated_sentiment = -1.0;
  for (int s = 0; s < 6; ++s) pnl[static_cast<std::size_t>(s)] = 1.0;
  CHECK(feature_f2(mixed, pnl) == doctest::Approx(0.7));

  CHECK_THROWS_AS(feature_f2(recs, std::vector<double>(9, 0.0)), InvalidInput);
}

TEST_CASE("f2 counts a zero-sentiment hold as aligned") {
  const auto holds = window_of({0, 0, 0}, {0, 0, 0});
  CHECK(feature_f2(holds, std::vector<double>(3, 0.0)) == 1.0);
  const auto mismatch = window_of({0.2, 0.2, 0.2}, {0, 0, 0});
  CHECK(feature_f2(mismatch, std::vector<double>(3, 0.0)) == 0.0);
}

TEST_CASE("f4 action-deviation correlation") {
  // Sells precede every increase of |peg|.
  auto recs = window_of({0, 0, 0, 0}, {-1, 0, -2, 0});
  std::vector<double> peg = {0.0, -0.005, 0.0, -0.015, -0.01};
  CHECK(feature_f4(recs, peg) == doctest::Approx(1.0));

  const auto holds = window_of({0, 0, 0, 0}, {0, 0, 0, 0});
  CHECK(feature_f4(holds, peg) == 0.0);
  CHECK_THROWS_AS(feature_f4(holds, std::vector<double>(4, 0.0)), InsufficientData);
}

TEST_CASE("trust score values") {
  const TrustParams p;
  CHECK(trust_score(Vector4(0.5, 0.5, 1.0, 0.3), p) == doctest::Approx(0.310026).epsilon(1e-6));
  CHECK(trust_score(Vector4(0.5, 0.5, 1.0, 0.3), p) == doctest::Approx(logistic(-0.8)).epsilon(1e-14));
  CHECK(trust_score(Vector4(0, 0, 0, 0), p) == 0.5);
  CHECK(trust_score(Vector4(1, 1, 0, -1), p) == doctest::Approx(logistic(4.0)).epsilon(1e-14));
  CHECK(trust_score(Vector4(1, 1, 0, -1), p) == doctest::Approx(0.9820).epsilon(1e-4));
}

TEST_CASE("trust score is bounded and monotone") {
  const TrustParams p;
  Rng rng(1);
  for (int k = 0; k < 1000; ++k) {
    Vector4 f(2 * uniform01(rng) - 1, uniform01(rng), uniform01(rng), 2 * uniform01(rng) - 1);
    const double t = trust_score(f, p);
    REQUIRE(t > 0.0);
    REQUIRE(t < 1.0);
    for (int i = 0; i < 4; ++i) {
      Vector4 g = f;
      g[i] += 1e-3;
      if (i < 2) {
        REQUIRE(trust_score(g, p) > t);
      } else {
        REQUIRE(trust_score(g, p) < t);
      }
    }
  }
  CHECK(trust_score(Vector4(-1e6, 0, 0, 0), p) >= 0.0);
  CHECK(trust_score(Vector4(1e6, 0, 0, 0), p) <= 1.0);
}

TEST_CASE("weight gradient matches finite differences") {
  const Vector4 w(1.5, 1.5, 2.0, 1.0);
  Rng rng(2);
  for (int k = 0; k < 200; ++k) {
    const Vector4 f(2 * uniform01(rng) - 1, uniform01(rng), uniform01(rng), 2 * uniform01(rng) - 1);
    const Vector4 g = trust_score_gradient(f, w, 0.0);
    for (int i = 0; i < 4; ++i) {
      Vector4 up = w, dn = w;
      up[i] += 1e-6;
      dn[i] -= 1e-6;
      const double fd = (trust_score(f, up, 0.0) - trust_score(f, dn, 0.0)) / 2e-6;
      REQUIRE(std::abs(fd - g[i]) <= 1e-6 * std::max(std::abs(g[i]), 1e-3));
    }
  }
}

TEST_CASE("trust score works with other scalar types") {
  const Eigen::Vector4f f(0.5f, 0.5f, 1.0f, 0.3f);
  const Eigen::Vector4f w(1.5f, 1.5f, 2.0f, 1.0f);
  CHECK(trust_score(f, w, 0.0f) == doctest::Approx(0.310026).epsilon(1e-5));
}

TEST_CASE("embeddings are unit norm or zero") {
  std::vector<std::vector<AgentRecord>> windows(3);
  windows[0] = window_of({0.1, 0.2, -0.3}, {1, 2, -1});
  windows[1] = window_of({0.1, 0.2, -0.3}, {1, 2, -1});
  windows[2] = window_of({0.4, 0.1, -0.2}, {-3, 1, 0.5});
  for (auto& w : windows) {
    for (auto& r : w) r.asset = static_cast<int>(&w - windows.data());
  }
  windows[1] = windows[0];
  const Eigen::MatrixXd e = embed_histories(windows, 32);
  for (Eigen::Index a = 0; a < e.rows(); ++a) {
    const double norm = e.row(a).norm();
    CHECK((norm == doctest::Approx(1.0) || norm == 0.0));
  }
  CHECK(e.row(0).isApprox(e.row(1)));
  CHECK(embed_history(windows, 0, 32).isApprox(e.row(0).transpose()));
  CHECK(feature_f3(0, e) == doctest::Approx(1.0));
}

TEST_CASE("f3 similarity conventions") {
  Eigen::MatrixXd e(3, 3);
  e << 1, 0, 0, 0, 1, 0, 0, 0, 1;
  CHECK(feature_f3(0, e) == 0.0);
  Eigen::MatrixXd opposite(2, 2);
  opposite << 1, 0, -1, 0;
  CHECK(feature_f3(0, opposite) == 0.0);
  CHECK(feature_f3(0, Eigen::MatrixXd::Ones(1, 4)) == 0.0);
  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 2);
  CHECK(feature_f3(1, zero) == 0.0);
}

TEST_CASE("empty token windows embed to zero") {
  std::vector<std::vector<AgentRecord>> windows(2);
  const Eigen::MatrixXd e = embed_histories(windows, 8);
  CHECK(e.isZero());
}

TEST_CASE("tokens bucket size and panic by terciles") {
  std::vector<std::vector<AgentRecord>> windows(1);
  for (int k = 1; k <= 6; ++k) {
    AgentRecord r;
    r.action_type = ActionType::Sell;
    r.quantity = 100.0 * k;
    r.panic_level = 0.1 * k;
    windows[0].push_back(r);
  }
  const TokenCuts cuts = token_cuts(windows);
  CHECK(cuts.small_size == doctest::Approx(266.6666667));
  CHECK(cuts.large_size == doctest::Approx(433.3333333));
  CHECK(action_token(windows[0][0], cuts) == "Sell|0|+small|low");
  CHECK(action_token(windows[0][5], cuts) == "Sell|0|+large|high");
  AgentRecord hold;
  hold.panic_level = 0.3;
  CHECK(action_token(hold, cuts) == "Hold|0|zero|mid");
}

TEST_CASE("detection rates") {
  std::vector<TrustReport> reports(4);
  reports[0].score = 0.2;
  reports[1].score = 0.3;
  reports[2].score = 0.8;
  reports[3].score = 0.9;
  const std::vector<bool> labels = {true, true, false, false};
  const DetectionRates r = detection_metrics(reports, labels, 0.5);
  CHECK(r.tpr == 1.0);
  CHECK(r.fpr == 0.0);
  const DetectionRates none = detection_metrics(reports, labels, 0.0);
  CHECK(none.tpr == 0.0);
  CHECK(none.fpr == 0.0);
  CHECK_THROWS_AS(detection_metrics(reports, {false, false, false, false}, 0.5), UndefinedValue);
  CHECK_THROWS_AS(detection_metrics(reports, {true, true, true, true}, 0.5), UndefinedValue);
}

TEST_CASE("uniform trust") {
  const std::vector<AgentId> ids = {AgentId::make(0, Archetype::Trader), AgentId::make(1, Archetype::Attacker)};
  for (const auto& r : uniform_trust(ids)) {
    CHECK(r.score == 1.0);
    CHECK(r.normalized_weight == 0.5);
  }
}

TEST_CASE("compute trust normalizes weights") {
  TrustWindow w;
  w.records = {window_of({0.5, -0.5, 0.2}, {1, -1, 0.5}), window_of({-0.5, 0.5, 0.1}, {1, -1, 0.0}),
               window_of({0.0, 0.0, 0.0}, {0, 0, 0})};
  w.peg = {0.0, -0.001, 0.0005, 0.0};
  w.liquidity = {1e6, 1e6, 1e6};
  const auto reports = compute_trust(w, TrustParams{});
  double total = 0.0;
  for (const auto& r : reports) {
    CHECK(r.score > 0.0);
    CHECK(r.score < 1.0);
    CHECK(r.f1 >= -1.0);
    CHECK(r.f1 <= 1.0);
    CHECK(r.f2 >= 0.0);
    CHECK(r.f2 <= 1.0);
    CHECK(r.f3 >= 0.0);
    CHECK(r.f3 <= 1.0);
    total += r.normalized_weight;
  }
  CHECK(total == doctest::Approx(1.0));

  w.peg.pop_back();
  CHECK_THROWS_AS(compute_trust(w, TrustParams{}), InvalidInput);
}

TEST_CASE("trust params validation") {
  TrustParams p;
  p.weights[2] = 0.0;
  CHECK_THROWS_AS(p.validate(), InvalidInput);
  p = TrustParams{};
  p.window = 1;
  CHECK_THROWS_AS(p.validate(), InvalidInput);
  p = TrustParams{};
  p.threshold = 1.0;
  CHECK_THROWS_AS(p.validate(), InvalidInput);
}

TEST_CASE("trust sources include no covariance or optimizer headers") {
  const std::regex banned(R"(#include\s*[<"]stablesim/(risk|optimizer|controller|config|batch)\.hpp)");
  for (const char* path : {"/include/stablesim/trust.hpp", "/src/trust.cpp"}) {
    std::ifstream in(std::string(STABLESIM_SOURCE_DIR) + path);
    REQUIRE(in);
    std::stringstream text;
    text << in.rdbuf();
    CHECK_MESSAGE(!std::regex_search(text.str(), banned), path);
  }
}
