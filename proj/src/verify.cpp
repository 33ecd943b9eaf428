#include "stablesim/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <ostream>
#include <sstream>

#include "stablesim/batch.hpp"
#include "stablesim/io.hpp"
#include "stablesim/random.hpp"

namespace stablesim {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

std::string num(double x, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, x);
  return buf;
}

template <typename F>
CheckResult timed(int id, std::string name, double budget, F&& body) {
  CheckResult r;
  r.id = id;
  r.name = std::move(name);
  r.budget_seconds = budget;
  const auto start = Clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("threw: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  if (r.passed && r.seconds > budget) {
    r.passed = false;
    r.detail += " (over time budget)";
  }
  return r;
}

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

Matrix random_psd(Rng& rng, Eigen::Index n, double scale, double ridge) {
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = standard_normal(rng);
  Matrix s = scale * (a * a.transpose()) / static_cast<double>(n);
  s.diagonal().array() += ridge;
  return s;
}

Vector random_features(Rng& rng) {
  Vector f(4);
  f << uniform(rng, -1, 1), uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, -1, 1);
  return f;
}

// Grid values are integer multiples of 1e-3 to keep constraint vertices on the grid.
double snap(double x) { return std::round(x * 1000.0) / 1000.0; }

double grid_minimum(const PortfolioProblem& p) {
  const Eigen::Index n = p.size();
  const int steps = 1000;
  double best = std::numeric_limits<double>::infinity();
  Vector w(n);
  auto feasible = [&](const Vector& x) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (x[i] < p.lower_bounds[i] - 1e-12 || x[i] > p.upper_bounds[i] + 1e-12) return false;
    }
    return !p.has_turnover() || (x - p.prev_weights).lpNorm<1>() <= p.turnover_limit + 1e-12;
  };
  if (n == 2) {
    for (int i = 0; i <= steps; ++i) {
      w << i / 1000.0, (steps - i) / 1000.0;
      if (feasible(w)) best = std::min(best, p.objective(w));
    }
  } else {
    for (int i = 0; i <= steps; ++i) {
      for (int j = 0; i + j <= steps; ++j) {
        w << i / 1000.0, j / 1000.0, (steps - i - j) / 1000.0;
        if (feasible(w)) best = std::min(best, p.objective(w));
      }
    }
  }
  return best;
}

}  // namespace

CheckResult check_trust_arithmetic(const TrustParams& params) {
  return timed(1, "trust arithmetic", 1e-3, [&](CheckResult& r) {
    const Vector4 f(0.5, 0.5, 1.0, 0.3);
    const double t = trust_score(f, params);
    const double target = 0.310026;
    r.passed = std::abs(t - target) <= 1e-5;
    r.detail = "T=" + num(t) + " target " + num(target) + " +- 1e-05";
  });
}

CheckResult check_influence_bounds() {
  return timed(2, "influence bounds", 1.0, [&](CheckResult& r) {
    const double bound = influence_bound(0.2, 0.35, 0.75);
    bool ok = std::abs(bound - 0.1045) <= 1e-4;

    // Populations of 10 with 2 adversaries whose trust means respect the fixture.
    Rng rng(derive_seed(7, {2}));
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
      std::vector<double> trust;
      std::vector<bool> labels;
      for (int i = 0; i < 10; ++i) {
        const bool adv = i < 2;
        trust.push_back(adv ? uniform(rng, 0.0, 0.35) : uniform(rng, 0.75, 1.0));
        labels.push_back(adv);
      }
      worst = std::max(worst, adversarial_influence(trust, labels) - bound);
    }
    ok = ok && worst <= 1e-12;

    std::vector<double> sybil(5, 0.31);
    sybil.insert(sybil.end(), 10, 0.75);
    std::vector<bool> labels(15, false);
    std::fill(labels.begin(), labels.begin() + 5, true);
    const double infl = adversarial_influence(sybil, labels);
    const double uniform_infl = adversarial_influence(std::vector<double>(15, 1.0), labels);
    ok = ok && std::abs(infl - 0.1713) <= 1e-4 && std::abs(uniform_infl - 1.0 / 3.0) <= 1e-4;

    r.passed = ok;
    r.detail = "bound=" + num(bound) + " (0.1045 +- 1e-4), max excess " + num(worst) +
               ", sybil " + num(infl) + " (0.1713 +- 1e-4) vs uniform " + num(uniform_infl);
  });
}

CheckResult check_trust_properties(const TrustParams& params, std::uint64_t seed) {
  return timed(3, "trust properties", 10.0, [&](CheckResult& r) {
    Rng rng(derive_seed(seed, {3}));
    const Vector w = params.weights;
    const double b = params.bias;
    const double h = 1e-3, fd = 1e-6;
    int bounded = 0, monotone = 0;
    double worst_rel = 0.0;
    const int n = 1000;
    for (int k = 0; k < n; ++k) {
      const Vector f = random_features(rng);
      const double t = trust_score(f, w, b);
      bounded += t > 0.0 && t < 1.0;

      bool mono = true;
      for (int i = 0; i < 4; ++i) {
        Vector up = f, down = f;
        up[i] += h;
        down[i] -= h;
        const double tu = trust_score(up, w, b), td = trust_score(down, w, b);
        const bool raises = i < 2;  // f1, f2 raise trust; f3, f4 lower it
        if (w[i] > 0.0) mono = mono && (raises ? (tu > t && td < t) : (tu < t && td > t));
      }
      monotone += mono;

      const Vector g = trust_score_gradient(f, w, b);
      Vector numeric(4);
      for (int i = 0; i < 4; ++i) {
        Vector wp = w, wm = w;
        wp[i] += fd;
        wm[i] -= fd;
        numeric[i] = (trust_score(f, wp, b) - trust_score(f, wm, b)) / (2 * fd);
      }
      worst_rel = std::max(worst_rel, (g - numeric).lpNorm<Eigen::Infinity>() /
                                          std::max(g.lpNorm<Eigen::Infinity>(), 1e-12));
    }
    r.passed = bounded == n && monotone == n && worst_rel <= 1e-6;
    r.detail = "bounded " + std::to_string(bounded) + "/" + std::to_string(n) + ", monotone " +
               std::to_string(monotone) + "/" + std::to_string(n) + ", gradient rel err " +
               num(worst_rel, 3) + " (<= 1e-6)";
  });
}

CheckResult check_risk_properties(std::uint64_t seed) {
  return timed(4, "risk and covariance properties", 30.0, [&](CheckResult& r) {
    Rng rng(derive_seed(seed, {4}));
    const int n = 1000;
    int convex = 0, psd = 0, weyl = 0, fragile = 0;
    for (int k = 0; k < n; ++k) {
      std::vector<double> risk, trust;
      const int agents = 2 + static_cast<int>(uniform01(rng) * 20);
      for (int i = 0; i < agents; ++i) {
        risk.push_back(uniform01(rng));
        trust.push_back(uniform(rng, 1e-3, 1.0));
      }
      const double agg = aggregate_risk(risk, trust);
      const auto [lo, hi] = std::minmax_element(risk.begin(), risk.end());
      convex += agg >= *lo - 1e-15 && agg <= *hi + 1e-15 && agg >= 0.0 && agg <= 1.0;

      const Eigen::Index dim = 2 + static_cast<Eigen::Index>(uniform01(rng) * 7);
      const Matrix hist = random_psd(rng, dim, 1e-4, 1e-6);
      const Matrix stress = random_psd(rng, dim, uniform(rng, 1e-4, 1e-2), 0.0);
      const double alpha = uniform01(rng);
      const Matrix mix = blend(hist, stress, alpha);
      const double scale = std::max(1.0, mix.norm());
      const double mn = min_eigenvalue(mix), mx = max_eigenvalue(mix);
      psd += is_symmetric(mix) && mn >= -1e-12 * scale;
      weyl += mn >= (1 - alpha) * min_eigenvalue(hist) + alpha * min_eigenvalue(stress) - 1e-12 * scale &&
              mx <= (1 - alpha) * max_eigenvalue(hist) + alpha * max_eigenvalue(stress) + 1e-12 * scale;

      Vector w(dim);
      for (Eigen::Index i = 0; i < dim; ++i) w[i] = uniform(rng, 0.0, 1.0);
      w /= w.sum();
      fragile += fragility_ratio(w, hist, stress) <= rayleigh_bound(hist, stress) * (1 + 1e-10);
    }
    r.passed = convex == n && psd == n && weyl == n && fragile == n;
    r.detail = "convex " + std::to_string(convex) + ", psd " + std::to_string(psd) + ", weyl " +
               std::to_string(weyl) + ", rayleigh " + std::to_string(fragile) + " of " +
               std::to_string(n);
  });
}

CheckResult check_optimizer_oracles(std::uint64_t seed) {
  return timed(5, "optimizer oracles", 120.0, [&](CheckResult& r) {
    Rng rng(derive_seed(seed, {5}));
    double worst_closed = 0.0, worst_grid = 0.0, worst_kkt = 0.0;
    int interior = 0, attempts = 0;
    while (interior < 200) {
      if (++attempts > 100000) throw std::runtime_error("could not draw interior problems");
      const Eigen::Index n = 2 + static_cast<Eigen::Index>(uniform01(rng) * 7);
      Matrix cov = random_psd(rng, n, 0.05, 0.02);
      Vector mu(n);
      for (Eigen::Index i = 0; i < n; ++i) mu[i] = 0.01 * standard_normal(rng);
      PortfolioProblem p = PortfolioProblem::with_defaults(cov, mu);
      p.lower_bounds.setZero();
      p.upper_bounds.setOnes();
      const Vector closed = markowitz_closed_form(cov, mu, p.risk_aversion);
      if ((closed.array() <= 0.01).any() || (closed.array() >= 0.99).any()) continue;
      p.prev_weights = closed;
      for (Eigen::Index i = 0; i < n; ++i) p.prev_weights[i] += 0.01 * (uniform01(rng) - 0.5);
      p.prev_weights /= p.prev_weights.sum();
      if ((p.prev_weights - closed).lpNorm<1>() >= p.turnover_limit) continue;
      ++interior;
      const Solution s = solve(p);
      worst_closed = std::max(worst_closed, (s.weights - closed).lpNorm<Eigen::Infinity>());
      worst_kkt = std::max(worst_kkt, kkt_check(p, s.weights).residual);
    }
    for (int k = 0; k < 50; ++k) {
      const Eigen::Index n = k % 2 == 0 ? 2 : 3;
      Matrix cov = random_psd(rng, n, 0.2, 0.01);
      Vector mu(n);
      for (Eigen::Index i = 0; i < n; ++i) mu[i] = 0.2 * standard_normal(rng);
      PortfolioProblem p = PortfolioProblem::with_defaults(cov, mu);
      p.lower_bounds.setConstant(0.05);
      p.upper_bounds.setConstant(n == 2 ? 0.9 : 0.6);
      // Previous weights on the 1e-3 grid inside the bounds.
      Vector prev(n);
      do {
        for (Eigen::Index i = 0; i + 1 < n; ++i) prev[i] = snap(uniform(rng, 0.05, 0.6));
        prev[n - 1] = snap(1.0 - prev.head(n - 1).sum());
      } while ((prev.array() < p.lower_bounds.array()).any() ||
               (prev.array() > p.upper_bounds.array()).any());
      p.prev_weights = prev;
      p.turnover_limit = k % 5 == 4 ? std::numeric_limits<double>::infinity()
                                    : 0.002 * std::round(uniform(rng, 0.02, 0.4) / 0.002);
      const Solution s = solve(p);
      const double grid = grid_minimum(p);
      worst_grid = std::max(worst_grid, std::abs(s.objective - grid));
      if (s.objective > grid + 1e-12) worst_grid = std::max(worst_grid, 1.0);
      worst_kkt = std::max(worst_kkt, kkt_check(p, s.weights).residual);
    }
    r.passed = worst_closed <= 1e-6 && worst_grid <= 1e-6 && worst_kkt <= 1e-8;
    r.detail = "closed-form max diff " + num(worst_closed, 3) + ", grid objective gap " +
               num(worst_grid, 3) + " (<= 1e-6), max KKT residual " + num(worst_kkt, 3) + " (<= 1e-8)";
  });
}

CheckResult check_recovery_oracle(std::uint64_t seed) {
  return timed(6, "recovery time oracle", 5.0, [&](CheckResult& r) {
    Rng rng(derive_seed(seed, {6}));
    const double eps = 0.01;
    int worst = 0;
    for (int k = 0; k < 100; ++k) {
      const double d0 = uniform(rng, 0.02, 0.2);
      const double gamma = uniform(rng, 0.05, 0.5);
      std::vector<double> peg;
      for (int t = 0; t <= 400; ++t) peg.push_back(-d0 * std::exp(-gamma * t));
      const auto rec = recovery_time(peg, 0, eps);
      const int oracle = static_cast<int>(std::ceil(std::log(d0 / eps) / gamma));
      worst = std::max(worst, rec ? std::abs(*rec - oracle) : 1000);
    }
    r.passed = worst <= 1;
    r.detail = "max |measured - ceil(ln(d/eps)/gamma)| = " + std::to_string(worst) + " step(s)";
  });
}

std::vector<CheckResult> check_simulation(const AppConfig& base, int runs) {
  std::vector<CheckResult> out;
  const auto start = Clock::now();
  AppConfig c = base;
  c.runs = runs;
  c.shocks = {ShockKind::BlackThursday};
  c.methods = {Method::MVFComposer, Method::SAS};
  c.rho.reset();
  BatchResult main;
  BatchResult adversarial;
  std::string error;
  try {
    main = run_batch(c);
    AppConfig heavy = c;
    heavy.methods = {Method::MVFComposer, Method::MVFNoTrust};
    heavy.rho = 0.3;
    adversarial = run_batch(heavy);
  } catch (const std::exception& e) {
    error = e.what();
  }
  const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();

  CheckResult det;
  det.id = 7;
  det.name = "detection targets";
  det.budget_seconds = 300.0;
  CheckResult stab;
  stab.id = 8;
  stab.name = "directional stability";
  stab.budget_seconds = 600.0;
  stab.seconds = det.seconds = elapsed;
  const CellResult* mvf = main.find(Method::MVFComposer, ShockKind::BlackThursday);
  const CellResult* sas = main.find(Method::SAS, ShockKind::BlackThursday);
  const CellResult* mvf_heavy = adversarial.find(Method::MVFComposer, ShockKind::BlackThursday);
  const CellResult* no_trust = adversarial.find(Method::MVFNoTrust, ShockKind::BlackThursday);
  if (!error.empty() || !mvf || !sas || !mvf_heavy || !no_trust || main.failures ||
      adversarial.failures) {
    det.detail = stab.detail = error.empty() ? "simulation runs failed" : "threw: " + error;
    out.push_back(det);
    out.push_back(stab);
    return out;
  }

  const SimulationConfig sim = c.simulation();
  const int attackers = sim.population.attackers;
  const int agents = attackers + sim.population.traders + sim.population.liquidity_providers +
                     sim.population.arbitrageurs;
  const SecuritySummary s = mvf->security(c.sim.controller.trust.threshold);
  det.passed = s.tpr >= 0.7 && s.fpr <= 0.1 && s.influence_reduction >= 0.4 &&
               s.influence_reduction <= 0.85 && attackers >= 1 &&
               sim.population.attack.coordination >= 0.8 && det.seconds <= det.budget_seconds;
  det.detail = "TPR " + num(s.tpr, 3) + " (>= 0.7), FPR " + num(s.fpr, 3) +
               " (<= 0.1), influence reduction " + num(s.influence_reduction, 3) +
               " (in [0.4, 0.85]); " + std::to_string(runs) + " runs, " + std::to_string(agents) +
               " agents, " + std::to_string(attackers) + " attackers";

  auto peaks = [](const CellResult& cell) {
    std::vector<double> v;
    for (const auto& r : cell.runs) v.push_back(r.metrics.peak_deviation);
    return v;
  };
  const auto vs_sas = compare_paired(peaks(*mvf), peaks(*sas));
  const auto vs_nt = compare_paired(peaks(*mvf_heavy), peaks(*no_trust));
  const int horizon = c.sim.controller.horizon, t_s = c.shock.injection_step;
  const double rec_mvf = mvf->metrics_row(horizon, t_s).recovery;
  const double rec_sas = sas->metrics_row(horizon, t_s).recovery;
  stab.passed = vs_sas.win_fraction >= 0.8 && rec_mvf < rec_sas && vs_nt.win_fraction >= 0.7 &&
                stab.seconds <= stab.budget_seconds;
  auto mean = [](const std::vector<double>& v) {
    double t = 0.0;
    for (double x : v) t += x;
    return v.empty() ? 0.0 : t / static_cast<double>(v.size());
  };
  stab.detail = "peak below SAS in " + num(100 * vs_sas.win_fraction, 3) + "% (>= 80%), recovery " +
                num(rec_mvf, 4) + " vs " + num(rec_sas, 4) + " steps, peak below NoTrust at rho=0.3 in " +
                num(100 * vs_nt.win_fraction, 3) + "% (>= 70%); mean peak " + num(mean(peaks(*mvf)), 5) +
                " vs SAS " + num(mean(peaks(*sas)), 5) + ", " + num(mean(peaks(*mvf_heavy)), 5) +
                " vs NoTrust " + num(mean(peaks(*no_trust)), 5);
  out.push_back(det);
  out.push_back(stab);
  return out;
}

CheckResult check_baseline_reduction(const AppConfig& config) {
  return timed(9, "baseline reduction", 10.0, [&](CheckResult& r) {
    SimulationConfig sim = config.simulation();
    sim.controller.method = Method::SAS;
    const ShockSpec shock = config.shock.make(ShockKind::BlackThursday);
    const Trajectory t = run_trajectory(sim, shock, config.seed);

    ControllerConfig sas = sim.controller;
    ControllerConfig reduced = sim.controller;
    reduced.method = Method::MVFComposer;
    reduced.force_alpha = 0.0;
    reduced.force_uniform_trust = true;

    double worst = 0.0;
    int compared = 0;
    Vector prev = Vector::Constant(static_cast<Eigen::Index>(sim.market.n_assets()),
                                   1.0 / static_cast<double>(sim.market.n_assets()));
    for (const auto& e : t.epochs) {
      const MarketState& state = t.states[static_cast<std::size_t>(e.step)];
      const TrustWindow window = trailing_window(t, e.step, sim.controller.trust.window,
                                                 sim.market.impact);
      EpochInputs in;
      in.epoch = e.epoch;
      in.state = &state;
      in.window = &window;
      in.max_qty = sim.population.behavior.max_qty;
      in.impact = sim.market.impact;
      const EpochResult a = run_epoch(sas, sim.historical(), prev, config.seed, in);
      const EpochResult b = run_epoch(reduced, sim.historical(), prev, config.seed, in);
      worst = std::max(worst, (a.weights - b.weights).lpNorm<Eigen::Infinity>());
      prev = a.weights;
      ++compared;
    }
    r.passed = compared > 0 && worst <= 1e-8;
    r.detail = "max weight diff " + num(worst, 3) + " over " + std::to_string(compared) +
               " epochs (<= 1e-8)";
  });
}

CheckResult check_determinism(const AppConfig& config, int runs) {
  return timed(10, "determinism", 600.0, [&](CheckResult& r) {
    AppConfig c = config;
    c.runs = runs;
    const fs::path root = fs::temp_directory_path() /
                          ("stablesim_verify_" + std::to_string(derive_seed(c.seed, {10})));
    std::ostringstream log;
    AppConfig serial = c;
    serial.jobs = 1;
    cmd_run(serial, (root / "a").string(), log);
    AppConfig pooled = c;
    pooled.jobs = 4;
    cmd_run(pooled, (root / "b").string(), log);
    const std::string a = read_file((root / "a" / "summary.json").string());
    const std::string b = read_file((root / "b" / "summary.json").string());
    fs::remove_all(root);
    r.passed = !a.empty() && a == b;
    r.detail = std::string(a == b ? "identical" : "different") + " summary.json (" +
               std::to_string(a.size()) + " bytes, " + std::to_string(runs) +
               " runs per cell, serial vs pooled)";
  });
}

std::vector<CheckResult> run_acceptance(const VerifyOptions& options, std::ostream* progress) {
  const AppConfig& c = options.config;
  const TrustParams& trust = c.sim.controller.trust;
  auto wanted = [&](int id) {
    return options.only.empty() ||
           std::find(options.only.begin(), options.only.end(), id) != options.only.end();
  };
  std::vector<CheckResult> out;
  auto add = [&](CheckResult r) {
    if (progress) *progress << format_check(r) << '\n' << std::flush;
    out.push_back(std::move(r));
  };
  if (wanted(1)) add(check_trust_arithmetic(trust));
  if (wanted(2)) add(check_influence_bounds());
  if (wanted(3)) add(check_trust_properties(trust, c.seed));
  if (wanted(4)) add(check_risk_properties(c.seed));
  if (wanted(5)) add(check_optimizer_oracles(c.seed));
  if (wanted(6)) add(check_recovery_oracle(c.seed));
  if (wanted(7) || wanted(8)) {
    for (auto& r : check_simulation(c, options.runs)) {
      if (wanted(r.id)) add(std::move(r));
    }
  }
  if (wanted(9)) add(check_baseline_reduction(c));
  if (wanted(10)) add(check_determinism(c, options.determinism_runs));
  return out;
}

std::string format_check(const CheckResult& r) {
  char head[96];
  std::snprintf(head, sizeof head, "[%s] %2d %-32s", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str());
  return std::string(head) + r.detail + "  (" + num(r.seconds, 3) + " s, budget " +
         num(r.budget_seconds, 3) + " s)";
}

int cmd_verify(const VerifyOptions& options, std::ostream& out) {
  const auto results = run_acceptance(options, &out);
  const auto passed = std::count_if(results.begin(), results.end(), [](const CheckResult& r) { return r.passed; });
  out << passed << "/" << results.size() << " checks passed\n";
  return passed == static_cast<long>(results.size()) ? 0 : 1;
}

}  // namespace stablesim
