#include "stablesim/controller.hpp"

#include <algorithm>
#include <chrono>
#include <future>

#include "stablesim/errors.hpp"

namespace stablesim {
namespace {

constexpr std::uint64_t kPopulationStream = 0x706F70ULL;
constexpr std::uint64_t kMarketStream = 0x6D6B74ULL;
constexpr std::uint64_t kStressStream = 0x737472ULL;

Matrix stress_run(const MarketModel& model, const MarketState& start, Population population,
                  const StressConfig& stress, std::uint64_t seed) {
  Rng rng(seed);
  const double u_draw = uniform01(rng);
  const double u_withdraw = uniform01(rng);
  const ShockSpec shock = ShockSpec::black_thursday(
      start.step, stress.drawdown_min + (stress.drawdown_max - stress.drawdown_min) * u_draw,
      stress.sentiment_target, stress.withdrawal_max * u_withdraw);
  population.reseed(derive_seed(seed, {1}));

  const std::size_t n = model.n_assets();
  Matrix returns(stress.horizon, static_cast<Eigen::Index>(n));
  MarketState state = start;
  for (int s = 0; s < stress.horizon; ++s) {
    const NewsEvent news = generate_news(seed, state.step, shock, n, model.params().news_shock_duration);
    const auto records = population.act(state, news);
    const MarketNoise noise = MarketNoise::draw(rng, n);
    MarketState next = model.step(state, order_flow(records, n), news, shock, noise);
    returns.row(s) = (next.prices.array() / state.prices.array() - 1.0).matrix().transpose();
    state = std::move(next);
  }
  return returns;
}

std::vector<double> scores_of(const std::vector<TrustReport>& reports) {
  std::vector<double> out;
  out.reserve(reports.size());
  for (const auto& r : reports) out.push_back(r.score);
  return out;
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::MVFComposer: return "MVFComposer";
    case Method::MVFNoTrust: return "MVFNoTrust";
    case Method::SAS: return "SAS";
    case Method::Static6040: return "Static6040";
    case Method::Unconstrained: return "Unconstrained";
  }
  return "MVFComposer";
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods{Method::MVFComposer, Method::MVFNoTrust, Method::SAS,
                                           Method::Static6040, Method::Unconstrained};
  return methods;
}

Method method_from_string(const std::string& s) {
  for (Method m : all_methods()) {
    if (to_string(m) == s) return m;
  }
  throw InvalidInput("unknown method '" + s + "'");
}

void StressConfig::validate() const {
  if (n_runs < 1) throw InvalidInput("stress.n_runs must be at least 1");
  if (horizon < 2) throw InvalidInput("stress.horizon must be at least 2");
  if (!(drawdown_min >= 0.0 && drawdown_min <= drawdown_max && drawdown_max <= 1.0)) {
    throw InvalidInput("stress drawdown range must satisfy 0 <= min <= max <= 1");
  }
  if (!(sentiment_target >= -1.0 && sentiment_target <= 1.0)) {
    throw InvalidInput("stress.sentiment_target must lie in [-1,1]");
  }
  if (!(withdrawal_max >= 0.0 && withdrawal_max <= 1.0)) {
    throw InvalidInput("stress.withdrawal_max must lie in [0,1]");
  }
  if (jobs < 1) throw InvalidInput("stress.jobs must be at least 1");
}

void ControllerConfig::validate(std::size_t n_assets) const {
  if (!(risk_aversion > 0.0)) throw InvalidInput("controller.risk_aversion must be positive");
  if (!(turnover_limit >= 0.0)) throw InvalidInput("controller.turnover_limit must be non-negative");
  if (!(weight_min >= 0.0 && weight_min <= weight_max && weight_max <= 1.0)) {
    throw InvalidInput("controller weight bounds must satisfy 0 <= min <= max <= 1");
  }
  const double n = static_cast<double>(n_assets);
  if (weight_min * n > 1.0 || weight_max * n < 1.0) {
    throw InvalidInput("controller weight bounds leave no feasible allocation");
  }
  if (expected_returns.size() != 0 && static_cast<std::size_t>(expected_returns.size()) != n_assets) {
    throw InvalidInput("controller.expected_returns must have one entry per asset");
  }
  if (horizon < 1) throw InvalidInput("controller.horizon must be at least 1");
  if (epoch_length < 1) throw InvalidInput("controller.epoch_length must be at least 1");
  if (!(epsilon > 0.0)) throw InvalidInput("controller.epsilon must be positive");
  if (force_alpha && !(*force_alpha >= 0.0 && *force_alpha <= 1.0)) {
    throw InvalidInput("force_alpha must lie in [0,1]");
  }
  stress.validate();
  trust.validate();
}

PortfolioProblem ControllerConfig::problem(const Matrix& covariance, const Vector& prev_weights) const {
  PortfolioProblem p;
  const Eigen::Index n = covariance.rows();
  p.covariance = covariance;
  p.expected_returns = expected_returns.size() ? expected_returns : Vector::Zero(n);
  p.risk_aversion = risk_aversion;
  p.prev_weights = prev_weights;
  p.turnover_limit = method == Method::Unconstrained ? std::numeric_limits<double>::infinity()
                                                     : turnover_limit;
  p.lower_bounds = Vector::Constant(n, weight_min);
  p.upper_bounds = Vector::Constant(n, weight_max);
  return p;
}

std::vector<Matrix> run_stress_scenarios(const MarketModel& model, const MarketState& state,
                                         const Population& population, const StressConfig& stress,
                                         std::uint64_t seed) {
  std::vector<Matrix> runs(static_cast<std::size_t>(stress.n_runs));
  auto run_seed = [&](int k) { return derive_seed(seed, {kStressStream, static_cast<std::uint64_t>(k)}); };
  if (stress.jobs <= 1) {
    for (int k = 0; k < stress.n_runs; ++k) {
      runs[static_cast<std::size_t>(k)] = stress_run(model, state, population, stress, run_seed(k));
    }
    return runs;
  }
  for (int begin = 0; begin < stress.n_runs; begin += stress.jobs) {
    std::vector<std::future<Matrix>> batch;
    const int end = std::min(stress.n_runs, begin + stress.jobs);
    for (int k = begin; k < end; ++k) {
      batch.push_back(std::async(std::launch::async, [&, k] {
        return stress_run(model, state, population, stress, run_seed(k));
      }));
    }
    for (int k = begin; k < end; ++k) runs[static_cast<std::size_t>(k)] = batch[static_cast<std::size_t>(k - begin)].get();
  }
  return runs;
}

StressHarness make_stress_harness(const MarketModel& model, const Population& population,
                                  const StressConfig& stress, const BehaviorParams&) {
  return [&model, &population, stress](const MarketState& state, std::uint64_t seed) {
    return run_stress_scenarios(model, state, population, stress, seed);
  };
}

EpochResult run_epoch(const ControllerConfig& config, const Matrix& hist_cov,
                      const Vector& prev_weights, std::uint64_t seed, const EpochInputs& inputs) {
  const auto started = std::chrono::steady_clock::now();
  EpochResult result;
  result.epoch = inputs.epoch;
  result.step = inputs.state ? inputs.state->step : 0;
  const Eigen::Index n = hist_cov.rows();

  if (config.method == Method::Static6040) {
    Vector target = Vector::Constant(n, n > 1 ? 0.4 / static_cast<double>(n - 1) : 0.0);
    target[0] = n > 1 ? 0.6 : 1.0;
    result.weights = project_to_bounded_simplex(target, Vector::Constant(n, config.weight_min),
                                                Vector::Constant(n, config.weight_max));
    const PortfolioProblem problem = config.problem(hist_cov, prev_weights);
    result.solution.weights = result.weights;
    result.solution.objective = problem.objective(result.weights);
    result.solution.kkt_residual = kkt_check(problem, result.weights).residual;
    result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
  }

  Matrix covariance = hist_cov;
  const bool uses_agents = config.method != Method::SAS;
  const bool has_window = inputs.window && !inputs.window->records.empty() &&
                          inputs.window->length() >= 2;
  if (uses_agents && has_window) {
    // Score and aggregate from records that precede this epoch.
    result.trust_reports = compute_trust(*inputs.window, config.trust);
    if (config.force_uniform_trust || config.method == Method::MVFNoTrust) {
      for (auto& r : result.trust_reports) {
        r.score = 1.0;
        r.normalized_weight = 1.0 / static_cast<double>(result.trust_reports.size());
      }
    }
    result.risk = compute_risk_state(inputs.window->records, inputs.window->liquidity,
                                     scores_of(result.trust_reports), inputs.max_qty,
                                     inputs.impact, config.epsilon);
    result.risk_state = result.risk.aggregate;
    result.alpha = blend_alpha(result.risk_state);
  }
  if (config.force_alpha) result.alpha = *config.force_alpha;

  if (uses_agents && result.alpha > 0.0) {
    try {
      if (!inputs.harness || !inputs.state) throw std::runtime_error("no stress harness");
      const auto runs = inputs.harness(*inputs.state, seed);
      const Matrix stress = estimate_stress_covariance(runs);
      const CovarianceSet set = blend_covariance(hist_cov, stress, result.alpha);
      covariance = set.blended;
      result.stress_trace_ratio = stress.trace() / hist_cov.trace();
    } catch (const std::exception&) {
      result.stress_fallback = true;
      result.alpha = 0.0;
      covariance = hist_cov;
    }
  }

  result.solution = solve(config.problem(covariance, prev_weights), SolverOptions{});
  result.weights = result.solution.weights;
  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

void SimulationConfig::validate() const {
  market.validate();
  controller.validate(market.n_assets());
  population.attack.validate();
  population.behavior.validate();
  if (population.traders < 0 || population.liquidity_providers < 0 || population.arbitrageurs < 0 ||
      population.attackers < 0) {
    throw InvalidInput("population counts must be non-negative");
  }
  const Matrix& h = historical();
  if (h.rows() != static_cast<Eigen::Index>(market.n_assets())) {
    throw InvalidInput("historical covariance must match the asset count");
  }
  require_psd(h, "historical covariance");
}

TrustWindow trailing_window(const Trajectory& trajectory, int step, int window, double impact) {
  TrustWindow w;
  w.impact = impact;
  const int begin = std::max(0, step - window);
  if (step - begin < 1) return w;
  w.records.assign(trajectory.agents.size(), {});
  for (int s = begin; s < step; ++s) {
    const auto& row = trajectory.records[static_cast<std::size_t>(s)];
    for (std::size_t a = 0; a < row.size(); ++a) w.records[a].push_back(row[a]);
    w.liquidity.push_back(trajectory.states[static_cast<std::size_t>(s)].pool_liquidity);
  }
  for (int s = begin; s <= step; ++s) {
    w.peg.push_back(trajectory.states[static_cast<std::size_t>(s)].peg_deviation);
  }
  return w;
}

Trajectory run_trajectory(const SimulationConfig& config, const ShockSpec& shock, std::uint64_t seed,
                          const std::optional<StressHarness>& harness_override) {
  config.validate();
  const ControllerConfig& ctl = config.controller;
  shock.validate(ctl.horizon);
  const MarketModel model(config.market);
  const std::size_t n = model.n_assets();
  const Matrix& hist = config.historical();

  PopulationSpec spec = config.population;
  if (!spec.attack.shock_step && shock.kind != ShockKind::Normal) {
    spec.attack.shock_step = shock.injection_step;
  }
  Population population = spawn_population(spec, derive_seed(seed, {kPopulationStream}), config.market);
  Rng market_rng(derive_seed(seed, {kMarketStream}));

  Trajectory traj;
  traj.agents = population.ids();
  Vector target = Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
  MarketState state = model.initial_state(target);
  const std::optional<ShockSpec> active_shock =
      shock.kind == ShockKind::Normal ? std::nullopt : std::optional<ShockSpec>(shock);

  for (int t = 0; t < ctl.horizon; ++t) {
    traj.states.push_back(state);
    if (t % ctl.epoch_length == 0) {
      const TrustWindow window = trailing_window(traj, t, ctl.trust.window, config.market.impact);
      EpochInputs inputs;
      inputs.epoch = t / ctl.epoch_length;
      inputs.state = &state;
      inputs.window = &window;
      inputs.max_qty = spec.behavior.max_qty;
      inputs.impact = config.market.impact;
      inputs.harness = harness_override ? *harness_override
                                        : make_stress_harness(model, population, ctl.stress, spec.behavior);
      const std::uint64_t epoch_seed = derive_seed(seed, {kStressStream, static_cast<std::uint64_t>(inputs.epoch)});
      EpochResult epoch = run_epoch(ctl, hist, target, epoch_seed, inputs);
      target = epoch.weights;
      rebalance_reserve(state, target);
      traj.states.back() = state;
      traj.epochs.push_back(std::move(epoch));
    }
    const NewsEvent news = generate_news(seed, t, active_shock, n, config.market.news_shock_duration);
    auto records = population.act(state, news);
    const OrderFlow flow = order_flow(records, n);
    const MarketNoise noise = MarketNoise::draw(market_rng, n);
    state = model.step(state, flow, news, active_shock, noise);
    traj.records.push_back(std::move(records));
  }
  traj.states.push_back(state);
  return traj;
}

}  // namespace stablesim
