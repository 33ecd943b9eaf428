#include "stablesim/config.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>

extern char** environ;

namespace stablesim {
namespace {

using nlohmann::json;

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json mat_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_json(m.row(r).transpose()));
  return rows;
}

// Field reader that reports the dotted path of any bad value.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  Reader child(const std::string& key) const { return Reader(at(key), name(key)); }

  double num(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_number()) fail(key, "expected a number");
    return v.get<double>();
  }
  int integer(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    return v.get<int>();
  }
  std::uint64_t uint(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_number_unsigned()) fail(key, "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }
  bool boolean(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_boolean()) fail(key, "expected true or false");
    return v.get<bool>();
  }
  std::string str(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }
  bool is_null(const std::string& key) const { return at(key).is_null(); }
  Vector vec(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_array()) fail(key, "expected an array of numbers");
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail(key, "expected an array of numbers");
      out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    }
    return out;
  }
  Matrix mat(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_array()) fail(key, "expected a square array of rows");
    const auto n = static_cast<Eigen::Index>(v.size());
    Matrix out(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const json& row = v[static_cast<std::size_t>(r)];
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
        fail(key, "expected a square array of rows");
      }
      for (Eigen::Index c = 0; c < n; ++c) {
        const json& x = row[static_cast<std::size_t>(c)];
        if (!x.is_number()) fail(key, "expected numbers");
        out(r, c) = x.get<double>();
      }
    }
    return out;
  }
  std::vector<std::string> strings(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_array()) fail(key, "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& x : v) {
      if (!x.is_string()) fail(key, "expected an array of strings");
      out.push_back(x.get<std::string>());
    }
    return out;
  }

  template <typename F>
  auto parse(const std::string& key, F&& f) const {
    try {
      return f(str(key));
    } catch (const InvalidInput& e) {
      fail(key, e.what());
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError(name(key) + ": " + msg);
  }

 private:
  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const json& at(const std::string& key) const {
    if (!j_.is_object() || !j_.contains(key)) throw ConfigError(name(key) + ": missing");
    return j_.at(key);
  }

  const json& j_;
  std::string path_;
};

// Overlay `patch` onto `base`, rejecting keys the base does not define.
void overlay(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw ConfigError((path.empty() ? "config" : path) + ": expected an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string name = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ConfigError(name + ": unknown key");
    json& slot = base[key];
    if (slot.is_object() && !value.is_null()) {
      overlay(slot, value, name);
    } else {
      slot = value;
    }
  }
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

Preset preset_from_string(const std::string& s) {
  if (s == "quick") return Preset::Quick;
  if (s == "full") return Preset::Full;
  throw InvalidInput("unknown preset '" + s + "' (expected quick or full)");
}

int preset_runs(Preset p) { return p == Preset::Quick ? 100 : 1200; }

ShockSpec ShockSettings::make(ShockKind kind) const {
  switch (kind) {
    case ShockKind::Normal: return ShockSpec::normal(injection_step);
    case ShockKind::PriceShock: return ShockSpec::price(injection_step, price_drawdown);
    case ShockKind::SentimentShock: return ShockSpec::sentiment(injection_step, sentiment_target);
    case ShockKind::BlackThursday:
      return ShockSpec::black_thursday(injection_step, black_thursday_drawdown, sentiment_target,
                                       liquidity_withdrawal);
  }
  return ShockSpec::normal(injection_step);
}

AppConfig AppConfig::defaults() {
  AppConfig c;
  c.sim.controller.expected_returns = (Vector(4) << 1.0e-5, 0.5e-5, 2.0e-5, 1.0e-5).finished();
  return c;
}

SimulationConfig AppConfig::simulation() const {
  SimulationConfig s = sim;
  if (rho) {
    const int benign = s.population.traders + s.population.liquidity_providers + s.population.arbitrageurs;
    s.population.attackers = PopulationSpec::attackers_for_fraction(*rho, benign);
  }
  return s;
}

void AppConfig::validate() const {
  if (runs < 1) throw ConfigError("runs: must be at least 1");
  if (jobs < 0) throw ConfigError("jobs: must be non-negative");
  if (methods.empty()) throw ConfigError("methods: must not be empty");
  if (shocks.empty()) throw ConfigError("shocks: must not be empty");
  if (rho && !(*rho >= 0.0 && *rho < 1.0)) throw ConfigError("rho: must lie in [0,1)");
  try {
    for (ShockKind k : shocks) shock.make(k).validate(sim.controller.horizon);
    simulation().validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
}

json to_json(const AppConfig& c) {
  const auto& s = c.sim;
  const auto& m = s.market;
  const auto& ctl = s.controller;
  const auto& pop = s.population;
  const auto& b = pop.behavior;
  json methods = json::array(), shocks = json::array();
  for (Method x : c.methods) methods.push_back(to_string(x));
  for (ShockKind x : c.shocks) shocks.push_back(to_string(x));
  json j;
  j["seed"] = c.seed;
  j["runs"] = c.runs;
  j["jobs"] = c.jobs;
  j["methods"] = methods;
  j["shocks"] = shocks;
  j["rho"] = c.rho ? json(*c.rho) : json(nullptr);
  j["historical_covariance_csv"] =
      c.historical_covariance_csv ? json(*c.historical_covariance_csv) : json(nullptr);
  j["shock"] = {{"injection_step", c.shock.injection_step},
                {"price_drawdown", c.shock.price_drawdown},
                {"black_thursday_drawdown", c.shock.black_thursday_drawdown},
                {"sentiment_target", c.shock.sentiment_target},
                {"liquidity_withdrawal", c.shock.liquidity_withdrawal}};
  j["market"] = {{"asset_names", m.asset_names},
                 {"reversion", m.reversion},
                 {"impact", m.impact},
                 {"noise_sd", m.noise_sd},
                 {"sentiment_memory", m.sentiment_memory},
                 {"backing_passthrough", m.backing_passthrough},
                 {"calm_covariance", mat_json(m.calm_covariance)},
                 {"stress_vol_multiplier", vec_json(m.stress_vol_multiplier)},
                 {"stress_correlation", m.stress_correlation},
                 {"stress_duration", m.stress_duration},
                 {"shock_loading", vec_json(m.shock_loading)},
                 {"price_anchor", vec_json(m.price_anchor)},
                 {"price_reversion", m.price_reversion},
                 {"shock_persistence", m.shock_persistence},
                 {"asset_impact", m.asset_impact},
                 {"vol_ewma", m.vol_ewma},
                 {"steps_per_year", m.steps_per_year},
                 {"initial_liquidity", m.initial_liquidity},
                 {"initial_supply", m.initial_supply},
                 {"initial_collateral_ratio", m.initial_collateral_ratio},
                 {"news_shock_duration", m.news_shock_duration}};
  j["population"] = {
      {"traders", pop.traders},
      {"liquidity_providers", pop.liquidity_providers},
      {"arbitrageurs", pop.arbitrageurs},
      {"attackers", pop.attackers},
      {"attack",
       {{"coordination", pop.attack.coordination},
        {"injection_strength", pop.attack.injection_strength},
        {"timing_mode", to_string(pop.attack.timing_mode)}}},
      {"behavior",
       {{"trade_size", b.trade_size},
        {"lp_trade_size", b.lp_trade_size},
        {"attack_size", b.attack_size},
        {"arb_sensitivity", b.arb_sensitivity},
        {"arb_threshold", b.arb_threshold},
        {"stress_threshold", b.stress_threshold},
        {"lp_withdraw_panic", b.lp_withdraw_panic},
        {"lp_withdraw_fraction", b.lp_withdraw_fraction},
        {"max_qty", b.max_qty},
        {"home_share", b.home_share},
        {"panic_bias", b.panic_bias},
        {"panic_peg", b.panic_peg},
        {"panic_sentiment", b.panic_sentiment},
        {"panic_volatility", b.panic_volatility},
        {"panic_shortfall", b.panic_shortfall}}}};
  j["controller"] = {{"risk_aversion", ctl.risk_aversion},
                     {"turnover_limit", ctl.turnover_limit},
                     {"weight_min", ctl.weight_min},
                     {"weight_max", ctl.weight_max},
                     {"expected_returns", vec_json(ctl.expected_returns)},
                     {"horizon", ctl.horizon},
                     {"epoch_length", ctl.epoch_length},
                     {"epsilon", ctl.epsilon},
                     {"stress",
                      {{"n_runs", ctl.stress.n_runs},
                       {"horizon", ctl.stress.horizon},
                       {"drawdown_min", ctl.stress.drawdown_min},
                       {"drawdown_max", ctl.stress.drawdown_max},
                       {"sentiment_target", ctl.stress.sentiment_target},
                       {"withdrawal_max", ctl.stress.withdrawal_max},
                       {"jobs", ctl.stress.jobs}}}};
  j["trust"] = {{"weights", vec_json(ctl.trust.weights)},
                {"bias", ctl.trust.bias},
                {"window", ctl.trust.window},
                {"embed_dim", ctl.trust.embed_dim},
                {"threshold", ctl.trust.threshold}};
  return j;
}

AppConfig app_config_from_json(const json& patch) {
  json merged = to_json(AppConfig::defaults());
  overlay(merged, patch, "");

  const Reader r(merged, "");
  AppConfig c;
  c.seed = r.uint("seed");
  c.runs = r.integer("runs");
  c.jobs = r.integer("jobs");
  c.methods.clear();
  for (const auto& s : r.strings("methods")) {
    try {
      c.methods.push_back(method_from_string(s));
    } catch (const InvalidInput& e) {
      r.fail("methods", e.what());
    }
  }
  c.shocks.clear();
  for (const auto& s : r.strings("shocks")) {
    try {
      c.shocks.push_back(shock_kind_from_string(s));
    } catch (const InvalidInput& e) {
      r.fail("shocks", e.what());
    }
  }
  if (!r.is_null("rho")) c.rho = r.num("rho");
  if (!r.is_null("historical_covariance_csv")) c.historical_covariance_csv = r.str("historical_covariance_csv");

  const Reader sh = r.child("shock");
  c.shock.injection_step = sh.integer("injection_step");
  c.shock.price_drawdown = sh.num("price_drawdown");
  c.shock.black_thursday_drawdown = sh.num("black_thursday_drawdown");
  c.shock.sentiment_target = sh.num("sentiment_target");
  c.shock.liquidity_withdrawal = sh.num("liquidity_withdrawal");

  auto& m = c.sim.market;
  const Reader mk = r.child("market");
  m.asset_names = mk.strings("asset_names");
  m.reversion = mk.num("reversion");
  m.impact = mk.num("impact");
  m.noise_sd = mk.num("noise_sd");
  m.sentiment_memory = mk.num("sentiment_memory");
  m.backing_passthrough = mk.num("backing_passthrough");
  m.calm_covariance = mk.mat("calm_covariance");
  m.stress_vol_multiplier = mk.vec("stress_vol_multiplier");
  m.stress_correlation = mk.num("stress_correlation");
  m.stress_duration = mk.integer("stress_duration");
  m.shock_loading = mk.vec("shock_loading");
  m.price_anchor = mk.vec("price_anchor");
  m.price_reversion = mk.num("price_reversion");
  m.shock_persistence = mk.num("shock_persistence");
  m.asset_impact = mk.num("asset_impact");
  m.vol_ewma = mk.num("vol_ewma");
  m.steps_per_year = mk.num("steps_per_year");
  m.initial_liquidity = mk.num("initial_liquidity");
  m.initial_supply = mk.num("initial_supply");
  m.initial_collateral_ratio = mk.num("initial_collateral_ratio");
  m.news_shock_duration = mk.integer("news_shock_duration");

  auto& pop = c.sim.population;
  const Reader p = r.child("population");
  pop.traders = p.integer("traders");
  pop.liquidity_providers = p.integer("liquidity_providers");
  pop.arbitrageurs = p.integer("arbitrageurs");
  pop.attackers = p.integer("attackers");
  const Reader at = p.child("attack");
  pop.attack.coordination = at.num("coordination");
  pop.attack.injection_strength = at.num("injection_strength");
  pop.attack.timing_mode = at.parse("timing_mode", timing_mode_from_string);
  const Reader bh = p.child("behavior");
  auto& b = pop.behavior;
  b.trade_size = bh.num("trade_size");
  b.lp_trade_size = bh.num("lp_trade_size");
  b.attack_size = bh.num("attack_size");
  b.arb_sensitivity = bh.num("arb_sensitivity");
  b.arb_threshold = bh.num("arb_threshold");
  b.stress_threshold = bh.num("stress_threshold");
  b.lp_withdraw_panic = bh.num("lp_withdraw_panic");
  b.lp_withdraw_fraction = bh.num("lp_withdraw_fraction");
  b.max_qty = bh.num("max_qty");
  b.home_share = bh.num("home_share");
  b.panic_bias = bh.num("panic_bias");
  b.panic_peg = bh.num("panic_peg");
  b.panic_sentiment = bh.num("panic_sentiment");
  b.panic_volatility = bh.num("panic_volatility");
  b.panic_shortfall = bh.num("panic_shortfall");

  auto& ctl = c.sim.controller;
  const Reader cr = r.child("controller");
  ctl.risk_aversion = cr.num("risk_aversion");
  ctl.turnover_limit = cr.num("turnover_limit");
  ctl.weight_min = cr.num("weight_min");
  ctl.weight_max = cr.num("weight_max");
  ctl.expected_returns = cr.vec("expected_returns");
  ctl.horizon = cr.integer("horizon");
  ctl.epoch_length = cr.integer("epoch_length");
  ctl.epsilon = cr.num("epsilon");
  const Reader st = cr.child("stress");
  ctl.stress.n_runs = st.integer("n_runs");
  ctl.stress.horizon = st.integer("horizon");
  ctl.stress.drawdown_min = st.num("drawdown_min");
  ctl.stress.drawdown_max = st.num("drawdown_max");
  ctl.stress.sentiment_target = st.num("sentiment_target");
  ctl.stress.withdrawal_max = st.num("withdrawal_max");
  ctl.stress.jobs = st.integer("jobs");

  const Reader tr = r.child("trust");
  const Vector w = tr.vec("weights");
  if (w.size() != 4) tr.fail("weights", "expected 4 numbers");
  ctl.trust.weights = w;
  ctl.trust.bias = tr.num("bias");
  ctl.trust.window = tr.integer("window");
  ctl.trust.embed_dim = tr.integer("embed_dim");
  ctl.trust.threshold = tr.num("threshold");
  return c;
}

void apply_env_overrides(json& j, const std::map<std::string, std::string>& env,
                         const std::string& prefix) {
  for (const auto& [name, value] : env) {
    if (name.rfind(prefix, 0) != 0) continue;
    std::vector<std::string> path;
    std::string rest = lower(name.substr(prefix.size()));
    for (std::size_t pos; (pos = rest.find("__")) != std::string::npos; rest = rest.substr(pos + 2)) {
      path.push_back(rest.substr(0, pos));
    }
    path.push_back(rest);
    json* node = &j;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      if (!node->contains(path[i]) || !(*node)[path[i]].is_object()) {
        throw ConfigError(name + ": no config section '" + path[i] + "'");
      }
      node = &(*node)[path[i]];
    }
    const json parsed = json::parse(value, nullptr, false);
    (*node)[path.back()] = parsed.is_discarded() ? json(value) : parsed;
  }
}

std::map<std::string, std::string> current_environment() {
  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    const std::string entry(*e);
    const auto eq = entry.find('=');
    if (eq != std::string::npos) env.emplace(entry.substr(0, eq), entry.substr(eq + 1));
  }
  return env;
}

AppConfig load_config(const std::optional<std::string>& path,
                      const std::map<std::string, std::string>& env) {
  json patch = json::object();
  std::filesystem::path base_dir = std::filesystem::current_path();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot open config file '" + *path + "'");
    patch = json::parse(in, nullptr, false, true);
    if (patch.is_discarded()) throw ConfigError("config file '" + *path + "' is not valid JSON");
    base_dir = std::filesystem::path(*path).parent_path();
  }
  // Overrides address the merged tree so any default key can be set.
  json merged = to_json(AppConfig::defaults());
  overlay(merged, patch, "");
  apply_env_overrides(merged, env);
  AppConfig config = app_config_from_json(merged);
  if (config.historical_covariance_csv) {
    std::filesystem::path csv(*config.historical_covariance_csv);
    if (csv.is_relative()) csv = base_dir / csv;
    std::ifstream in(csv);
    if (!in) throw ConfigError("historical_covariance_csv: cannot open '" + csv.string() + "'");
    try {
      config.sim.hist_cov = read_covariance_csv(in);
    } catch (const InvalidInput& e) {
      throw ConfigError(std::string("historical_covariance_csv: ") + e.what());
    }
  }
  config.validate();
  return config;
}

}  // namespace stablesim
