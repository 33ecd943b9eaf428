#include "stablesim/agents.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stablesim/errors.hpp"

namespace stablesim {
namespace {

double clip(double x, double lo, double hi) { return std::clamp(x, lo, hi); }
double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }
bool in_unit(double x) { return x >= 0.0 && x <= 1.0; }

int draw_asset(Rng& rng, std::size_t n_assets) {
  const auto n = static_cast<int>(n_assets);
  return std::min(n - 1, static_cast<int>(uniform01(rng) * n));
}

// Benign agents trade their home asset most of the time.
int draw_asset(Rng& rng, std::size_t n_assets, int home, double home_share) {
  const double u = uniform01(rng);
  const int other = draw_asset(rng, n_assets);
  return u < home_share ? home : other;
}

AgentRecord base_record(const AgentId& id, const MarketState& state) {
  AgentRecord r;
  r.agent = id;
  r.step = state.step;
  return r;
}

double peg_confidence_from(const MarketState& state, double panic) {
  return clip(1.0 - 20.0 * std::abs(state.peg_deviation) - 0.5 * panic, 0.0, 1.0);
}

class Trader final : public AgentPolicy {
 public:
  Trader(AgentId id, BehaviorParams params, std::size_t n_assets, std::uint64_t seed,
         double risk_appetite, double bias, double sensitivity, int home)
      : AgentPolicy(id), params_(params), n_assets_(n_assets), rng_(seed),
        risk_appetite_(risk_appetite), bias_(bias), sensitivity_(sensitivity), home_(home) {}

  AgentRecord act(const MarketState& state, const NewsEvent& news) override {
    const double view_noise = standard_normal(rng_);
    const double trade_noise = standard_normal(rng_);
    const int asset = draw_asset(rng_, n_assets_, home_, params_.home_share);

    AgentRecord r = base_record(id_, state);
    r.panic_level = panic_level(state, params_, sensitivity_);
    r.risk_appetite = risk_appetite_;
    r.peg_confidence = peg_confidence_from(state, r.panic_level);
    const double view = 0.6 * state.sentiment + 0.4 * news.polarity + bias_ + 0.25 * view_noise -
                        0.5 * r.panic_level;
    r.stated_sentiment = clip(view, -1.0, 1.0);
    const double size = params_.trade_size * (0.5 + risk_appetite_);
    r.quantity = -size * (r.stated_sentiment + 0.3 * trade_noise);
    r.asset = asset;
    r.action_type = r.quantity > 0.0 ? ActionType::Sell : ActionType::Buy;
    r.rationale = r.quantity > 0.0 ? "bearish view, reducing exposure" : "bullish view, adding exposure";
    return r;
  }

  std::unique_ptr<AgentPolicy> clone() const override { return std::make_unique<Trader>(*this); }
  void reseed(std::uint64_t seed) override { rng_.seed(seed); }

 private:
  BehaviorParams params_;
  std::size_t n_assets_;
  Rng rng_;
  double risk_appetite_;
  double bias_;
  double sensitivity_;
  int home_;
};

class LiquidityProvider final : public AgentPolicy {
 public:
  LiquidityProvider(AgentId id, BehaviorParams params, std::size_t n_assets, std::uint64_t seed,
                    double stake, double withdraw_panic, double sensitivity, int home)
      : AgentPolicy(id), params_(params), n_assets_(n_assets), rng_(seed), stake_(stake),
        withdraw_panic_(withdraw_panic), sensitivity_(sensitivity), home_(home) {}

  AgentRecord act(const MarketState& state, const NewsEvent& news) override {
    const double view_noise = standard_normal(rng_);
    const double trade_noise = standard_normal(rng_);
    const int asset = draw_asset(rng_, n_assets_, home_, params_.home_share);

    AgentRecord r = base_record(id_, state);
    r.asset = asset;
    r.panic_level = panic_level(state, params_, sensitivity_);
    r.risk_appetite = 0.3;
    r.peg_confidence = peg_confidence_from(state, r.panic_level);

    if (r.panic_level > withdraw_panic_ && stake_ > 0.0) {
      const double amount = std::min(stake_, params_.lp_withdraw_fraction * state.pool_liquidity);
      stake_ -= amount;
      r.action_type = ActionType::Withdraw;
      r.quantity = amount;
      r.stated_sentiment = clip(-r.panic_level + 0.1 * view_noise, -1.0, 1.0);
      r.rationale = "stress elevated, pulling pool liquidity";
      return r;
    }
    const double view = 0.5 * state.sentiment + 0.5 * news.polarity + 0.25 * view_noise;
    r.stated_sentiment = clip(view, -1.0, 1.0);
    r.quantity = -params_.lp_trade_size * (r.stated_sentiment + 0.35 * trade_noise);
    r.action_type = r.quantity > 0.0 ? ActionType::Sell : ActionType::Buy;
    r.rationale = "rebalancing pool inventory";
    return r;
  }

  std::unique_ptr<AgentPolicy> clone() const override {
    return std::make_unique<LiquidityProvider>(*this);
  }
  void reseed(std::uint64_t seed) override { rng_.seed(seed); }

 private:
  BehaviorParams params_;
  std::size_t n_assets_;
  Rng rng_;
  double stake_;
  double withdraw_panic_;
  double sensitivity_;
  int home_;
};

class Arbitrageur final : public AgentPolicy {
 public:
  Arbitrageur(AgentId id, BehaviorParams params, std::size_t n_assets, std::uint64_t seed)
      : AgentPolicy(id), params_(params), n_assets_(n_assets), rng_(seed) {}

  AgentRecord act(const MarketState& state, const NewsEvent&) override {
    const double size_noise = standard_normal(rng_);
    const double view_noise = standard_normal(rng_);
    const int asset = draw_asset(rng_, n_assets_);

    AgentRecord r = base_record(id_, state);
    r.asset = asset;
    r.panic_level = panic_level(state, params_, 0.5);
    r.risk_appetite = 0.6;
    r.peg_confidence = peg_confidence_from(state, r.panic_level);

    const double d = state.peg_deviation;
    if (std::abs(d) < params_.arb_threshold) {
      r.action_type = ActionType::Hold;
      r.quantity = 0.0;
      r.stated_sentiment = 0.0;
      r.rationale = "spread below costs";
      return r;
    }
    const double size = params_.arb_sensitivity * std::abs(d) * state.pool_liquidity *
                        std::max(0.2, 1.0 + 0.3 * size_noise);
    // Above peg: mint and sell. Below peg: buy and redeem.
    r.action_type = d > 0.0 ? ActionType::Mint : ActionType::Redeem;
    r.quantity = d > 0.0 ? size : -size;
    r.stated_sentiment = clip(-40.0 * d + 0.1 * view_noise, -1.0, 1.0);
    r.rationale = d > 0.0 ? "premium over peg, minting" : "discount to peg, redeeming";
    return r;
  }

  std::unique_ptr<AgentPolicy> clone() const override {
    return std::make_unique<Arbitrageur>(*this);
  }
  void reseed(std::uint64_t seed) override { rng_.seed(seed); }

 private:
  BehaviorParams params_;
  std::size_t n_assets_;
  Rng rng_;
};

struct TemplateAction {
  ActionType type = ActionType::Hold;
  int asset = 0;
  double quantity = 0.0;
};

// Camouflage action: hold, or a small trade in either direction.
TemplateAction draw_camouflage(Rng& rng, std::size_t n_assets, double attack_size) {
  const double u_type = uniform01(rng);
  const double u_size = uniform01(rng);
  const int asset = draw_asset(rng, n_assets);
  TemplateAction t;
  t.asset = asset;
  if (u_type < 0.4) return t;
  const double size = attack_size * (0.1 + 0.2 * u_size);
  t.type = u_type < 0.7 ? ActionType::Buy : ActionType::Sell;
  t.quantity = t.type == ActionType::Sell ? size : -size;
  return t;
}

class Attacker final : public AgentPolicy {
 public:
  Attacker(AgentId id, BehaviorParams params, AttackConfig attack, std::size_t n_assets,
           std::uint64_t seed, std::uint64_t template_seed)
      : AgentPolicy(id), params_(params), attack_(attack), n_assets_(n_assets), rng_(seed),
        template_seed_(template_seed) {}

  AgentRecord act(const MarketState& state, const NewsEvent&) override {
    const double u_copy = uniform01(rng_);
    const double report_noise = standard_normal(rng_);
    const TemplateAction own = draw_camouflage(rng_, n_assets_, params_.attack_size);

    Rng shared(derive_seed(template_seed_, {static_cast<std::uint64_t>(state.step)}));
    TemplateAction shared_action = draw_camouflage(shared, n_assets_, params_.attack_size);

    const double abs_peg = std::abs(state.peg_deviation);
    const bool attacking = engaged(state, abs_peg);
    prev_abs_peg_ = abs_peg;
    if (attacking) {
      shared_action.type = ActionType::Sell;
      shared_action.quantity = params_.attack_size;
    }

    const TemplateAction& a = (attacking || u_copy < attack_.coordination) ? shared_action : own;
    AgentRecord r = base_record(id_, state);
    r.action_type = a.type;
    r.asset = a.asset;
    r.quantity = a.quantity;

    const double s = attack_.injection_strength;
    const double honest = r.quantity > 0.0 ? -0.6 : (r.quantity < 0.0 ? 0.6 : 0.0);
    r.stated_sentiment = clip((1.0 - 2.0 * s) * honest + 0.4 * report_noise, -1.0, 1.0);
    const double true_panic = panic_level(state, params_);
    r.panic_level = true_panic * (1.0 - s);
    r.risk_appetite = 0.9;
    r.peg_confidence = clip(peg_confidence_from(state, r.panic_level) + s * 0.5, 0.0, 1.0);
    r.rationale = attacking ? "taking profit into weakness" : "routine position management";
    return r;
  }

  std::unique_ptr<AgentPolicy> clone() const override { return std::make_unique<Attacker>(*this); }
  void reseed(std::uint64_t seed) override { rng_.seed(seed); }

 private:
  bool engaged(const MarketState& state, double abs_peg) const {
    const bool falling = state.peg_deviation < 0.0;
    const bool rising = std::isfinite(prev_abs_peg_) && abs_peg > prev_abs_peg_;
    switch (attack_.timing_mode) {
      case TimingMode::Always: return falling;
      case TimingMode::OnStress: return falling && rising && abs_peg > params_.stress_threshold;
      case TimingMode::PreShock:
        return attack_.shock_step && state.step >= *attack_.shock_step - 5 &&
               state.step < *attack_.shock_step;
    }
    return false;
  }

  BehaviorParams params_;
  AttackConfig attack_;
  std::size_t n_assets_;
  Rng rng_;
  std::uint64_t template_seed_;
  double prev_abs_peg_ = std::numeric_limits<double>::quiet_NaN();
};

}  // namespace

std::string to_string(Archetype a) {
  switch (a) {
    case Archetype::Trader: return "Trader";
    case Archetype::LiquidityProvider: return "LiquidityProvider";
    case Archetype::Arbitrageur: return "Arbitrageur";
    case Archetype::Attacker: return "Attacker";
  }
  return "Trader";
}

std::string to_string(ActionType a) {
  switch (a) {
    case ActionType::Buy: return "Buy";
    case ActionType::Sell: return "Sell";
    case ActionType::Hold: return "Hold";
    case ActionType::Withdraw: return "Withdraw";
    case ActionType::Mint: return "Mint";
    case ActionType::Redeem: return "Redeem";
  }
  return "Hold";
}

std::string to_string(TimingMode m) {
  switch (m) {
    case TimingMode::Always: return "Always";
    case TimingMode::OnStress: return "OnStress";
    case TimingMode::PreShock: return "PreShock";
  }
  return "OnStress";
}

Archetype archetype_from_string(const std::string& s) {
  for (Archetype a : {Archetype::Trader, Archetype::LiquidityProvider, Archetype::Arbitrageur,
                      Archetype::Attacker}) {
    if (to_string(a) == s) return a;
  }
  throw InvalidInput("unknown archetype '" + s + "'");
}

ActionType action_type_from_string(const std::string& s) {
  for (ActionType a : {ActionType::Buy, ActionType::Sell, ActionType::Hold, ActionType::Withdraw,
                       ActionType::Mint, ActionType::Redeem}) {
    if (to_string(a) == s) return a;
  }
  throw InvalidInput("unknown action_type '" + s + "'");
}

TimingMode timing_mode_from_string(const std::string& s) {
  for (TimingMode m : {TimingMode::Always, TimingMode::OnStress, TimingMode::PreShock}) {
    if (to_string(m) == s) return m;
  }
  throw InvalidInput("unknown timing_mode '" + s + "'");
}

void AgentRecord::validate() const {
  if (!in_unit(panic_level) || !in_unit(risk_appetite) || !in_unit(peg_confidence)) {
    throw InvalidInput("panic_level, risk_appetite and peg_confidence must lie in [0,1]");
  }
  if (!(stated_sentiment >= -1.0 && stated_sentiment <= 1.0)) {
    throw InvalidInput("stated_sentiment must lie in [-1,1]");
  }
  if (!std::isfinite(quantity)) throw InvalidInput("quantity must be finite");
  if (agent.adversarial != (agent.archetype == Archetype::Attacker)) {
    throw InvalidInput("adversarial label must match the Attacker archetype");
  }
}

void AttackConfig::validate() const {
  if (!in_unit(coordination)) throw InvalidInput("coordination must lie in [0,1]");
  if (!in_unit(injection_strength)) throw InvalidInput("injection_strength must lie in [0,1]");
}

void BehaviorParams::validate() const {
  if (trade_size < 0.0 || lp_trade_size < 0.0 || attack_size < 0.0) {
    throw InvalidInput("trade sizes must be non-negative");
  }
  if (max_qty <= 0.0) throw InvalidInput("max_qty must be positive");
  if (arb_sensitivity < 0.0 || arb_threshold < 0.0 || stress_threshold < 0.0) {
    throw InvalidInput("arbitrage and stress thresholds must be non-negative");
  }
  if (!in_unit(lp_withdraw_panic) || !in_unit(lp_withdraw_fraction)) {
    throw InvalidInput("LP withdrawal panic and fraction must lie in [0,1]");
  }
  if (!in_unit(home_share)) throw InvalidInput("home_share must lie in [0,1]");
}

double panic_level(const MarketState& state, const BehaviorParams& p, double sensitivity) {
  const double shortfall = std::max(0.0, 1.0 - state.collateral_ratio());
  const double stress = p.panic_peg * std::abs(state.peg_deviation) +
                        p.panic_sentiment * (-state.sentiment) +
                        p.panic_volatility * state.volatility + p.panic_shortfall * shortfall;
  return logistic(p.panic_bias + sensitivity * stress);
}

Population::Population(const Population& other) {
  agents_.reserve(other.agents_.size());
  for (const auto& a : other.agents_) agents_.push_back(a->clone());
}

Population& Population::operator=(const Population& other) {
  if (this != &other) {
    Population copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void Population::add(std::unique_ptr<AgentPolicy> policy) {
  if (!policy) throw InvalidInput("null agent policy");
  agents_.push_back(std::move(policy));
}

std::vector<AgentId> Population::ids() const {
  std::vector<AgentId> out;
  out.reserve(agents_.size());
  for (const auto& a : agents_) out.push_back(a->id());
  return out;
}

std::vector<bool> Population::adversarial_labels() const {
  std::vector<bool> out;
  out.reserve(agents_.size());
  for (const auto& a : agents_) out.push_back(a->id().adversarial);
  return out;
}

std::vector<AgentRecord> Population::act(const MarketState& state, const NewsEvent& news) {
  std::vector<AgentRecord> out;
  out.reserve(agents_.size());
  for (auto& a : agents_) out.push_back(a->act(state, news));
  return out;
}

void Population::reseed(std::uint64_t seed) {
  for (auto& a : agents_) {
    a->reseed(derive_seed(seed, {static_cast<std::uint64_t>(a->id().index)}));
  }
}

int PopulationSpec::attackers_for_fraction(double rho, int benign) {
  if (!(rho >= 0.0 && rho < 1.0)) throw InvalidInput("adversarial fraction must lie in [0,1)");
  if (benign < 0) throw InvalidInput("benign count must be non-negative");
  return static_cast<int>(std::lround(rho * benign / (1.0 - rho)));
}

Population spawn_population(const PopulationSpec& spec, std::uint64_t seed,
                            const MarketParams& market) {
  if (spec.traders < 0 || spec.liquidity_providers < 0 || spec.arbitrageurs < 0 ||
      spec.attackers < 0) {
    throw InvalidInput("agent counts must be non-negative");
  }
  spec.attack.validate();
  spec.behavior.validate();
  const std::size_t n_assets = market.n_assets();
  Rng profiles(derive_seed(seed, {0x70726F66ULL}));
  const std::uint64_t template_seed = derive_seed(seed, {0x74706CULL});

  Population pop;
  int index = 0;
  auto agent_seed = [&](int i) { return derive_seed(seed, {static_cast<std::uint64_t>(i)}); };
  for (int k = 0; k < spec.traders; ++k, ++index) {
    const double appetite = 0.2 + 0.7 * uniform01(profiles);
    const double bias = 0.1 * (2.0 * uniform01(profiles) - 1.0);
    const double sensitivity = 0.8 + 0.4 * uniform01(profiles);
    const int home = draw_asset(profiles, n_assets);
    pop.add(std::make_unique<Trader>(AgentId::make(index, Archetype::Trader), spec.behavior,
                                     n_assets, agent_seed(index), appetite, bias, sensitivity, home));
  }
  const double lp_stake = spec.liquidity_providers > 0
                              ? 0.3 * market.initial_liquidity / spec.liquidity_providers
                              : 0.0;
  for (int k = 0; k < spec.liquidity_providers; ++k, ++index) {
    const double threshold = std::min(1.0, spec.behavior.lp_withdraw_panic + 0.1 * uniform01(profiles));
    const double sensitivity = 0.8 + 0.4 * uniform01(profiles);
    const int home = draw_asset(profiles, n_assets);
    pop.add(std::make_unique<LiquidityProvider>(AgentId::make(index, Archetype::LiquidityProvider),
                                                spec.behavior, n_assets, agent_seed(index),
                                                lp_stake, threshold, sensitivity, home));
  }
  for (int k = 0; k < spec.arbitrageurs; ++k, ++index) {
    pop.add(std::make_unique<Arbitrageur>(AgentId::make(index, Archetype::Arbitrageur),
                                          spec.behavior, n_assets, agent_seed(index)));
  }
  for (int k = 0; k < spec.attackers; ++k, ++index) {
    pop.add(std::make_unique<Attacker>(AgentId::make(index, Archetype::Attacker), spec.behavior,
                                       spec.attack, n_assets, agent_seed(index), template_seed));
  }
  return pop;
}

Population spawn_population(int n_traders, int n_lps, int n_arbs, int n_attackers,
                            std::uint64_t seed) {
  PopulationSpec spec;
  spec.traders = n_traders;
  spec.liquidity_providers = n_lps;
  spec.arbitrageurs = n_arbs;
  spec.attackers = n_attackers;
  return spawn_population(spec, seed, MarketParams::defaults());
}

OrderFlow order_flow(std::span<const AgentRecord> records, std::size_t n_assets) {
  OrderFlow flow = OrderFlow::zero(n_assets);
  for (const AgentRecord& r : records) {
    if (r.asset < 0 || static_cast<std::size_t>(r.asset) >= n_assets) {
      throw InvalidInput("record asset index out of range");
    }
    switch (r.action_type) {
      case ActionType::Buy:
      case ActionType::Sell: flow.net_sell[r.asset] += r.quantity; break;
      case ActionType::Mint:
      case ActionType::Redeem:
        flow.net_sell[r.asset] += r.quantity;
        flow.minted += r.quantity;
        break;
      case ActionType::Withdraw: flow.lp_withdrawal += std::abs(r.quantity); break;
      case ActionType::Hold: break;
    }
  }
  return flow;
}

double realized_pnl(const AgentRecord& record, double peg_now, double peg_next,
                    double pool_liquidity, double impact) {
  const double position = record.position_change();
  switch (record.action_type) {
    case ActionType::Buy:
    case ActionType::Sell: {
      const double cost = pool_liquidity > 0.0 ? impact * position * position / pool_liquidity : 0.0;
      return position * (peg_next - peg_now) - cost;
    }
    // Mint-and-sell or buy-and-redeem fills at the next step's price.
    case ActionType::Mint: return std::abs(record.quantity) * peg_next;
    case ActionType::Redeem: return -std::abs(record.quantity) * peg_next;
    case ActionType::Hold:
    case ActionType::Withdraw: return 0.0;
  }
  return 0.0;
}

FeatureEnvelope expected_feature_envelope(Archetype archetype) {
  switch (archetype) {
    case Archetype::Trader: return {{0.5, 0.9}, {0.6, 0.9}, {0.1, 0.3}, {-0.1, 0.2}};
    case Archetype::LiquidityProvider: return {{0.4, 0.8}, {0.7, 0.95}, {0.15, 0.35}, {-0.2, 0.15}};
    case Archetype::Arbitrageur: return {{0.6, 0.95}, {0.8, 0.98}, {0.2, 0.4}, {-0.3, 0.1}};
    case Archetype::Attacker: return {{-0.3, 0.3}, {0.2, 0.5}, {0.5, 0.9}, {0.4, 0.85}};
  }
  return {};
}

std::optional<AgentRecord> parse_agent_response(const nlohmann::json& response, const AgentId& id,
                                                int step, std::size_t n_assets) {
  if (!response.is_object()) return std::nullopt;
  for (const char* key : {"action_type", "asset", "quantity", "rationale", "panic_level",
                          "peg_confidence"}) {
    if (!response.contains(key)) return std::nullopt;
  }
  const auto& type = response["action_type"];
  const auto& asset = response["asset"];
  const auto& quantity = response["quantity"];
  if (!type.is_string() || !asset.is_number_integer() || !quantity.is_number() ||
      !response["rationale"].is_string() || !response["panic_level"].is_number() ||
      !response["peg_confidence"].is_number()) {
    return std::nullopt;
  }
  AgentRecord r;
  r.agent = id;
  r.step = step;
  try {
    r.action_type = action_type_from_string(type.get<std::string>());
  } catch (const InvalidInput&) {
    return std::nullopt;
  }
  const auto a = asset.get<long long>();
  if (a < 0 || static_cast<unsigned long long>(a) >= n_assets) return std::nullopt;
  r.asset = static_cast<int>(a);
  r.quantity = quantity.get<double>();
  r.rationale = response["rationale"].get<std::string>();
  r.panic_level = response["panic_level"].get<double>();
  r.peg_confidence = response["peg_confidence"].get<double>();
  r.risk_appetite = 0.5;
  for (const char* key : {"risk_appetite", "stated_sentiment"}) {
    if (response.contains(key) && !response[key].is_number()) return std::nullopt;
  }
  if (response.contains("risk_appetite")) r.risk_appetite = response["risk_appetite"].get<double>();
  if (response.contains("stated_sentiment")) {
    r.stated_sentiment = response["stated_sentiment"].get<double>();
  }
  try {
    r.validate();
  } catch (const InvalidInput&) {
    return std::nullopt;
  }
  // Direction must agree with the action.
  switch (r.action_type) {
    case ActionType::Hold:
      if (r.quantity != 0.0) return std::nullopt;
      break;
    case ActionType::Buy:
    case ActionType::Redeem:
      if (r.quantity > 0.0) return std::nullopt;
      break;
    case ActionType::Sell:
    case ActionType::Mint:
    case ActionType::Withdraw:
      if (r.quantity < 0.0) return std::nullopt;
      break;
  }
  return r;
}

ExternalAgent::ExternalAgent(AgentId id, AgentResponder responder, std::size_t n_assets)
    : AgentPolicy(id), responder_(std::move(responder)), n_assets_(n_assets) {
  if (!responder_) throw InvalidInput("external agent needs a responder");
}

AgentRecord ExternalAgent::act(const MarketState& state, const NewsEvent& news) {
  std::optional<AgentRecord> parsed;
  try {
    parsed = parse_agent_response(responder_(state, news), id_, state.step, n_assets_);
  } catch (const std::exception&) {
    parsed.reset();
  }
  if (parsed) return *parsed;
  ++fallbacks_;
  AgentRecord hold = base_record(id_, state);
  hold.rationale = "fallback: malformed response";
  return hold;
}

std::unique_ptr<AgentPolicy> ExternalAgent::clone() const {
  return std::make_unique<ExternalAgent>(*this);
}

nlohmann::json to_json(const AgentRecord& r) {
  return nlohmann::json{{"agent", r.agent.index},
                        {"archetype", to_string(r.agent.archetype)},
                        {"adversarial", r.agent.adversarial},
                        {"step", r.step},
                        {"action_type", to_string(r.action_type)},
                        {"asset", r.asset},
                        {"quantity", r.quantity},
                        {"rationale", r.rationale},
                        {"panic_level", r.panic_level},
                        {"risk_appetite", r.risk_appetite},
                        {"peg_confidence", r.peg_confidence},
                        {"stated_sentiment", r.stated_sentiment}};
}

AgentRecord agent_record_from_json(const nlohmann::json& j) {
  try {
    AgentRecord r;
    r.agent = AgentId::make(j.at("agent").get<int>(),
                            archetype_from_string(j.at("archetype").get<std::string>()));
    r.step = j.at("step").get<int>();
    r.action_type = action_type_from_string(j.at("action_type").get<std::string>());
    r.asset = j.at("asset").get<int>();
    r.quantity = j.at("quantity").get<double>();
    r.rationale = j.at("rationale").get<std::string>();
    r.panic_level = j.at("panic_level").get<double>();
    r.risk_appetite = j.at("risk_appetite").get<double>();
    r.peg_confidence = j.at("peg_confidence").get<double>();
    r.stated_sentiment = j.at("stated_sentiment").get<double>();
    r.validate();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed agent record: ") + e.what());
  }
}

}  // namespace stablesim
