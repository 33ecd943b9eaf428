#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stablesim/market.hpp"
#include "stablesim/random.hpp"

namespace stablesim {

enum class Archetype { Trader, LiquidityProvider, Arbitrageur, Attacker };
enum class ActionType { Buy, Sell, Hold, Withdraw, Mint, Redeem };
enum class TimingMode { Always, OnStress, PreShock };

std::string to_string(Archetype a);
std::string to_string(ActionType a);
std::string to_string(TimingMode m);
Archetype archetype_from_string(const std::string& s);
ActionType action_type_from_string(const std::string& s);
TimingMode timing_mode_from_string(const std::string& s);

struct AgentId {
  int index = 0;
  Archetype archetype = Archetype::Trader;
  bool adversarial = false;  // ground truth; true iff archetype == Attacker

  static AgentId make(int index, Archetype archetype) {
    return AgentId{index, archetype, archetype == Archetype::Attacker};
  }
  friend bool operator==(const AgentId&, const AgentId&) = default;
};

/// One agent-step: action tuple plus psychology state.
struct AgentRecord {
  AgentId agent;
  int step = 0;
  ActionType action_type = ActionType::Hold;
  int asset = 0;
  double quantity = 0.0;  // signed capital; positive is sell pressure on the stablecoin
  std::string rationale;
  double panic_level = 0.0;
  double risk_appetite = 0.0;
  double peg_confidence = 1.0;
  double stated_sentiment = 0.0;

  /// Net position change in the stablecoin (buys positive).
  double position_change() const noexcept { return -quantity; }
  void validate() const;
  bool operator==(const AgentRecord&) const = default;
};

/// Parameters shared by every attacker in a population.
struct AttackConfig {
  double coordination = 1.0;         // probability of copying the shared template action
  double injection_strength = 0.5;   // 0 = honest reports, 0.5 = reports carry no signal
  TimingMode timing_mode = TimingMode::OnStress;
  std::optional<int> shock_step;     // known injection step, used by PreShock timing

  void validate() const;
};

/// Calibration constants of the mock policies. Quantities are in capital units.
struct BehaviorParams {
  double trade_size = 4000.0;
  double lp_trade_size = 2500.0;
  double attack_size = 6000.0;
  double arb_sensitivity = 0.3;       // arbitrage quantity per unit of (|peg| x pool liquidity)
  double arb_threshold = 5.0e-4;      // |peg| below which arbitrage is not worth it
  double stress_threshold = 0.01;     // |peg| above which OnStress attackers engage
  double lp_withdraw_panic = 0.55;
  double lp_withdraw_fraction = 0.04; // of pool liquidity per withdrawing LP
  double max_qty = 10000.0;           // normalizer for the action-size risk term
  double home_share = 0.0;            // share of benign trades in the agent's home asset

  // Panic: logistic(bias + peg*|d| + sentiment*(-theta) + volatility*vol + shortfall*(1-CR)+).
  double panic_bias = -3.0;
  double panic_peg = 120.0;
  double panic_sentiment = 2.2;
  double panic_volatility = 2.0;
  double panic_shortfall = 25.0;

  void validate() const;
};

/// Logistic stress response in (|peg|, -sentiment, volatility, collateral shortfall).
double panic_level(const MarketState& state, const BehaviorParams& params, double sensitivity = 1.0);

/// A per-agent decision rule. Policies own their random stream and any memory.
class AgentPolicy {
 public:
  explicit AgentPolicy(AgentId id) : id_(id) {}
  virtual ~AgentPolicy() = default;

  const AgentId& id() const noexcept { return id_; }
  virtual AgentRecord act(const MarketState& state, const NewsEvent& news) = 0;
  virtual std::unique_ptr<AgentPolicy> clone() const = 0;
  /// Restarts the policy's random stream; memory is kept.
  virtual void reseed(std::uint64_t seed) = 0;

 protected:
  AgentId id_;
};

/// A population with value semantics (copies deep-clone every policy).
class Population {
 public:
  Population() = default;
  Population(const Population& other);
  Population& operator=(const Population& other);
  Population(Population&&) noexcept = default;
  Population& operator=(Population&&) noexcept = default;

  void add(std::unique_ptr<AgentPolicy> policy);
  std::size_t size() const noexcept { return agents_.size(); }
  bool empty() const noexcept { return agents_.empty(); }
  AgentPolicy& operator[](std::size_t i) { return *agents_[i]; }
  const AgentPolicy& operator[](std::size_t i) const { return *agents_[i]; }
  std::vector<AgentId> ids() const;
  std::vector<bool> adversarial_labels() const;

  /// Every agent acts on the same snapshot, in index order.
  std::vector<AgentRecord> act(const MarketState& state, const NewsEvent& news);
  void reseed(std::uint64_t seed);

 private:
  std::vector<std::unique_ptr<AgentPolicy>> agents_;
};

struct PopulationSpec {
  int traders = 5;
  int liquidity_providers = 3;
  int arbitrageurs = 2;
  int attackers = 2;
  AttackConfig attack;
  BehaviorParams behavior;

  int total() const noexcept { return traders + liquidity_providers + arbitrageurs + attackers; }
  /// Attackers needed for adversarial fraction rho with the benign counts held fixed.
  static int attackers_for_fraction(double rho, int benign);
};

/// Builds traders, LPs, arbitrageurs and attackers in that order. Trader risk profiles are drawn
/// from the seed; all attackers share spec.attack and a coordination stream.
Population spawn_population(const PopulationSpec& spec, std::uint64_t seed,
                            const MarketParams& market);
Population spawn_population(int n_traders, int n_lps, int n_arbs, int n_attackers,
                            std::uint64_t seed);

/// Collects the order flow implied by one step of records.
OrderFlow order_flow(std::span<const AgentRecord> records, std::size_t n_assets);

/// Realized profit of a record over (s, s+1]: mark-to-market of the position change net of the
/// trade's own price impact; mint/redeem settle at the next step's peg; hold/withdraw earn nothing.
double realized_pnl(const AgentRecord& record, double peg_now, double peg_next,
                    double pool_liquidity, double impact);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const noexcept { return x >= lo && x <= hi; }
};

struct FeatureEnvelope {
  Interval f1, f2, f3, f4;
};

/// Expected trust-feature ranges per archetype.
FeatureEnvelope expected_feature_envelope(Archetype archetype);

// --- external agent backends ---------------------------------------------------------------

/// Produces a JSON action for (state, news); may throw or return malformed JSON.
using AgentResponder = std::function<nlohmann::json(const MarketState&, const NewsEvent&)>;

/// Strictly validates a JSON agent response. Returns nullopt on any schema violation.
std::optional<AgentRecord> parse_agent_response(const nlohmann::json& response, const AgentId& id,
                                                int step, std::size_t n_assets);

/// Wraps an external responder; malformed responses or exceptions fall back to Hold.
class ExternalAgent final : public AgentPolicy {
 public:
  ExternalAgent(AgentId id, AgentResponder responder, std::size_t n_assets);
  AgentRecord act(const MarketState& state, const NewsEvent& news) override;
  std::unique_ptr<AgentPolicy> clone() const override;
  void reseed(std::uint64_t) override {}
  int fallbacks() const noexcept { return fallbacks_; }

 private:
  AgentResponder responder_;
  std::size_t n_assets_;
  int fallbacks_ = 0;
};

nlohmann::json to_json(const AgentRecord& record);
AgentRecord agent_record_from_json(const nlohmann::json& j);

}  // namespace stablesim
