#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "stablesim/random.hpp"

namespace stablesim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ShockKind { Normal, PriceShock, SentimentShock, BlackThursday };

std::string to_string(ShockKind kind);
ShockKind shock_kind_from_string(const std::string& name);

/// A scheduled market shock. Magnitudes are fractions of the pre-shock level.
struct ShockSpec {
  ShockKind kind = ShockKind::Normal;
  int injection_step = 30;
  double price_drawdown = 0.0;
  double sentiment_target = 0.0;
  double liquidity_withdrawal = 0.0;

  static ShockSpec normal(int injection_step = 30);
  static ShockSpec price(int injection_step = 30, double drawdown = 0.10);
  static ShockSpec sentiment(int injection_step = 30, double target = -0.8);
  static ShockSpec black_thursday(int injection_step = 30, double drawdown = 0.15,
                                  double sentiment_target = -0.8, double withdrawal = 0.25);
  static ShockSpec preset(ShockKind kind, int injection_step = 30);

  bool moves_prices() const noexcept {
    return kind == ShockKind::PriceShock || kind == ShockKind::BlackThursday;
  }
  bool moves_sentiment() const noexcept {
    return kind == ShockKind::SentimentShock || kind == ShockKind::BlackThursday;
  }
  /// Throws InvalidInput unless injection_step is in [0, horizon) and fractions are in [0,1].
  void validate(int horizon) const;
};

struct NewsEvent {
  std::string headline;
  double polarity = 0.0;  // in [-1, 1]
  Vector relevance;       // per asset, in [0, 1]
};

/// Snapshot of the simulated market at one step.
struct MarketState {
  int step = 0;
  double peg_deviation = 0.0;  // signed fraction; negative means below peg
  Vector prices;
  double sentiment = 0.0;
  double pool_liquidity = 0.0;
  double stablecoin_supply = 0.0;
  double collateral_value = 0.0;
  double volatility = 0.0;  // annualized reserve-portfolio volatility

  Vector holdings;              // reserve units held per asset
  Vector price_level;           // level each price reverts to
  int stress_steps_left = 0;    // >0 while the post-shock volatility regime is in force
  double reserve_variance = 0.0;  // EWMA of per-step reserve returns

  double collateral_ratio() const;
  Vector reserve_weights() const;
  void validate() const;
};

/// Constants of the peg, sentiment, liquidity and price processes.
struct MarketParams {
  std::vector<std::string> asset_names;
  double reversion = 0.23;        // per-step peg mean reversion
  double impact = 0.5;            // peg move per unit (net sell flow / pool liquidity)
  double noise_sd = 0.002;        // peg noise per step
  double sentiment_memory = 0.8;  // weight on the previous sentiment
  double backing_passthrough = 0.5;  // peg discount per unit of collateral shortfall

  Matrix calm_covariance;         // per-step log-return covariance, calm regime
  Vector stress_vol_multiplier;   // per-asset volatility scale in the stress regime
  double stress_correlation = 0.6;
  int stress_duration = 25;
  Vector shock_loading;           // per-asset sensitivity to a price shock, mean 1
  Vector price_anchor;
  double price_reversion = 0.15;
  double shock_persistence = 0.0;  // share of a price shock that never reverts
  double asset_impact = 0.02;
  double vol_ewma = 0.9;
  double steps_per_year = 365.0;

  double initial_liquidity = 1.0e6;
  double initial_supply = 1.0e6;
  double initial_collateral_ratio = 1.15;
  int news_shock_duration = 12;

  static MarketParams defaults();
  std::size_t n_assets() const noexcept { return asset_names.size(); }
  /// Covariance of the post-shock regime implied by the calm covariance and multipliers.
  Matrix stress_regime_covariance() const;
  void validate() const;
};

/// Order flow collected from one step of agent records.
struct OrderFlow {
  Vector net_sell;            // per asset; positive sells the stablecoin
  double lp_withdrawal = 0.0;
  double minted = 0.0;        // positive mints, negative redeems

  static OrderFlow zero(std::size_t n_assets);
  double total_sell() const { return net_sell.sum(); }
};

/// Exogenous randomness for one step, drawn outside the transition so it stays pure.
struct MarketNoise {
  double peg = 0.0;
  Vector asset;  // standard normals

  static MarketNoise zero(std::size_t n_assets);
  static MarketNoise draw(Rng& rng, std::size_t n_assets);
};

/// Market transition with cached Cholesky factors of both regime covariances.
class MarketModel {
 public:
  explicit MarketModel(MarketParams params);

  const MarketParams& params() const noexcept { return params_; }
  std::size_t n_assets() const noexcept { return params_.n_assets(); }

  MarketState initial_state(const Vector& reserve_weights) const;

  /// Advances one step. A shock whose injection_step equals state.step is applied first,
  /// then order-flow impact, mean reversion and noise.
  MarketState step(const MarketState& state, const OrderFlow& flow, const NewsEvent& news,
                   const std::optional<ShockSpec>& shock, const MarketNoise& noise) const;

 private:
  MarketParams params_;
  Matrix calm_factor_;
  Matrix stress_factor_;
};

inline MarketState step_market(const MarketModel& model, const MarketState& state,
                               const OrderFlow& flow, const NewsEvent& news,
                               const std::optional<ShockSpec>& shock, const MarketNoise& noise) {
  return model.step(state, flow, news, shock, noise);
}

/// Re-weights the reserve at current prices; collateral value is preserved.
void rebalance_reserve(MarketState& state, const Vector& weights);

/// Deterministic in (seed, step, shock). Inside the shock's news window the headline is drawn
/// from a negative template pool; otherwise from a zero-mean pool.
NewsEvent generate_news(std::uint64_t seed, int step, const std::optional<ShockSpec>& shock,
                        std::size_t n_assets = 4, int shock_news_duration = 12);

}  // namespace stablesim
