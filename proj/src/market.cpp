#include "stablesim/market.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string_view>

#include "stablesim/errors.hpp"

namespace stablesim {
namespace {

bool in_unit(double x) { return x >= 0.0 && x <= 1.0; }

Matrix lower_factor(const Matrix& cov, const char* what) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw InvalidInput(std::string(what) + " covariance is not positive definite");
  }
  return llt.matrixL();
}

struct Headline {
  std::string_view text;
  double polarity;
};

// Symmetric about zero so the calm-regime polarity has zero mean.
constexpr std::array<Headline, 10> kCalmHeadlines{{
    {"Stablecoin volumes steady across major venues", 0.0},
    {"Payments partner expands stablecoin settlement", 0.4},
    {"Exchange outage briefly halts withdrawals", -0.4},
    {"DeFi lending rates edge higher", 0.2},
    {"Minor oracle delay reported on one feed", -0.2},
    {"Quarterly reserve attestation published on schedule", 0.3},
    {"Regulator signals tighter stablecoin disclosure rules", -0.3},
    {"Treasury bill yields unchanged", 0.0},
    {"New stablecoin pairs listed on a large exchange", 0.1},
    {"Large holder moves reserves between custodians", -0.1},
}};

constexpr std::array<Headline, 5> kStressHeadlines{{
    {"ETH plunges 15% as cascade liquidations hit DeFi", -0.6},
    {"Stablecoin reserve audit reveals shortfall", -0.6},
    {"AMM pool drained in flash loan attack", -0.6},
    {"Lenders freeze withdrawals amid market panic", -0.8},
    {"Collateral auctions clear at steep discounts", -0.7},
}};

}  // namespace

std::string to_string(ShockKind kind) {
  switch (kind) {
    case ShockKind::Normal: return "Normal";
    case ShockKind::PriceShock: return "PriceShock";
    case ShockKind::SentimentShock: return "SentimentShock";
    case ShockKind::BlackThursday: return "BlackThursday";
  }
  return "Normal";
}

ShockKind shock_kind_from_string(const std::string& name) {
  for (ShockKind k : {ShockKind::Normal, ShockKind::PriceShock, ShockKind::SentimentShock,
                      ShockKind::BlackThursday}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidInput("unknown shock kind '" + name + "'");
}

ShockSpec ShockSpec::normal(int injection_step) {
  return ShockSpec{ShockKind::Normal, injection_step, 0.0, 0.0, 0.0};
}

ShockSpec ShockSpec::price(int injection_step, double drawdown) {
  return ShockSpec{ShockKind::PriceShock, injection_step, drawdown, 0.0, 0.0};
}

ShockSpec ShockSpec::sentiment(int injection_step, double target) {
  return ShockSpec{ShockKind::SentimentShock, injection_step, 0.0, target, 0.0};
}

ShockSpec ShockSpec::black_thursday(int injection_step, double drawdown, double sentiment_target,
                                    double withdrawal) {
  return ShockSpec{ShockKind::BlackThursday, injection_step, drawdown, sentiment_target, withdrawal};
}

ShockSpec ShockSpec::preset(ShockKind kind, int injection_step) {
  switch (kind) {
    case ShockKind::Normal: return normal(injection_step);
    case ShockKind::PriceShock: return price(injection_step);
    case ShockKind::SentimentShock: return sentiment(injection_step);
    case ShockKind::BlackThursday: return black_thursday(injection_step);
  }
  return normal(injection_step);
}

void ShockSpec::validate(int horizon) const {
  if (injection_step < 0 || injection_step >= horizon) {
    throw InvalidInput("shock injection_step must lie in [0, horizon)");
  }
  if (!in_unit(price_drawdown)) throw InvalidInput("shock price_drawdown must lie in [0,1]");
  if (!in_unit(liquidity_withdrawal)) {
    throw InvalidInput("shock liquidity_withdrawal must lie in [0,1]");
  }
  if (!(sentiment_target >= -1.0 && sentiment_target <= 1.0)) {
    throw InvalidInput("shock sentiment_target must lie in [-1,1]");
  }
}

double MarketState::collateral_ratio() const {
  return stablecoin_supply > 0.0 ? collateral_value / stablecoin_supply : 0.0;
}

Vector MarketState::reserve_weights() const {
  const Vector value = holdings.cwiseProduct(prices);
  const double total = value.sum();
  if (total <= 0.0) return Vector::Constant(prices.size(), 1.0 / static_cast<double>(prices.size()));
  return value / total;
}

void MarketState::validate() const {
  if (!std::isfinite(peg_deviation)) throw InvalidInput("peg_deviation is not finite");
  if (!(sentiment >= -1.0 && sentiment <= 1.0)) throw InvalidInput("sentiment outside [-1,1]");
  if (!(pool_liquidity >= 0.0)) throw InvalidInput("pool_liquidity is negative");
  if (prices.size() == 0 || !(prices.array() > 0.0).all() || !prices.allFinite()) {
    throw InvalidInput("prices must be positive and finite");
  }
  if (holdings.size() != prices.size()) throw InvalidInput("holdings/prices size mismatch");
  if (price_level.size() != prices.size() || !(price_level.array() > 0.0).all()) {
    throw InvalidInput("price levels must be positive, one per asset");
  }
  if (stablecoin_supply < 0.0 || collateral_value < 0.0) {
    throw InvalidInput("supply and collateral value must be non-negative");
  }
}

MarketParams MarketParams::defaults() {
  MarketParams p;
  p.asset_names = {"DAI", "USDC", "USDT", "TUSD"};
  Vector vol(4);
  vol << 0.012, 0.010, 0.006, 0.014;
  Matrix corr = Matrix::Constant(4, 4, 0.3);
  corr.diagonal().setOnes();
  p.calm_covariance = vol.asDiagonal() * corr * vol.asDiagonal();
  p.stress_vol_multiplier.resize(4);
  p.stress_vol_multiplier << 2.0, 1.6, 4.5, 1.8;
  p.shock_loading.resize(4);
  p.shock_loading << 1.0, 0.6, 1.6, 0.8;
  p.price_anchor = Vector::Ones(4);
  return p;
}

Matrix MarketParams::stress_regime_covariance() const {
  const Eigen::Index n = calm_covariance.rows();
  const Vector calm_vol = calm_covariance.diagonal().cwiseSqrt();
  const Vector vol = calm_vol.cwiseProduct(stress_vol_multiplier);
  Matrix corr = Matrix::Constant(n, n, stress_correlation);
  corr.diagonal().setOnes();
  return vol.asDiagonal() * corr * vol.asDiagonal();
}

void MarketParams::validate() const {
  const auto n = static_cast<Eigen::Index>(n_assets());
  if (n == 0) throw InvalidInput("market needs at least one asset");
  if (calm_covariance.rows() != n || calm_covariance.cols() != n) {
    throw InvalidInput("calm_covariance must be n_assets x n_assets");
  }
  if (stress_vol_multiplier.size() != n || shock_loading.size() != n || price_anchor.size() != n) {
    throw InvalidInput("per-asset market vectors must have n_assets entries");
  }
  if (!(reversion > 0.0 && reversion < 1.0)) throw InvalidInput("reversion must lie in (0,1)");
  if (!(sentiment_memory >= 0.0 && sentiment_memory <= 1.0)) {
    throw InvalidInput("sentiment_memory must lie in [0,1]");
  }
  if (impact < 0.0 || noise_sd < 0.0 || backing_passthrough < 0.0 || asset_impact < 0.0) {
    throw InvalidInput("impact, noise and pass-through coefficients must be non-negative");
  }
  if (!(price_anchor.array() > 0.0).all()) throw InvalidInput("price anchors must be positive");
  if (!(shock_persistence >= 0.0 && shock_persistence <= 1.0)) {
    throw InvalidInput("shock_persistence must lie in [0,1]");
  }
  if ((shock_loading.array() < 0.0).any()) throw InvalidInput("shock loadings must be non-negative");
  if (initial_liquidity <= 0.0 || initial_supply <= 0.0 || initial_collateral_ratio <= 0.0) {
    throw InvalidInput("initial liquidity, supply and collateral ratio must be positive");
  }
  if (stress_duration < 0 || news_shock_duration < 0) {
    throw InvalidInput("durations must be non-negative");
  }
}

OrderFlow OrderFlow::zero(std::size_t n_assets) {
  OrderFlow f;
  f.net_sell = Vector::Zero(static_cast<Eigen::Index>(n_assets));
  return f;
}

MarketNoise MarketNoise::zero(std::size_t n_assets) {
  MarketNoise z;
  z.asset = Vector::Zero(static_cast<Eigen::Index>(n_assets));
  return z;
}

MarketNoise MarketNoise::draw(Rng& rng, std::size_t n_assets) {
  MarketNoise z;
  z.peg = standard_normal(rng);
  z.asset.resize(static_cast<Eigen::Index>(n_assets));
  for (Eigen::Index i = 0; i < z.asset.size(); ++i) z.asset[i] = standard_normal(rng);
  return z;
}

MarketModel::MarketModel(MarketParams params) : params_(std::move(params)) {
  params_.validate();
  calm_factor_ = lower_factor(params_.calm_covariance, "calm");
  stress_factor_ = lower_factor(params_.stress_regime_covariance(), "stress regime");
}

MarketState MarketModel::initial_state(const Vector& reserve_weights) const {
  const auto n = static_cast<Eigen::Index>(n_assets());
  if (reserve_weights.size() != n) throw InvalidInput("reserve weights must have n_assets entries");
  MarketState s;
  s.step = 0;
  s.prices = params_.price_anchor;
  s.price_level = params_.price_anchor;
  s.pool_liquidity = params_.initial_liquidity;
  s.stablecoin_supply = params_.initial_supply;
  s.collateral_value = params_.initial_supply * params_.initial_collateral_ratio;
  s.holdings = Vector::Zero(n);
  rebalance_reserve(s, reserve_weights);
  s.reserve_variance = reserve_weights.dot(params_.calm_covariance * reserve_weights);
  s.volatility = std::sqrt(s.reserve_variance * params_.steps_per_year);
  return s;
}

MarketState MarketModel::step(const MarketState& state, const OrderFlow& flow,
                              const NewsEvent& news, const std::optional<ShockSpec>& shock,
                              const MarketNoise& noise) const {
  const auto n = static_cast<Eigen::Index>(n_assets());
  if (flow.net_sell.size() != n || noise.asset.size() != n) {
    throw InvalidInput("order flow and noise must have n_assets entries");
  }
  if (!flow.net_sell.allFinite() || !std::isfinite(flow.lp_withdrawal) ||
      !std::isfinite(flow.minted) || !std::isfinite(noise.peg) || !noise.asset.allFinite()) {
    throw InvalidInput("order flow must be finite");
  }

  MarketState next = state;
  next.step = state.step + 1;
  const Vector weights_before = state.reserve_weights();

  const bool shock_now = shock && shock->kind != ShockKind::Normal &&
                         shock->injection_step == state.step;

  // Shock first.
  if (shock_now && shock->moves_prices()) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double drop = std::clamp(shock->price_drawdown * params_.shock_loading[i], 0.0, 0.95);
      next.prices[i] *= 1.0 - drop;
      next.price_level[i] *= 1.0 - params_.shock_persistence * drop;
    }
    next.stress_steps_left = params_.stress_duration;
  }
  if (shock_now) {
    next.pool_liquidity *= 1.0 - shock->liquidity_withdrawal;
  }

  // Price process: regime noise, reversion toward the anchor, and flow impact on each asset.
  const bool stressed = next.stress_steps_left > 0;
  const Vector shocks = (stressed ? stress_factor_ : calm_factor_) * noise.asset;
  const double liquidity_before = std::max(next.pool_liquidity, 1e-2 * params_.initial_liquidity);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pull = params_.price_reversion * std::log(next.price_level[i] / next.prices[i]);
    const double flow_move = params_.asset_impact * flow.net_sell[i] / liquidity_before;
    next.prices[i] *= std::exp(shocks[i] + pull + flow_move);
  }
  if (stressed) --next.stress_steps_left;

  // Liquidity and supply.
  next.pool_liquidity = std::max(0.0, next.pool_liquidity - std::max(0.0, flow.lp_withdrawal));
  if (flow.minted != 0.0) {
    const double value = next.holdings.dot(next.prices);
    const Vector w = value > 0.0 ? Vector(next.holdings.cwiseProduct(next.prices) / value) : weights_before;
    // Redemptions are paid pro rata when the reserve is short.
    const double cover =
        next.stablecoin_supply > 0.0 ? std::min(1.0, value / next.stablecoin_supply) : 1.0;
    const double amount = flow.minted >= 0.0 ? flow.minted : -std::min(-flow.minted * cover, value);
    next.holdings += (amount * w).cwiseQuotient(next.prices);
    next.holdings = next.holdings.cwiseMax(0.0);
    next.stablecoin_supply = std::max(0.0, next.stablecoin_supply + flow.minted);
  }
  next.collateral_value = next.holdings.dot(next.prices);

  // Reserve volatility estimate from this step's realized reserve return.
  const double reserve_return =
      weights_before.dot((next.prices.array() / state.prices.array() - 1.0).matrix());
  next.reserve_variance = params_.vol_ewma * state.reserve_variance +
                          (1.0 - params_.vol_ewma) * reserve_return * reserve_return;
  next.volatility = std::sqrt(next.reserve_variance * params_.steps_per_year);

  // Sentiment relaxes toward the news polarity; a sentiment shock overrides it.
  next.sentiment = std::clamp(params_.sentiment_memory * state.sentiment +
                                  (1.0 - params_.sentiment_memory) * news.polarity,
                              -1.0, 1.0);
  if (shock_now && shock->moves_sentiment()) next.sentiment = shock->sentiment_target;

  // Peg: reversion toward the backing anchor (zero when fully collateralized),
  // linear impact of net selling, and noise.
  const double shortfall = std::max(0.0, 1.0 - next.collateral_ratio());
  const double anchor = -params_.backing_passthrough * shortfall;
  const double liquidity = std::max(next.pool_liquidity, 1e-2 * params_.initial_liquidity);
  const double delta = state.peg_deviation + params_.reversion * (anchor - state.peg_deviation) -
                       params_.impact * flow.total_sell() / liquidity + params_.noise_sd * noise.peg;
  next.peg_deviation = std::clamp(delta, -0.95, 0.95);
  return next;
}

void rebalance_reserve(MarketState& state, const Vector& weights) {
  if (weights.size() != state.prices.size()) throw InvalidInput("weights/prices size mismatch");
  const double value = state.holdings.size() == state.prices.size() && state.holdings.sum() > 0.0
                           ? state.holdings.dot(state.prices)
                           : state.collateral_value;
  state.holdings = (value * weights).cwiseQuotient(state.prices);
  state.collateral_value = state.holdings.dot(state.prices);
}

NewsEvent generate_news(std::uint64_t seed, int step, const std::optional<ShockSpec>& shock,
                        std::size_t n_assets, int shock_news_duration) {
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(step), 0x6E657773ULL}));
  const bool stressed = shock && shock->moves_sentiment() && step >= shock->injection_step &&
                        step < shock->injection_step + shock_news_duration;
  NewsEvent e;
  const double pick = uniform01(rng);
  const double jitter = uniform01(rng);
  if (stressed) {
    const auto& h = kStressHeadlines[static_cast<std::size_t>(pick * kStressHeadlines.size())];
    e.headline = std::string(h.text);
    e.polarity = std::clamp(h.polarity - 0.1 * jitter, -1.0, 1.0);
  } else {
    const auto& h = kCalmHeadlines[static_cast<std::size_t>(pick * kCalmHeadlines.size())];
    e.headline = std::string(h.text);
    e.polarity = std::clamp(h.polarity + 0.2 * (jitter - 0.5), -1.0, 1.0);
  }
  e.relevance.resize(static_cast<Eigen::Index>(n_assets));
  for (Eigen::Index i = 0; i < e.relevance.size(); ++i) e.relevance[i] = uniform01(rng);
  return e;
}

}  // namespace stablesim
