#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stablesim/controller.hpp"

namespace stablesim {

enum class Preset { Quick, Full };

Preset preset_from_string(const std::string& s);
int preset_runs(Preset p);

/// Magnitudes used when building each shock kind.
struct ShockSettings {
  int injection_step = 30;
  double price_drawdown = 0.10;
  double black_thursday_drawdown = 0.15;
  double sentiment_target = -0.8;
  double liquidity_withdrawal = 0.25;

  ShockSpec make(ShockKind kind) const;
};

struct AppConfig {
  std::uint64_t seed = 42;
  int runs = 100;
  int jobs = 0;  // 0 = hardware concurrency
  std::vector<Method> methods = {Method::MVFComposer, Method::MVFNoTrust, Method::SAS,
                                 Method::Static6040, Method::Unconstrained};
  std::vector<ShockKind> shocks = {ShockKind::Normal, ShockKind::PriceShock,
                                   ShockKind::SentimentShock, ShockKind::BlackThursday};
  ShockSettings shock;
  std::optional<double> rho;  // overrides population.attackers with the benign counts fixed
  std::optional<std::string> historical_covariance_csv;
  SimulationConfig sim;

  static AppConfig defaults();
  /// Applies rho and copies the trust window/horizon into dependent fields.
  SimulationConfig simulation() const;
  void validate() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json to_json(const AppConfig& config);
/// Keys missing from `j` keep their defaults; unknown keys are rejected.
AppConfig app_config_from_json(const nlohmann::json& j);

/// Overrides of the form PREFIX SECTION__KEY=value, e.g. STABLESIM_CONTROLLER__TURNOVER_LIMIT=0.2.
void apply_env_overrides(nlohmann::json& j, const std::map<std::string, std::string>& env,
                         const std::string& prefix = "STABLESIM_");
std::map<std::string, std::string> current_environment();

/// Reads the file (if any), applies environment overrides and validates.
AppConfig load_config(const std::optional<std::string>& path,
                      const std::map<std::string, std::string>& env = current_environment());

}  // namespace stablesim
