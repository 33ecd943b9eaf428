#include "stablesim/io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "stablesim/errors.hpp"
#include "stablesim/format.hpp"

namespace stablesim {
namespace {

constexpr const char* kTrajectoryHeader =
    "run_id,step,peg_deviation,sentiment,liquidity,supply,collateral_value";

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
  return out;
}

int parse_int(const std::string& s) {
  const double x = parse_double(s);
  if (x != static_cast<int>(x)) throw InvalidInput("not an integer: '" + s + "'");
  return static_cast<int>(x);
}

std::string fmt(double x) { return format_double(x); }

nlohmann::json vec(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

std::vector<TrajectoryRow> trajectory_rows(int run_id, std::span<const MarketState> states) {
  std::vector<TrajectoryRow> rows;
  rows.reserve(states.size());
  for (const auto& s : states) {
    rows.push_back({run_id, s.step, s.peg_deviation, s.sentiment, s.pool_liquidity,
                    s.stablecoin_supply, s.collateral_value});
  }
  return rows;
}

void write_trajectory_csv(std::ostream& out, std::span<const TrajectoryRow> rows) {
  out << kTrajectoryHeader << '\n';
  for (const auto& r : rows) {
    out << r.run_id << ',' << r.step << ',' << fmt(r.peg_deviation) << ',' << fmt(r.sentiment)
        << ',' << fmt(r.liquidity) << ',' << fmt(r.supply) << ',' << fmt(r.collateral_value)
        << '\n';
  }
}

std::vector<TrajectoryRow> read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("empty trajectory CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTrajectoryHeader) throw InvalidInput("unexpected trajectory CSV header");
  std::vector<TrajectoryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto c = split(line);
    if (c.size() != 7) throw InvalidInput("trajectory CSV row needs 7 columns");
    rows.push_back({parse_int(c[0]), parse_int(c[1]), parse_double(c[2]), parse_double(c[3]),
                    parse_double(c[4]), parse_double(c[5]), parse_double(c[6])});
  }
  return rows;
}

RunMetrics compute_run_metrics(std::span<const TrajectoryRow> rows, int shock_step, double epsilon) {
  std::vector<double> peg, liquidity, supply, collateral;
  for (const auto& r : rows) {
    peg.push_back(r.peg_deviation);
    liquidity.push_back(r.liquidity);
    supply.push_back(r.supply);
    collateral.push_back(r.collateral_value);
  }
  RunMetrics m;
  m.peak_deviation = peak_deviation(peg);
  m.recovery = recovery_time(peg, shock_step, epsilon);
  m.bad_debt = bad_debt(collateral, supply);
  m.liquidity_retention = liquidity_retention(liquidity, shock_step);
  return m;
}

void write_trust_header(std::ostream& out) {
  out << "run_id,step,agent,f1,f2,f3,f4,score,weight,label\n";
}

void write_trust_rows(std::ostream& out, int run_id, std::span<const EpochResult> epochs) {
  for (const auto& e : epochs) {
    for (const auto& r : e.trust_reports) {
      out << run_id << ',' << e.step << ',' << r.agent.index << ',' << fmt(r.f1) << ','
          << fmt(r.f2) << ',' << fmt(r.f3) << ',' << fmt(r.f4) << ',' << fmt(r.score) << ','
          << fmt(r.normalized_weight) << ',' << (r.agent.adversarial ? 1 : 0) << '\n';
    }
  }
}

nlohmann::json to_json(const EpochResult& e) {
  nlohmann::json trust = nlohmann::json::array();
  for (const auto& r : e.trust_reports) {
    trust.push_back({{"agent", r.agent.index},
                     {"archetype", to_string(r.agent.archetype)},
                     {"features", {r.f1, r.f2, r.f3, r.f4}},
                     {"score", r.score},
                     {"weight", r.normalized_weight}});
  }
  return {{"epoch", e.epoch},
          {"step", e.step},
          {"weights", vec(e.weights)},
          {"risk_state", e.risk_state},
          {"alpha", e.alpha},
          {"stress_trace_ratio", e.stress_trace_ratio},
          {"stress_fallback", e.stress_fallback},
          {"objective", e.solution.objective},
          {"kkt_residual", e.solution.kkt_residual},
          {"iterations", e.solution.iterations},
          {"turnover_active", e.solution.active_set.turnover},
          {"trust", trust},
          {"wall_time", e.wall_time}};
}

void write_epochs_jsonl(std::ostream& out, std::span<const EpochResult> epochs) {
  for (const auto& e : epochs) out << to_json(e).dump() << '\n';
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows) {
  out << "method,shock,runs,peak_dev,recovery,recovered,bad_debt,liq_ret\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.shock << ',' << r.runs << ',' << fmt(r.peak_dev) << ','
        << fmt(r.recovery) << ',' << r.recovered << ',' << fmt(r.bad_debt) << ','
        << fmt(r.liq_ret) << '\n';
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  out << content;
}

}  // namespace stablesim
