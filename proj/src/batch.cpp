#include "stablesim/batch.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "stablesim/format.hpp"

namespace stablesim {
namespace {

namespace fs = std::filesystem;

struct RunArtifacts {
  std::string trajectory;
  std::string trust;
  std::string epochs;
};

std::vector<LabeledTrust> labeled_trust(const Trajectory& t) {
  std::vector<LabeledTrust> out;
  for (const auto& e : t.epochs) {
    if (e.trust_reports.empty()) continue;
    LabeledTrust l;
    l.reports = e.trust_reports;
    for (const auto& r : e.trust_reports) l.labels.push_back(r.agent.adversarial);
    out.push_back(std::move(l));
  }
  return out;
}

int worker_count(int jobs, std::size_t tasks) {
  int n = jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency());
  return std::max(1, std::min(n, static_cast<int>(tasks)));
}

nlohmann::json security_json(const SecuritySummary& s) {
  return {{"tpr", s.tpr},
          {"fpr", s.fpr},
          {"mean_influence", s.mean_influence},
          {"mean_fraction", s.mean_fraction},
          {"influence_reduction", s.influence_reduction},
          {"windows", s.windows}};
}

std::vector<double> peaks(const CellResult& c) {
  std::vector<double> out;
  for (const auto& r : c.runs) out.push_back(r.failed ? 0.0 : r.metrics.peak_deviation);
  return out;
}

}  // namespace

int CellResult::failures() const {
  return static_cast<int>(std::count_if(runs.begin(), runs.end(), [](const RunRecord& r) { return r.failed; }));
}

MetricsRow CellResult::metrics_row(int horizon, int shock_step) const {
  MetricsRow row;
  row.method = to_string(method);
  row.shock = to_string(shock);
  std::vector<std::optional<int>> recoveries;
  for (const auto& r : runs) {
    if (r.failed) continue;
    ++row.runs;
    row.peak_dev += r.metrics.peak_deviation;
    row.bad_debt += r.metrics.bad_debt;
    row.liq_ret += r.metrics.liquidity_retention;
    row.recovered += r.metrics.recovery.has_value();
    recoveries.push_back(r.metrics.recovery);
  }
  if (row.runs > 0) {
    row.peak_dev /= row.runs;
    row.bad_debt /= row.runs;
    row.liq_ret /= row.runs;
    row.recovery = mean_recovery(recoveries, horizon - shock_step);
  }
  return row;
}

SecuritySummary CellResult::security(double threshold) const {
  std::vector<LabeledTrust> all;
  for (const auto& r : runs) all.insert(all.end(), r.trust.begin(), r.trust.end());
  return security_summary(all, threshold);
}

const CellResult* BatchResult::find(Method method, ShockKind shock) const {
  for (const auto& c : cells) {
    if (c.method == method && c.shock == shock) return &c;
  }
  return nullptr;
}

BatchResult run_batch(const AppConfig& config, const BatchOptions& options) {
  config.validate();
  const SimulationConfig base = config.simulation();

  BatchResult result;
  for (Method m : config.methods) {
    for (ShockKind k : config.shocks) {
      CellResult cell;
      cell.method = m;
      cell.shock = k;
      cell.runs.resize(static_cast<std::size_t>(config.runs));
      result.cells.push_back(std::move(cell));
    }
  }
  if (options.out_dir) {
    for (const auto& c : result.cells) {
      fs::create_directories(fs::path(*options.out_dir) / to_string(c.method) / to_string(c.shock));
    }
  }

  const std::size_t per_cell = static_cast<std::size_t>(config.runs);
  const std::size_t tasks = result.cells.size() * per_cell;
  std::vector<RunArtifacts> artifacts(options.out_dir ? tasks : 0);
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;

  auto work = [&] {
    for (std::size_t task; (task = next.fetch_add(1)) < tasks;) {
      CellResult& cell = result.cells[task / per_cell];
      const int run_id = static_cast<int>(task % per_cell);
      RunRecord& rec = cell.runs[static_cast<std::size_t>(run_id)];
      rec.run_id = run_id;
      try {
        SimulationConfig sim = base;
        sim.controller.method = cell.method;
        const ShockSpec shock = config.shock.make(cell.shock);
        const Trajectory t = run_trajectory(sim, shock, config.seed + static_cast<std::uint64_t>(run_id));
        rec.metrics = compute_run_metrics(t.states, shock.injection_step, sim.controller.epsilon);
        rec.trust = labeled_trust(t);
        if (options.out_dir) {
          std::ostringstream traj, trust, epochs;
          write_trajectory_csv(traj, trajectory_rows(run_id, t.states));
          write_trust_rows(trust, run_id, t.epochs);
          write_epochs_jsonl(epochs, t.epochs);
          artifacts[task] = {traj.str(), trust.str(), epochs.str()};
        }
      } catch (const std::exception& e) {
        rec.failed = true;
        rec.error = e.what();
        if (options.log) {
          std::lock_guard lock(log_mutex);
          *options.log << "run " << run_id << " (" << to_string(cell.method) << ", "
                       << to_string(cell.shock) << ") failed: " << e.what() << '\n';
        }
      }
    }
  };

  const int n_workers = worker_count(config.jobs, tasks);
  std::vector<std::thread> pool;
  for (int i = 1; i < n_workers; ++i) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  for (const auto& c : result.cells) result.failures += c.failures();

  if (options.out_dir) {
    for (std::size_t ci = 0; ci < result.cells.size(); ++ci) {
      const CellResult& c = result.cells[ci];
      const fs::path dir = fs::path(*options.out_dir) / to_string(c.method) / to_string(c.shock);
      std::ofstream trust(dir / "trust.csv"), epochs(dir / "epochs.jsonl");
      write_trust_header(trust);
      for (std::size_t r = 0; r < per_cell; ++r) {
        const RunArtifacts& a = artifacts[ci * per_cell + r];
        if (c.runs[r].failed) continue;
        write_file((dir / ("run_" + std::to_string(r) + ".csv")).string(), a.trajectory);
        trust << a.trust;
        epochs << a.epochs;
      }
    }
  }
  return result;
}

nlohmann::json summary_json(const AppConfig& config, const BatchResult& result) {
  const int horizon = config.sim.controller.horizon;
  const int t_s = config.shock.injection_step;
  const double tau = config.sim.controller.trust.threshold;

  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : result.cells) {
    const MetricsRow m = c.metrics_row(horizon, t_s);
    nlohmann::json cell = {{"method", m.method},
                           {"shock", m.shock},
                           {"runs", m.runs},
                           {"failures", c.failures()},
                           {"peak_deviation", m.peak_dev},
                           {"recovery", m.recovery},
                           {"recovered", m.recovered},
                           {"bad_debt", m.bad_debt},
                           {"liquidity_retention", m.liq_ret}};
    const SecuritySummary s = c.security(tau);
    if (s.windows > 0) cell["security"] = security_json(s);
    cells.push_back(cell);
  }

  // MVF-Composer against every other method on the same seeds.
  nlohmann::json paired = nlohmann::json::array();
  for (ShockKind k : config.shocks) {
    const CellResult* ours = result.find(Method::MVFComposer, k);
    if (!ours) break;
    for (Method m : config.methods) {
      if (m == Method::MVFComposer) continue;
      const CellResult* other = result.find(m, k);
      if (!other || ours->failures() || other->failures()) continue;
      const auto a = peaks(*ours), b = peaks(*other);
      const PairedComparison cmp = compare_paired(a, b);
      paired.push_back({{"shock", to_string(k)},
                        {"baseline", to_string(m)},
                        {"pairs", cmp.pairs},
                        {"peak_wins", cmp.wins},
                        {"peak_win_fraction", cmp.win_fraction},
                        {"mean_peak", cmp.mean_a},
                        {"baseline_mean_peak", cmp.mean_b}});
    }
  }

  nlohmann::json settings = to_json(config);
  settings.erase("jobs");  // results do not depend on the worker count
  return {{"config", settings},
          {"failures", result.failures},
          {"cells", cells},
          {"paired", paired}};
}

int cmd_run(const AppConfig& config, const std::string& out_dir, std::ostream& log) {
  fs::create_directories(out_dir);
  BatchOptions options;
  options.out_dir = out_dir;
  options.log = &log;
  const BatchResult result = run_batch(config, options);

  std::vector<MetricsRow> rows;
  for (const auto& c : result.cells) {
    rows.push_back(c.metrics_row(config.sim.controller.horizon, config.shock.injection_step));
  }
  std::ofstream csv(fs::path(out_dir) / "summary.csv");
  write_metrics_csv(csv, rows);
  write_file((fs::path(out_dir) / "summary.json").string(), summary_json(config, result).dump(2) + "\n");

  const int total = static_cast<int>(result.cells.size()) * config.runs;
  log << "completed " << total - result.failures << "/" << total << " runs";
  if (result.failures) log << " (" << result.failures << " failed)";
  log << ", summary in " << (fs::path(out_dir) / "summary.json").string() << '\n';
  return result.failures == total ? 1 : 0;
}

const std::vector<std::string>& sweep_parameters() {
  static const std::vector<std::string> names = {
      "rho",           "shock_magnitude", "coordination", "injection_strength",
      "turnover_limit", "risk_aversion",  "epoch_length", "stress_runs"};
  return names;
}

void apply_sweep_value(AppConfig& config, const std::string& parameter, double value) {
  auto& ctl = config.sim.controller;
  if (parameter == "rho") {
    config.rho = value;
  } else if (parameter == "shock_magnitude") {
    config.shock.price_drawdown = value;
    config.shock.black_thursday_drawdown = value;
  } else if (parameter == "coordination") {
    config.sim.population.attack.coordination = value;
  } else if (parameter == "injection_strength") {
    config.sim.population.attack.injection_strength = value;
  } else if (parameter == "turnover_limit") {
    ctl.turnover_limit = value;
  } else if (parameter == "risk_aversion") {
    ctl.risk_aversion = value;
  } else if (parameter == "epoch_length") {
    ctl.epoch_length = static_cast<int>(value);
  } else if (parameter == "stress_runs") {
    ctl.stress.n_runs = static_cast<int>(value);
  } else {
    std::string known;
    for (const auto& n : sweep_parameters()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown sweep parameter '" + parameter + "' (expected one of " + known + ")");
  }
}

int cmd_sweep(const AppConfig& config, const std::string& parameter,
              const std::vector<double>& values, const std::string& out_dir, std::ostream& log) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  {
    AppConfig probe = config;
    apply_sweep_value(probe, parameter, values.front());
  }
  fs::create_directories(out_dir);
  std::ostringstream csv;
  csv << "parameter,value,method,shock,runs,peak_dev,recovery,recovered,bad_debt,liq_ret,tpr,fpr,"
         "influence_reduction\n";
  int failures = 0;
  for (double v : values) {
    AppConfig c = config;
    apply_sweep_value(c, parameter, v);
    c.validate();
    const std::string sub = (fs::path(out_dir) / (parameter + "=" + format_double(v))).string();
    BatchOptions options;
    options.log = &log;
    const BatchResult result = run_batch(c, options);
    failures += result.failures;
    fs::create_directories(sub);
    write_file((fs::path(sub) / "summary.json").string(), summary_json(c, result).dump(2) + "\n");
    for (const auto& cell : result.cells) {
      const MetricsRow m = cell.metrics_row(c.sim.controller.horizon, c.shock.injection_step);
      const SecuritySummary s = cell.security(c.sim.controller.trust.threshold);
      csv << parameter << ',' << format_double(v) << ',' << m.method << ',' << m.shock << ','
          << m.runs << ',' << format_double(m.peak_dev) << ',' << format_double(m.recovery) << ','
          << m.recovered << ',' << format_double(m.bad_debt) << ',' << format_double(m.liq_ret)
          << ',' << format_double(s.tpr) << ',' << format_double(s.fpr) << ','
          << format_double(s.influence_reduction) << '\n';
    }
    log << parameter << " = " << format_double(v) << " done\n";
  }
  const std::string path = (fs::path(out_dir) / ("sweep_" + parameter + ".csv")).string();
  write_file(path, csv.str());
  log << "sweep written to " << path;
  if (failures) log << " (" << failures << " runs failed)";
  log << '\n';
  return 0;
}

}  // namespace stablesim
