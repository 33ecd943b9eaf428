#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "stablesim/batch.hpp"

using namespace stablesim;
namespace fs = std::filesystem;

namespace {

AppConfig small() {
  AppConfig c = AppConfig::defaults();
  c.runs = 3;
  c.methods = {Method::MVFComposer, Method::SAS};
  c.shocks = {ShockKind::BlackThursday};
  c.sim.controller.stress.n_runs = 2;
  c.jobs = 1;
  return c;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("stablesim_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("batch summary is independent of the worker count") {
  AppConfig serial = small();
  AppConfig pooled = small();
  pooled.jobs = 4;
  const BatchResult a = run_batch(serial), b = run_batch(pooled);
  CHECK(a.failures == 0);
  CHECK(summary_json(serial, a).dump() == summary_json(pooled, b).dump());
  CHECK(summary_json(serial, a).dump() == summary_json(serial, run_batch(serial)).dump());
}

TEST_CASE("methods share seeds within a cell") {
  const AppConfig c = small();
  const BatchResult r = run_batch(c);
  const CellResult* ours = r.find(Method::MVFComposer, ShockKind::BlackThursday);
  const CellResult* sas = r.find(Method::SAS, ShockKind::BlackThursday);
  REQUIRE(ours);
  REQUIRE(sas);
  REQUIRE(ours->runs.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(ours->runs[i].run_id == sas->runs[i].run_id);
  CHECK(r.find(Method::Static6040, ShockKind::BlackThursday) == nullptr);

  const auto summary = summary_json(c, r);
  REQUIRE(summary["paired"].size() == 1);
  CHECK(summary["paired"][0]["baseline"] == "SAS");
  CHECK(summary["paired"][0]["pairs"] == 3);
  CHECK_FALSE(summary["config"].contains("jobs"));
}

TEST_CASE("run writes artifacts into a fresh directory") {
  const fs::path out = scratch("batch_run") / "nested";
  std::ostringstream log;
  REQUIRE(cmd_run(small(), out.string(), log) == 0);
  CHECK(fs::exists(out / "summary.json"));
  CHECK(fs::exists(out / "summary.csv"));
  CHECK(fs::exists(out / "MVFComposer" / "BlackThursday" / "run_0.csv"));
  CHECK(fs::exists(out / "SAS" / "BlackThursday" / "trust.csv"));
  CHECK(fs::exists(out / "SAS" / "BlackThursday" / "epochs.jsonl"));
  CHECK(log.str().find("completed 6/6 runs") != std::string::npos);

  std::ifstream in(out / "MVFComposer" / "BlackThursday" / "run_0.csv");
  const auto rows = read_trajectory_csv(in);
  CHECK(rows.size() == 101);
  fs::remove_all(out.parent_path());
}

TEST_CASE("sweep") {
  const fs::path out = scratch("batch_sweep");
  std::ostringstream log;
  AppConfig c = small();
  c.runs = 2;
  CHECK_THROWS_AS(cmd_sweep(c, "rho", {}, out.string(), log), ConfigError);
  CHECK_THROWS_AS(cmd_sweep(c, "gamma", {0.1}, out.string(), log), ConfigError);
  CHECK_FALSE(fs::exists(out));

  REQUIRE(cmd_sweep(c, "rho", {0.1, 0.3}, out.string(), log) == 0);
  std::ifstream in(out / "sweep_rho.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "parameter,value,method,shock,runs,peak_dev,recovery,recovered,bad_debt,liq_ret,tpr,fpr,"
        "influence_reduction");
  int lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 4);
  fs::remove_all(out);
}

TEST_CASE("sweep parameters") {
  AppConfig c = AppConfig::defaults();
  apply_sweep_value(c, "turnover_limit", 0.3);
  CHECK(c.sim.controller.turnover_limit == 0.3);
  apply_sweep_value(c, "shock_magnitude", 0.4);
  CHECK(c.shock.black_thursday_drawdown == 0.4);
  apply_sweep_value(c, "epoch_length", 5);
  CHECK(c.sim.controller.epoch_length == 5);
  CHECK(sweep_parameters().size() == 8);
}
