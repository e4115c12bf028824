#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "carbonalloc/core/errors.hpp"
#include "carbonalloc/io/bundle_io.hpp"
#include "carbonalloc/io/csv.hpp"
#include "carbonalloc/report/commands.hpp"
#include "test_support.hpp"

namespace carbonalloc {
namespace {

using report::RunConfig;

struct Workspace {
  testing::TempDir root{"cli"};
  std::ostringstream out, err;

  std::filesystem::path bundle(sim::Preset p, std::string_view name = "in") {
    sim::ScenarioSpec spec;
    spec.preset = p;
    return bundle(spec, name);
  }
  std::filesystem::path bundle(const sim::ScenarioSpec& spec, std::string_view name = "in") {
    const auto dir = root.path() / name;
    EXPECT_EQ(report::cmd_simulate(spec, dir, out, err), 0);
    return dir;
  }
  RunConfig config(const std::filesystem::path& in, std::string_view out_name = "out") {
    RunConfig c;
    c.input = in;
    c.output = root.path() / out_name;
    return c;
  }
};

std::vector<std::map<std::string, std::string>> read_csv(const std::filesystem::path& p) {
  io::CsvReader r(p);
  std::vector<std::map<std::string, std::string>> rows;
  std::vector<std::string_view> f;
  while (r.next(f)) {
    auto& row = rows.emplace_back();
    for (std::size_t i = 0; i < f.size(); ++i) row[r.header()[i]] = std::string(f[i]);
  }
  return rows;
}

TEST(CmdValidate, ExitCodes) {
  Workspace w;
  const auto in = w.bundle(sim::Preset::SankeySmall);
  EXPECT_EQ(report::cmd_validate(w.config(in), w.out, w.err), 0);
  EXPECT_TRUE(std::filesystem::exists(w.root.path() / "out" / "validation_report.csv"));

  {
    std::ofstream zm(in / "zone_map.csv");
    zm << "cluster_id,zone_id,region_id\ncluster-1,Z1,region-1\n";  // drops cluster-2
  }
  const auto cfg = w.config(in, "out2");
  EXPECT_EQ(report::cmd_validate(cfg, w.out, w.err), 1);
  const auto rows = read_csv(cfg.output / "validation_report.csv");
  std::map<std::string, int> kinds;
  for (const auto& r : rows) ++kinds[r.at("kind")];
  EXPECT_GE(kinds["unknown_cluster"], 1);

  std::filesystem::remove(in / "power_samples.csv");
  EXPECT_EQ(report::cmd_validate(w.config(in, "out3"), w.out, w.err), 2);
}

TEST(CmdValidate, OneDanglingCluster) {
  Workspace w;
  InputBundle b;
  const auto c = b.names.clusters.intern("c1");
  b.zone_map.push_back({c, b.names.zones.intern("Z1"), b.names.regions.intern("r1")});
  const auto m = b.names.machines.intern("m1");
  b.machines.push_back({m, b.names.clusters.intern("ghost"), Sharing::Shared, std::nullopt, 1.0});
  io::write_bundle(w.root.path() / "in", b);
  const auto cfg = w.config(w.root.path() / "in");
  EXPECT_EQ(report::cmd_validate(cfg, w.out, w.err), 1);
  EXPECT_EQ(read_csv(cfg.output / "validation_report.csv").size(), 1u);
}

TEST(CmdRun, Figure1UserEnergy) {
  Workspace w;
  const auto cfg = w.config(w.bundle(sim::Preset::Figure1));
  ASSERT_EQ(report::cmd_run(cfg, w.out, w.err), 0) << w.err.str();
  int day_rows = 0;
  for (const auto& r : read_csv(cfg.output / "user_energy.csv")) {
    if (r.at("user") != "prod") continue;
    const int hod = std::stoi(r.at("hour_utc").substr(11, 2));
    if (hod >= 6 && hod < 18) {
      EXPECT_EQ(std::stod(r.at("after_minor_round_2_wh")), 12e6);
      ++day_rows;
    }
  }
  EXPECT_EQ(day_rows, 12);
  for (const auto* f : {"emissions.csv", "footprint_report.csv", "flow_summary.csv", "closure_report.csv",
                        "diagnostics.csv", "run_config.json"}) {
    EXPECT_TRUE(std::filesystem::exists(cfg.output / f)) << f;
  }
}

TEST(CmdRun, FlowSummaryConstantBeforePue) {
  Workspace w;
  const auto cfg = w.config(w.bundle(sim::Preset::SankeySmall));
  ASSERT_EQ(report::cmd_run(cfg, w.out, w.err), 0) << w.err.str();
  const auto rows = read_csv(cfg.output / "flow_summary.csv");
  ASSERT_GE(rows.size(), 5u);
  const double measured = std::stod(rows.front().at("total_wh"));
  for (const auto& r : rows) {
    if (r.at("stage") == "facility_with_pue") {
      EXPECT_GT(std::stod(r.at("total_wh")), measured);
    } else {
      EXPECT_NEAR(std::stod(r.at("total_wh")), measured, 1.0) << r.at("stage");  // rounded to 1 Wh
    }
  }
}

TEST(CmdRun, TwoAccountsReconcile) {
  Workspace w;
  const auto cfg = w.config(w.bundle(sim::Preset::TwoAccounts));
  ASSERT_EQ(report::cmd_run(cfg, w.out, w.err), 0) << w.err.str();
  double accounts = 0;
  for (const auto& r : read_csv(cfg.output / "footprint_report.csv")) accounts += std::stod(r.at("kg_co2e"));
  double cloud = 0;
  for (const auto& r : read_csv(cfg.output / "footprint_months.csv")) cloud += std::stod(r.at("cloud_kg"));
  EXPECT_NEAR(accounts, cloud, 2e-3);  // each row rounded to 1 g
  for (const auto& r : read_csv(cfg.output / "closure_report.csv")) EXPECT_EQ(r.at("status"), "pass") << r.at("key");
}

TEST(CmdRun, DeterministicOutputs) {
  Workspace w;
  const auto in = w.bundle(sim::Preset::SankeySmall);
  ASSERT_EQ(report::cmd_run(w.config(in, "a"), w.out, w.err), 0);
  ASSERT_EQ(report::cmd_run(w.config(in, "b"), w.out, w.err), 0);
  for (const auto* f : {"user_energy.csv", "emissions.csv", "footprint_report.csv", "flow_summary.csv",
                        "flow_edges.csv", "closure_report.csv", "diagnostics.csv"}) {
    EXPECT_EQ(sim::sha256_file(w.root.path() / "a" / f), sim::sha256_file(w.root.path() / "b" / f)) << f;
  }
}

TEST(CmdRun, ConfigErrors) {
  Workspace w;
  auto cfg = w.config(w.bundle(sim::Preset::Figure1));
  cfg.from = parse_hour("2023-09-18T05:00Z");
  cfg.to = parse_hour("2023-09-18T05:00Z");
  EXPECT_EQ(report::cmd_run(cfg, w.out, w.err), 2);
  cfg.to.reset();
  cfg.from.reset();
  cfg.rounds = 0;
  EXPECT_EQ(report::cmd_run(cfg, w.out, w.err), 2);
  cfg.rounds = 2;
  cfg.default_pue = 0.9;
  EXPECT_EQ(report::cmd_run(cfg, w.out, w.err), 2);
  cfg.default_pue = 1.1;
  cfg.currency = "usd";
  EXPECT_EQ(report::cmd_run(cfg, w.out, w.err), 2);
  cfg.currency = "EUR";
  EXPECT_EQ(report::cmd_run(cfg, w.out, w.err), 0);
  cfg.input = w.root.path() / "nowhere";
  EXPECT_EQ(report::cmd_run(cfg, w.out, w.err), 2);
}

TEST(CmdRun, DateRangeRestricts) {
  Workspace w;
  auto cfg = w.config(w.bundle(sim::Preset::Figure1));
  cfg.from = parse_hour("2023-09-18T06:00Z");
  cfg.to = parse_hour("2023-09-18T08:00Z");
  ASSERT_EQ(report::cmd_run(cfg, w.out, w.err), 0);
  const auto rows = read_csv(cfg.output / "emissions.csv");
  EXPECT_EQ(rows.size(), 4u);  // prod and nonprod, two hours
}

TEST(CmdRun, MissingIntensityExitsOne) {
  Workspace w;
  const auto in = w.bundle(sim::Preset::Figure1);
  std::filesystem::remove(in / "carbon_intensity.csv");
  std::filesystem::remove(in / "annual_intensity.csv");
  auto cfg = w.config(in);
  EXPECT_EQ(report::cmd_run(cfg, w.out, w.err), 1);
  EXPECT_NE(w.err.str().find("cluster-1"), std::string::npos);
  cfg.allow_missing_intensity = true;
  EXPECT_EQ(report::cmd_run(cfg, w.out, w.err), 0);
}

TEST(CmdRun, BetaUndefinedExitsOne) {
  Workspace w;
  const auto in = w.bundle(sim::Preset::TwoAccounts);
  {
    std::ofstream bu(in / "billing_usage.csv");
    bu << "sku_id,region_id,billing_account,month,usage_units\n"
       << "db-sku-a,region-east,,2023-09,5\n";  // unbilled only
  }
  EXPECT_EQ(report::cmd_run(w.config(in), w.out, w.err), 1);
  EXPECT_NE(w.err.str().find("2023-09"), std::string::npos);
}

TEST(CmdRun, InvalidBundleExitsTwo) {
  Workspace w;
  const auto in = w.bundle(sim::Preset::Figure1);
  {
    std::ofstream app(in / "power_samples.csv", std::ios::app);
    app << "aggregate,2023-09-18T00:00Z,1\n";
  }
  const auto cfg = w.config(in);
  EXPECT_EQ(report::cmd_run(cfg, w.out, w.err), 2);
  EXPECT_TRUE(std::filesystem::exists(cfg.output / "validation_report.csv"));
}

TEST(CmdOracleCheck, ExitCodes) {
  Workspace w;
  const auto in = w.bundle(sim::ScenarioSpec{});
  auto cfg = w.config(in);
  EXPECT_EQ(report::cmd_oracle_check(cfg, w.out, w.err), 0) << w.out.str();
  EXPECT_TRUE(std::filesystem::exists(cfg.output / "oracle_diff.csv"));
  cfg.rounds = 1;
  EXPECT_EQ(report::cmd_oracle_check(cfg, w.out, w.err), 1);
  const auto diff = read_csv(cfg.output / "oracle_diff.csv");
  ASSERT_FALSE(diff.empty());

  io::write_bundle(w.root.path() / "empty", InputBundle{});
  EXPECT_EQ(report::cmd_oracle_check(w.config(w.root.path() / "empty"), w.out, w.err), 0);

  sim::ScenarioSpec big;
  big.machine_count = 300;
  big.hours = 2;
  EXPECT_EQ(report::cmd_oracle_check(w.config(w.bundle(big, "big")), w.out, w.err), 2);
}

TEST(CmdReport, SummarizesRun) {
  Workspace w;
  const auto cfg = w.config(w.bundle(sim::Preset::TwoAccounts));
  ASSERT_EQ(report::cmd_run(cfg, w.out, w.err), 0);
  std::ostringstream out;
  EXPECT_EQ(report::cmd_report(cfg.output, out, w.err), 0);
  EXPECT_NE(out.str().find("cloud-db"), std::string::npos);
  EXPECT_NE(out.str().find("acct-alpha"), std::string::npos);
  EXPECT_EQ(report::cmd_report(w.root.path() / "missing", out, w.err), 2);
}

TEST(CmdSimulate, BadSpec) {
  Workspace w;
  sim::ScenarioSpec spec;
  spec.idle_fraction = 1.5;
  EXPECT_EQ(report::cmd_simulate(spec, w.root.path() / "x", w.out, w.err), 2);
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(CARBONALLOC_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Binary, ExitCodes) {
  Workspace w;
  const auto in = w.bundle(sim::Preset::Figure1).string();
  const auto out = (w.root.path() / "bin-out").string();
  EXPECT_EQ(run_cli("run"), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("run -i " + in + " -o " + out + " --rounds 0"), 2);
  EXPECT_EQ(run_cli("run -i " + in + " -o " + out + " --from 2023-09-18T05:00Z --to 2023-09-18T05:00Z"), 2);
  EXPECT_EQ(run_cli("run -i " + in + " -o " + out + " --from yesterday"), 2);
  EXPECT_EQ(run_cli("simulate --preset nope -o " + out), 2);
  EXPECT_EQ(run_cli("validate -i " + in + " -o " + out), 0);
  EXPECT_EQ(run_cli("run -i " + in + " -o " + out + " --rounds 3 --busy-weights 1,0.05,1,0.1667"), 0);
  EXPECT_EQ(run_cli("oracle-check -i " + in + " -o " + out), 0);
  EXPECT_EQ(run_cli("report " + out), 0);
}

}  // namespace
}  // namespace carbonalloc
