#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "carbonalloc/core/errors.hpp"
#include "carbonalloc/report/commands.hpp"

namespace {

using carbonalloc::ConfigError;
using carbonalloc::Hour;
using carbonalloc::ResourceWeights;
using carbonalloc::report::RunConfig;

struct RawRunFlags {
  std::string from;
  std::string to;
  std::vector<double> busy;
  std::vector<double> usage;
};

void add_input_output(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("-i,--input", cfg.input, "Input bundle directory")->required()->check(CLI::ExistingDirectory);
  cmd->add_option("-o,--output", cfg.output, "Output directory")->capture_default_str();
}

void add_run_flags(CLI::App* cmd, RunConfig& cfg, RawRunFlags& raw) {
  add_input_output(cmd, cfg);
  cmd->add_option("--from", raw.from, "First UTC hour, e.g. 2023-09-18T00:00Z");
  cmd->add_option("--to", raw.to, "End UTC hour (exclusive)");
  cmd->add_option("--rounds", cfg.rounds, "Net-cost reallocation rounds")->capture_default_str();
  cmd->add_option("--default-pue", cfg.default_pue, "PUE for cluster-hours without a measurement")
      ->capture_default_str();
  cmd->add_flag("--allow-missing-intensity", cfg.allow_missing_intensity,
                "Use --default-intensity instead of failing when no intensity is known");
  cmd->add_option("--default-intensity", cfg.default_g_per_kwh, "Fallback gCO2e/kWh")->capture_default_str();
  cmd->add_option("--currency", cfg.currency, "ISO 4217 code of list prices")->capture_default_str();
  cmd->add_option("--energy-decimals", cfg.energy_decimals, "Decimals of Wh columns")->capture_default_str();
  cmd->add_option("--carbon-decimals", cfg.carbon_decimals, "Decimals of kg columns")->capture_default_str();
  cmd->add_option("--busy-weights", raw.busy, "gcu,ram_per_gib,ssd_per_tib,hdd_per_tib")
      ->delimiter(',')
      ->expected(4);
  cmd->add_option("--usage-weights", raw.usage, "Storage-service weights, same order (ram ignored)")
      ->delimiter(',')
      ->expected(4);
}

ResourceWeights to_weights(const std::vector<double>& v) { return {v[0], v[1], v[2], v[3]}; }

/// Applies the string/vector flags; throws ConfigError or InputError on bad values.
void finish_run_flags(RunConfig& cfg, const RawRunFlags& raw) {
  if (!raw.from.empty()) cfg.from = carbonalloc::parse_hour(raw.from);
  if (!raw.to.empty()) cfg.to = carbonalloc::parse_hour(raw.to);
  if (!raw.busy.empty()) {
    cfg.weights.busy = to_weights(raw.busy);
    // Storage weights follow the busy ones unless given explicitly.
    if (raw.usage.empty()) cfg.weights.usage = cfg.weights.busy;
  }
  if (!raw.usage.empty()) cfg.weights.usage = to_weights(raw.usage);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Allocate data-center energy and emissions to users, services and billing accounts"};
  app.require_subcommand(1);

  RunConfig validate_cfg;
  auto* validate = app.add_subcommand("validate", "Check an input bundle; writes validation_report.csv");
  add_input_output(validate, validate_cfg);

  RunConfig run_cfg;
  RawRunFlags run_raw;
  auto* run = app.add_subcommand("run", "Run the full allocation and write reports");
  add_run_flags(run, run_cfg, run_raw);

  RunConfig oracle_cfg;
  RawRunFlags oracle_raw;
  auto* oracle = app.add_subcommand("oracle-check", "Compare the pipeline against the brute-force oracle");
  add_run_flags(oracle, oracle_cfg, oracle_raw);
  oracle->add_option("--oracle-rounds", oracle_cfg.oracle_rounds, "Net-cost rounds used by the oracle")
      ->capture_default_str();
  oracle->add_option("--tolerance", oracle_cfg.tolerance, "Maximum relative deviation")->capture_default_str();

  carbonalloc::sim::ScenarioSpec spec;
  std::string preset;
  std::string start;
  bool no_billing = false;
  std::filesystem::path sim_out = "bundle";
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic input bundle");
  simulate->add_option("-o,--output", sim_out, "Bundle directory")->capture_default_str();
  simulate->add_option("--seed", spec.seed)->capture_default_str();
  simulate->add_option("--preset", preset,
                       "figure1, sankey-small, overhead-pool, two-accounts, balanced-service or blobstore-ads");
  simulate->add_option("--machines", spec.machine_count)->capture_default_str();
  simulate->add_option("--users", spec.user_count)->capture_default_str();
  simulate->add_option("--hours", spec.hours)->capture_default_str();
  simulate->add_option("--clusters", spec.cluster_count, "0 picks one cluster per 250 machines")
      ->capture_default_str();
  simulate->add_option("--start", start, "First UTC hour (default 2023-09-18T00:00Z)");
  simulate->add_option("--idle-fraction", spec.idle_fraction, "Idle rating as a fraction of peak")
      ->capture_default_str();
  simulate->add_option("--diurnal-amplitude", spec.diurnal_amplitude)->capture_default_str();
  simulate->add_option("--economy-depth", spec.economy.acyclic_depth)->capture_default_str();
  simulate->add_flag("--cyclic", spec.economy.cyclic, "Close the provider chain into a cycle");
  simulate->add_option("--figure1-machines", spec.figure1_machines, "Split the figure1 aggregate machine")
      ->capture_default_str();
  simulate->add_option("--ci-mean", spec.intensity.mean_g_per_kwh)->capture_default_str();
  simulate->add_option("--ci-std", spec.intensity.std_g_per_kwh)->capture_default_str();
  simulate->add_flag("--no-billing", no_billing, "Skip the SKU catalog and billing tables");

  std::filesystem::path report_dir;
  auto* report = app.add_subcommand("report", "Summarize the outputs of a previous run");
  report->add_option("run_dir", report_dir, "Output directory of `run`")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  namespace r = carbonalloc::report;
  try {
    if (*validate) return r::cmd_validate(validate_cfg, std::cout, std::cerr);
    if (*run) {
      finish_run_flags(run_cfg, run_raw);
      return r::cmd_run(run_cfg, std::cout, std::cerr);
    }
    if (*oracle) {
      finish_run_flags(oracle_cfg, oracle_raw);
      return r::cmd_oracle_check(oracle_cfg, std::cout, std::cerr);
    }
    if (*simulate) {
      if (!preset.empty()) spec.preset = carbonalloc::sim::parse_preset(preset);
      if (!start.empty()) spec.start = carbonalloc::parse_hour(start);
      spec.with_billing = !no_billing;
      return r::cmd_simulate(spec, sim_out, std::cout, std::cerr);
    }
    if (*report) return r::cmd_report(report_dir, std::cout, std::cerr);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const carbonalloc::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
