#include "carbonalloc/report/commands.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "carbonalloc/core/errors.hpp"
#include "carbonalloc/core/validate.hpp"
#include "carbonalloc/io/bundle_io.hpp"
#include "carbonalloc/io/csv.hpp"

namespace carbonalloc::report {

InputBundle load_for_run(const RunConfig& config) {
  InputBundle bundle = io::load_bundle(config.input);
  if (!config.from && !config.to) return bundle;
  const Hour from = config.from.value_or(Hour{std::numeric_limits<std::int64_t>::min() / 2});
  const Hour to = config.to.value_or(Hour{std::numeric_limits<std::int64_t>::max() / 2});
  return restrict_to_range(bundle, from, to);
}

int cmd_validate(const RunConfig& config, std::ostream& out, std::ostream& err) {
  InputBundle bundle;
  try {
    bundle = io::load_bundle(config.input);
  } catch (const InputError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return 2;
  }
  const auto report = validate_bundle(bundle);
  write_validation_report(config.output, report);
  fmt::print(out, "{} violations; report at {}\n", report.size(),
             (config.output / "validation_report.csv").string());
  for (std::size_t i = 0; i < std::min<std::size_t>(report.size(), 10); ++i) {
    fmt::print(out, "  {} {}: {}\n", report[i].kind, report[i].entity, report[i].detail);
  }
  return report.empty() ? 0 : 1;
}

int cmd_run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  InputBundle bundle;
  try {
    validate_config(config);
    bundle = load_for_run(config);
  } catch (const ConfigError& e) {
    fmt::print(err, "config error: {}\n", e.what());
    return 2;
  } catch (const InputError& e) {
    fmt::print(err, "input error: {}\n", e.what());
    return 2;
  }
  const auto violations = validate_bundle(bundle);
  if (!violations.empty()) {
    write_validation_report(config.output, violations);
    fmt::print(err, "input bundle has {} violations (see validation_report.csv); first: {} {}\n",
               violations.size(), violations.front().kind, violations.front().entity);
    return 2;
  }

  RunOutputs run;
  try {
    run = execute_run(bundle, config);
  } catch (const MissingIntensityError& e) {
    fmt::print(err, "error: missing carbon intensity for {}\n", e.key());
    return 1;
  } catch (const BetaUndefinedError& e) {
    fmt::print(err, "error: beta undefined for {}: cloud emissions but no billed usage\n", e.key());
    return 1;
  } catch (const ConfigError& e) {
    fmt::print(err, "config error: {}\n", e.what());
    return 2;
  } catch (const InputError& e) {
    fmt::print(err, "input error: {}\n", e.what());
    return 2;
  }
  write_reports(config.output, bundle, run, config);

  double kg = 0.0;
  for (const auto& e : run.emissions) kg += e.kg_co2e;
  fmt::print(out, "measured {:.3f} kWh, final ledger {} rows over {} stages, {:.3f} kgCO2e, {} footprint rows\n",
             run.pipeline.measured_total_wh() / 1000.0, run.pipeline.final_ledger().entries().size(),
             run.pipeline.stages.size(), kg, run.footprint.rows.size());
  const std::size_t warnings = run.pipeline.diagnostics.entries().size() + run.diagnostics.entries().size();
  if (warnings > 0) fmt::print(out, "{} warnings in diagnostics.csv\n", warnings);

  std::size_t failed = 0;
  for (const auto& c : run.closures) {
    if (c.pass) continue;
    ++failed;
    fmt::print(err, "closure failed: {} {} expected {} actual {} (rel {:.3g})\n", c.check, c.key, c.expected,
               c.actual, c.rel_error);
  }
  fmt::print(out, "{} closure checks, {} failed; reports in {}\n", run.closures.size(), failed,
             config.output.string());
  return failed == 0 ? 0 : 1;
}

int cmd_simulate(const sim::ScenarioSpec& spec, const std::filesystem::path& dir, std::ostream& out,
                 std::ostream& err) {
  try {
    const InputBundle bundle = sim::generate(spec);
    sim::write_scenario(dir, spec, bundle);
    fmt::print(out, "wrote {} machines, {} samples, {} users to {}\n", bundle.machines.size(),
               bundle.power_samples.size(), bundle.names.users.size() - 1, dir.string());
    return 0;
  } catch (const ConfigError& e) {
    fmt::print(err, "spec error: {}\n", e.what());
    return 2;
  }
}

int cmd_oracle_check(const RunConfig& config, std::ostream& out, std::ostream& err) {
  InputBundle bundle;
  try {
    validate_config(config);
    bundle = load_for_run(config);
  } catch (const std::runtime_error& e) {
    fmt::print(err, "error: {}\n", e.what());
    return 2;
  }
  oracle::OracleResult reference;
  try {
    reference = oracle::oracle_allocate(bundle, oracle_config(config));
  } catch (const oracle::OracleLimitError& e) {
    fmt::print(err, "oracle refused: {}\n", e.what());
    return 2;
  } catch (const std::runtime_error& e) {
    fmt::print(err, "oracle error: {}\n", e.what());
    return 1;
  }
  RunOutputs run;
  try {
    run = execute_run(bundle, config);
  } catch (const std::runtime_error& e) {
    fmt::print(err, "pipeline error: {}\n", e.what());
    return 1;
  }
  const auto comparison = compare_with_oracle(bundle, run, reference);
  write_oracle_diff(config.output, comparison);
  for (const auto& t : comparison.tables) {
    fmt::print(out, "{:<40} rows {:>8}  max rel dev {:.3e}{}\n", t.table, t.rows, t.max_rel_dev,
               t.max_rel_dev > 0 ? "  worst " + t.worst_key : std::string{});
  }
  const double worst = comparison.max_rel_dev();
  const bool ok = worst < config.tolerance;
  fmt::print(out, "{}: max relative deviation {:.3e} (tolerance {:.0e})\n", ok ? "PASS" : "FAIL", worst,
             config.tolerance);
  return ok ? 0 : 1;
}

int cmd_report(const std::filesystem::path& run_dir, std::ostream& out, std::ostream& err) {
  struct Totals {
    double it_wh = 0.0;
    double total_wh = 0.0;
    double kg = 0.0;
  };
  std::map<std::string, Totals> by_user;
  std::map<std::string, double> by_account;
  try {
    io::CsvReader emissions(run_dir / "emissions.csv");
    const auto user = emissions.column("user");
    const auto it_wh = emissions.column("energy_it_wh");
    const auto total_wh = emissions.column("energy_total_wh");
    const auto kg = emissions.column("kg_co2e");
    std::vector<std::string_view> f;
    while (emissions.next(f)) {
      auto& t = by_user[std::string(f[user])];
      t.it_wh += io::parse_double(f[it_wh], emissions);
      t.total_wh += io::parse_double(f[total_wh], emissions);
      t.kg += io::parse_double(f[kg], emissions);
    }
    const auto fp_path = run_dir / "footprint_report.csv";
    if (std::filesystem::exists(fp_path)) {
      io::CsvReader fp(fp_path);
      const auto account = fp.column("billing_account");
      const auto fkg = fp.column("kg_co2e");
      while (fp.next(f)) by_account[std::string(f[account])] += io::parse_double(f[fkg], fp);
    }
  } catch (const InputError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return 2;
  }

  std::vector<std::pair<std::string, Totals>> rows(by_user.begin(), by_user.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second.kg > b.second.kg; });
  fmt::print(out, "{:<32} {:>16} {:>16} {:>14}\n", "user", "it_kwh", "facility_kwh", "kg_co2e");
  Totals sum;
  for (const auto& [name, t] : rows) {
    fmt::print(out, "{:<32} {:>16.3f} {:>16.3f} {:>14.3f}\n", name, t.it_wh / 1e3, t.total_wh / 1e3, t.kg);
    sum.it_wh += t.it_wh;
    sum.total_wh += t.total_wh;
    sum.kg += t.kg;
  }
  fmt::print(out, "{:<32} {:>16.3f} {:>16.3f} {:>14.3f}\n", "TOTAL", sum.it_wh / 1e3, sum.total_wh / 1e3, sum.kg);
  if (!by_account.empty()) {
    fmt::print(out, "\n{:<32} {:>14}\n", "billing_account", "kg_co2e");
    for (const auto& [account, kg] : by_account) fmt::print(out, "{:<32} {:>14.3f}\n", account, kg);
  }
  return 0;
}

}  // namespace carbonalloc::report
