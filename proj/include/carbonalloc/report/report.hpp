#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "carbonalloc/carbon/carbon_engine.hpp"
#include "carbonalloc/core/diagnostics.hpp"
#include "carbonalloc/core/model.hpp"
#include "carbonalloc/core/validate.hpp"
#include "carbonalloc/footprint/customer_footprint.hpp"
#include "carbonalloc/oracle/oracle.hpp"
#include "carbonalloc/realloc/pipeline.hpp"

namespace carbonalloc::report {

struct RunConfig {
  std::filesystem::path input;
  std::filesystem::path output = "out";
  std::optional<Hour> from;  // inclusive
  std::optional<Hour> to;    // exclusive
  int rounds = 2;
  double default_pue = 1.10;
  bool allow_missing_intensity = false;
  double default_g_per_kwh = 320.8;
  std::string currency = "USD";
  int energy_decimals = 0;  // Wh
  int carbon_decimals = 3;  // kg, so 1 g
  PowerWeighting weights{};
  int oracle_rounds = 2;
  double tolerance = 1e-9;
};

/// Throws ConfigError: rounds < 1, empty range, PUE < 1, bad currency code,
/// negative decimals.
void validate_config(const RunConfig& config);

/// |a - b| / max(|a|, |b|, floor); 0 when both are zero.
double relative_deviation(double a, double b, double floor = 0.0);

struct ClosureCheck {
  std::string check;
  std::string key;
  double expected = 0.0;
  double actual = 0.0;
  double rel_error = 0.0;
  bool pass = true;
};

struct RunOutputs {
  realloc::PipelineResult pipeline;
  std::vector<carbon::EmissionRecord> emissions;
  footprint::FootprintResult footprint;
  std::vector<ClosureCheck> closures;
  Diagnostics diagnostics;  // carbon and footprint stages; the pipeline keeps its own

  bool closures_pass() const;
};

/// Allocation pipeline, emissions, customer footprints and closure checks.
RunOutputs execute_run(const InputBundle& bundle, const RunConfig& config);

/// Energy conservation per cluster-hour at every stage, carbon closure over
/// the fleet, and the per-month SKU and footprint closures.
std::vector<ClosureCheck> closure_checks(const InputBundle& bundle, const RunOutputs& run, double tolerance);

/// user_energy, emissions, footprint_report, footprint_months,
/// footprint_providers, flow_summary, flow_edges, closure_report,
/// diagnostics and run_config.json.
void write_reports(const std::filesystem::path& dir, const InputBundle& bundle, const RunOutputs& run,
                   const RunConfig& config);

void write_validation_report(const std::filesystem::path& dir, const ValidationReport& report);

struct DiffRow {
  std::string table;
  std::string key;
  double pipeline = 0.0;
  double oracle = 0.0;
  double rel_dev = 0.0;
};

struct TableSummary {
  std::string table;
  std::size_t rows = 0;
  double max_rel_dev = 0.0;
  std::string worst_key;
};

struct OracleComparison {
  std::vector<TableSummary> tables;
  std::vector<DiffRow> worst;  // up to 20 per table, largest first
  double max_rel_dev() const;
};

/// Table-by-table comparison. Values below 1e-6 of a table's largest
/// magnitude are compared against that floor rather than themselves.
OracleComparison compare_with_oracle(const InputBundle& bundle, const RunOutputs& run,
                                     const oracle::OracleResult& reference);

void write_oracle_diff(const std::filesystem::path& dir, const OracleComparison& comparison);

oracle::OracleConfig oracle_config(const RunConfig& config);

}  // namespace carbonalloc::report
