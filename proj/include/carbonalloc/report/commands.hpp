#pragma once

#include <filesystem>
#include <iosfwd>

#include "carbonalloc/report/report.hpp"
#include "carbonalloc/sim/fleet_sim.hpp"

// Subcommands behind the CLI. Each returns the process exit status and
// writes human-readable progress to `out` and errors to `err`.
namespace carbonalloc::report {

/// 0 no violations, 1 violations (validation_report.csv lists them), 2 unreadable input.
int cmd_validate(const RunConfig& config, std::ostream& out, std::ostream& err);

/// 0 success, 1 missing intensity / undefined beta / failed closure,
/// 2 bad config, unreadable input or invalid bundle.
int cmd_run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// 0 written, 2 bad spec.
int cmd_simulate(const sim::ScenarioSpec& spec, const std::filesystem::path& dir, std::ostream& out,
                 std::ostream& err);

/// 0 within tolerance, 1 deviation or pipeline error, 2 oversized bundle or bad input.
int cmd_oracle_check(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Per-user totals of a previous run's output directory. 2 when it is unreadable.
int cmd_report(const std::filesystem::path& run_dir, std::ostream& out, std::ostream& err);

/// load_bundle plus the configured date range.
InputBundle load_for_run(const RunConfig& config);

}  // namespace carbonalloc::report
