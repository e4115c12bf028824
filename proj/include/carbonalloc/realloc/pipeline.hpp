#pragma once

#include <vector>

#include "carbonalloc/alloc/ledger.hpp"
#include "carbonalloc/core/diagnostics.hpp"
#include "carbonalloc/core/model.hpp"
#include "carbonalloc/power/power_split.hpp"
#include "carbonalloc/realloc/service_realloc.hpp"

namespace carbonalloc::realloc {

struct PipelineConfig {
  PowerWeighting weights{};
  int minor_rounds = 2;
};

/// Every stage of one allocation run. stages[0] is the machine stage,
/// stages[1] after major reallocation, then one ledger per minor round.
struct PipelineResult {
  std::vector<power::MachinePowerSplit> splits;
  std::vector<power::ClusterPower> cluster_power;
  std::vector<alloc::UserEnergyLedger> stages;
  FlowLog flows;
  Diagnostics diagnostics;

  const alloc::UserEnergyLedger& final_ledger() const { return stages.back(); }
  double measured_total_wh() const;
};

/// Idle allocation, dynamic allocation, major reallocation, then the
/// configured number of net-cost rounds.
PipelineResult run_allocation_pipeline(const InputBundle& bundle, const PipelineConfig& config);

}  // namespace carbonalloc::realloc
