#include "carbonalloc/realloc/pipeline.hpp"

#include "carbonalloc/alloc/machine_allocation.hpp"
#include "carbonalloc/core/errors.hpp"

namespace carbonalloc::realloc {

double PipelineResult::measured_total_wh() const {
  double total = 0.0;
  for (const auto& s : splits) total += s.measured_watts;
  return total;
}

PipelineResult run_allocation_pipeline(const InputBundle& bundle, const PipelineConfig& config) {
  if (config.minor_rounds < 1) throw ConfigError("minor_rounds must be at least 1");
  PipelineResult result;
  const MachineDirectory machines(bundle.machines);

  result.splits = power::split_all(machines, bundle.power_samples, result.diagnostics);
  result.cluster_power = power::cluster_power_series(result.splits, machines);

  // Steps 1-2: idle and dynamic allocation.
  const alloc::AllocationShares shares(bundle.allocations, config.weights.busy);
  auto idle = alloc::allocate_idle(result.splits, machines, shares, result.diagnostics);
  auto dynamic = alloc::allocate_dynamic(result.splits, machines, bundle.gcu_usage, shares, result.diagnostics);
  result.stages.push_back(alloc::merge(idle, dynamic, alloc::Stage::machine()));

  // Step 3: major shared services.
  const ServiceUsageIndex usage(bundle.service_usage);
  const ProviderGcuTotals totals(bundle.gcu_usage, machines);
  result.stages.push_back(
      apply_major_realloc(result.stages.back(), usage, totals, config.weights, &result.flows));

  // Steps 4-5 (and beyond, when configured): net-cost rounds.
  const auto plan = MinorTransferPlan::build(bundle.net_costs, bundle.non_service_costs, bundle.names,
                                             result.diagnostics);
  for (int round = 1; round <= config.minor_rounds; ++round) {
    result.stages.push_back(apply_minor_realloc_round(result.stages.back(), plan,
                                                      alloc::Stage::after_minor(round), &result.flows));
  }
  return result;
}

}  // namespace carbonalloc::realloc
