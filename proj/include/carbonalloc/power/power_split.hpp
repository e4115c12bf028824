#pragma once

#include <span>
#include <vector>

#include "carbonalloc/core/diagnostics.hpp"
#include "carbonalloc/core/model.hpp"

namespace carbonalloc::power {

/// Idle/dynamic decomposition of one machine-hour. idle + dynamic reproduces
/// the measured power.
struct MachinePowerSplit {
  MachineId machine;
  Hour hour;
  double idle_watts = 0.0;
  double dynamic_watts = 0.0;
  double measured_watts = 0.0;
};

/// idle = min(rating, measured), dynamic = measured - idle.
/// Throws InputError when the sample belongs to another machine.
MachinePowerSplit split_power(const MachineRecord& machine, const PowerSample& sample);

/// Splits every sample. Machine-hours without a sample are treated as powered
/// off and reported once as a "missing_sample" diagnostic.
std::vector<MachinePowerSplit> split_all(const MachineDirectory& machines,
                                         std::span<const PowerSample> samples, Diagnostics& diag);

struct ClusterPower {
  ClusterId cluster;
  Hour hour;
  double idle_watts = 0.0;
  double dynamic_watts = 0.0;
  double measured_watts = 0.0;
};

/// Per (cluster, hour) sums, sorted by cluster then hour.
std::vector<ClusterPower> cluster_power_series(std::span<const MachinePowerSplit> splits,
                                               const MachineDirectory& machines);

}  // namespace carbonalloc::power
