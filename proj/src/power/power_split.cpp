#include "carbonalloc/power/power_split.hpp"

#include <algorithm>
#include <map>
#include <unordered_set>

#include <fmt/format.h>

#include "carbonalloc/core/errors.hpp"

namespace carbonalloc::power {

MachinePowerSplit split_power(const MachineRecord& machine, const PowerSample& sample) {
  if (machine.machine != sample.machine) {
    throw InputError(fmt::format("power sample for machine #{} applied to machine #{}",
                                 sample.machine.value, machine.machine.value));
  }
  const double p = sample.measured_power_watts;
  // A rating above the measured power is a misconfigured idle reading.
  const double idle = std::min(machine.idle_rating_watts, p);
  return {sample.machine, sample.hour, idle, p - idle, p};
}

std::vector<MachinePowerSplit> split_all(const MachineDirectory& machines,
                                         std::span<const PowerSample> samples, Diagnostics& diag) {
  std::vector<MachinePowerSplit> out;
  out.reserve(samples.size());
  std::unordered_set<std::int64_t> hours;
  for (const auto& s : samples) {
    const MachineRecord* m = machines.find(s.machine);
    if (m == nullptr) {
      throw InputError(fmt::format("power sample references unknown machine #{}", s.machine.value));
    }
    out.push_back(split_power(*m, s));
    hours.insert(s.hour.value);
  }
  const std::size_t expected = machines.records().size() * hours.size();
  if (expected > out.size()) {
    diag.warn("missing_sample",
              fmt::format("{} machine-hours without a power sample contribute zero power",
                          expected - out.size()));
  }
  return out;
}

std::vector<ClusterPower> cluster_power_series(std::span<const MachinePowerSplit> splits,
                                               const MachineDirectory& machines) {
  std::map<std::pair<std::uint32_t, std::int64_t>, ClusterPower> sums;
  for (const auto& s : splits) {
    const MachineRecord* m = machines.find(s.machine);
    if (m == nullptr) {
      throw InputError(fmt::format("split references unknown machine #{}", s.machine.value));
    }
    auto [it, fresh] = sums.try_emplace({m->cluster.value, s.hour.value});
    auto& c = it->second;
    if (fresh) {
      c.cluster = m->cluster;
      c.hour = s.hour;
    }
    c.idle_watts += s.idle_watts;
    c.dynamic_watts += s.dynamic_watts;
    c.measured_watts += s.measured_watts;
  }
  std::vector<ClusterPower> out;
  out.reserve(sums.size());
  for (auto& [_, c] : sums) out.push_back(c);
  return out;
}

}  // namespace carbonalloc::power
