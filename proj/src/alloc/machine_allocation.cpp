#include "carbonalloc/alloc/machine_allocation.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "carbonalloc/core/errors.hpp"

namespace carbonalloc::alloc {
namespace {

struct MachineHourKey {
  MachineId machine;
  Hour hour;
  bool operator==(const MachineHourKey&) const = default;
};

struct MachineHourHash {
  std::size_t operator()(const MachineHourKey& k) const noexcept {
    std::size_t seed = k.machine.value;
    hash_combine(seed, std::hash<std::int64_t>{}(k.hour.value));
    return seed;
  }
};

/// Splits `wh` over the group's users by weighted allocation.
template <class AddFn>
void spread(const AllocationShares::Group& group, double wh, AddFn&& add) {
  for (const auto& [user, weight] : group.weighted) {
    if (weight > 0) add(user, wh * (weight / group.total));
  }
}

}  // namespace

double weighted_allocation(const ResourceVector& v, const ResourceWeights& w) {
  return w.gcu * v.gcu + w.ram_per_gib * v.ram_gib + w.ssd_per_tib * v.ssd_tib + w.hdd_per_tib * v.hdd_tib;
}

double idle_fraction(UserId user, ClusterId cluster, Hour hour,
                     std::span<const ResourceAllocationRecord> allocations,
                     const ResourceWeights& weights) {
  double mine = 0.0;
  double total = 0.0;
  for (const auto& a : allocations) {
    if (a.cluster != cluster || a.hour != hour) continue;
    const double w = weighted_allocation(a.allocation, weights);
    total += w;
    if (a.user == user) mine += w;
  }
  if (!(total > 0)) {
    throw NoAllocationsError(fmt::format("no weighted allocation in cluster #{} at {}", cluster.value,
                                         format_hour(hour)));
  }
  return mine / total;
}

AllocationShares::AllocationShares(std::span<const ResourceAllocationRecord> allocations,
                                   const ResourceWeights& weights) {
  std::unordered_map<ClusterHourKey, std::map<UserId, double>, ClusterHourHash> raw;
  for (const auto& a : allocations) {
    raw[{a.cluster, a.hour}][a.user] += weighted_allocation(a.allocation, weights);
  }
  groups_.reserve(raw.size());
  for (auto& [key, per_user] : raw) {
    Group g;
    for (const auto& [user, w] : per_user) {
      g.weighted.emplace_back(user, w);
      g.total += w;
    }
    if (g.total > 0) groups_.emplace(key, std::move(g));
  }
}

const AllocationShares::Group* AllocationShares::find(ClusterId cluster, Hour hour) const {
  auto it = groups_.find({cluster, hour});
  return it == groups_.end() ? nullptr : &it->second;
}

UserEnergyLedger allocate_idle(std::span<const power::MachinePowerSplit> splits,
                               const MachineDirectory& machines, const AllocationShares& shares,
                               Diagnostics& diag) {
  LedgerBuilder ledger;
  std::map<std::pair<std::uint32_t, std::int64_t>, double> shared_idle;
  for (const auto& s : splits) {
    const MachineRecord* m = machines.find(s.machine);
    if (m == nullptr) throw InputError(fmt::format("split for unknown machine #{}", s.machine.value));
    if (m->sharing == Sharing::Dedicated) {
      if (!m->owner) throw InputError(fmt::format("dedicated machine #{} has no owner", s.machine.value));
      if (s.idle_watts > 0) ledger.add({m->cluster, s.hour, *m->owner}, s.idle_watts, 0.0);
    } else {
      shared_idle[{m->cluster.value, s.hour.value}] += s.idle_watts;
    }
  }

  std::size_t unallocated = 0;
  for (const auto& [key, idle] : shared_idle) {
    if (!(idle > 0)) continue;
    const ClusterId cluster{key.first};
    const Hour hour{key.second};
    if (const auto* group = shares.find(cluster, hour)) {
      spread(*group, idle, [&](UserId u, double wh) { ledger.add({cluster, hour, u}, wh, 0.0); });
    } else {
      ledger.add({cluster, hour, Names::unallocated_overhead()}, idle, 0.0);
      ++unallocated;
    }
  }
  if (unallocated > 0) {
    diag.warn("no_allocations", fmt::format("{} cluster-hours with shared idle power but no resource "
                                            "allocations; assigned to the unallocated-overhead user",
                                            unallocated));
  }
  return std::move(ledger).finish(Stage::machine());
}

UserEnergyLedger allocate_dynamic(std::span<const power::MachinePowerSplit> splits,
                                  const MachineDirectory& machines,
                                  std::span<const GcuUsageRecord> usage,
                                  const AllocationShares& shares, Diagnostics& diag) {
  std::unordered_map<MachineHourKey, std::size_t, MachineHourHash> index;
  index.reserve(splits.size());
  for (std::size_t i = 0; i < splits.size(); ++i) index.emplace(MachineHourKey{splits[i].machine, splits[i].hour}, i);

  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<double> total_gcu(splits.size(), 0.0);
  std::vector<std::size_t> slot(usage.size(), kNone);
  for (std::size_t u = 0; u < usage.size(); ++u) {
    if (!(usage[u].gcu_used > 0)) continue;
    auto it = index.find({usage[u].machine, usage[u].hour});
    if (it == index.end()) continue;  // no sample: machine-hour draws zero power
    slot[u] = it->second;
    total_gcu[it->second] += usage[u].gcu_used;
  }

  std::vector<ClusterId> cluster_of(splits.size());
  for (std::size_t i = 0; i < splits.size(); ++i) {
    const MachineRecord* m = machines.find(splits[i].machine);
    if (m == nullptr) throw InputError(fmt::format("split for unknown machine #{}", splits[i].machine.value));
    cluster_of[i] = m->cluster;
  }

  LedgerBuilder ledger;
  for (std::size_t u = 0; u < usage.size(); ++u) {
    if (slot[u] == kNone) continue;
    const auto& s = splits[slot[u]];
    if (!(s.dynamic_watts > 0)) continue;
    ledger.add({cluster_of[slot[u]], s.hour, usage[u].user}, 0.0,
               s.dynamic_watts * (usage[u].gcu_used / total_gcu[slot[u]]));
  }

  std::size_t idle_machines = 0;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    const auto& s = splits[i];
    if (total_gcu[i] > 0 || !(s.dynamic_watts > 0)) continue;
    ++idle_machines;
    const MachineRecord* m = machines.find(s.machine);
    if (m->sharing == Sharing::Dedicated && m->owner) {
      ledger.add({m->cluster, s.hour, *m->owner}, 0.0, s.dynamic_watts);
    } else if (const auto* group = shares.find(m->cluster, s.hour)) {
      spread(*group, s.dynamic_watts,
             [&](UserId user, double wh) { ledger.add({m->cluster, s.hour, user}, 0.0, wh); });
    } else {
      ledger.add({m->cluster, s.hour, Names::unallocated_overhead()}, 0.0, s.dynamic_watts);
    }
  }
  if (idle_machines > 0) {
    diag.warn("zero_gcu_usage", fmt::format("{} machine-hours drew dynamic power with no GCU usage; "
                                            "assigned to owner or by idle fractions",
                                            idle_machines));
  }
  return std::move(ledger).finish(Stage::machine());
}

}  // namespace carbonalloc::alloc
