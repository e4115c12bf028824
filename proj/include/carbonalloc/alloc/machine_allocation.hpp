#pragma once

#include <span>
#include <unordered_map>
#include <vector>

#include "carbonalloc/alloc/ledger.hpp"
#include "carbonalloc/core/diagnostics.hpp"
#include "carbonalloc/core/model.hpp"
#include "carbonalloc/power/power_split.hpp"

namespace carbonalloc::alloc {

/// Busy-power weighted size of a resource allocation, in core equivalents.
double weighted_allocation(const ResourceVector& v, const ResourceWeights& w);

/// Share of the cluster's shared idle power owed to `user` in one hour.
/// Throws NoAllocationsError when nobody holds a weighted allocation there.
double idle_fraction(UserId user, ClusterId cluster, Hour hour,
                     std::span<const ResourceAllocationRecord> allocations,
                     const ResourceWeights& weights);

struct ClusterHourKey {
  ClusterId cluster;
  Hour hour;
  bool operator==(const ClusterHourKey&) const = default;
};

struct ClusterHourHash {
  std::size_t operator()(const ClusterHourKey& k) const noexcept {
    std::size_t seed = k.cluster.value;
    hash_combine(seed, std::hash<std::int64_t>{}(k.hour.value));
    return seed;
  }
};

/// Weighted allocations of every user, grouped by cluster-hour.
class AllocationShares {
 public:
  struct Group {
    std::vector<std::pair<UserId, double>> weighted;  // sorted by user, merged
    double total = 0.0;
  };

  AllocationShares(std::span<const ResourceAllocationRecord> allocations, const ResourceWeights& weights);

  /// nullptr when no user holds a positive weighted allocation.
  const Group* find(ClusterId cluster, Hour hour) const;

 private:
  std::unordered_map<ClusterHourKey, Group, ClusterHourHash> groups_;
};

/// Dedicated idle goes to the owner; shared idle of a cluster-hour is split by
/// idle fractions, or to the unallocated-overhead user when nobody holds an
/// allocation.
UserEnergyLedger allocate_idle(std::span<const power::MachinePowerSplit> splits,
                               const MachineDirectory& machines, const AllocationShares& shares,
                               Diagnostics& diag);

/// Dynamic power of each machine-hour goes to its users in proportion to their
/// GCU usage. Machine-hours with dynamic power but no usage go to the owner
/// (dedicated) or follow the idle fractions (shared).
UserEnergyLedger allocate_dynamic(std::span<const power::MachinePowerSplit> splits,
                                  const MachineDirectory& machines,
                                  std::span<const GcuUsageRecord> usage,
                                  const AllocationShares& shares, Diagnostics& diag);

}  // namespace carbonalloc::alloc
