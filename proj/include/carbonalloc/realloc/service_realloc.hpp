#pragma once

#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "carbonalloc/alloc/ledger.hpp"
#include "carbonalloc/alloc/machine_allocation.hpp"
#include "carbonalloc/core/diagnostics.hpp"
#include "carbonalloc/core/model.hpp"

namespace carbonalloc::realloc {

/// Energy moved between users, aggregated per (stage, from, to).
class FlowLog {
 public:
  struct Edge {
    alloc::Stage stage;
    UserId from;
    UserId to;
    double wh = 0.0;
  };

  void add(alloc::Stage stage, UserId from, UserId to, double wh);
  double moved_wh(alloc::Stage stage) const;
  /// Sorted by (stage order, from, to).
  std::vector<Edge> edges() const;

 private:
  struct Key {
    int stage_order;
    std::uint32_t from;
    std::uint32_t to;
    auto operator<=>(const Key&) const = default;
  };
  std::map<Key, double> cells_;
};

/// Each provider's own GCU usage per (cluster, hour), joined through machines.
class ProviderGcuTotals {
 public:
  ProviderGcuTotals(std::span<const GcuUsageRecord> usage, const MachineDirectory& machines);
  double get(UserId user, ClusterId cluster, Hour hour) const;

 private:
  std::unordered_map<alloc::LedgerKey, double, alloc::LedgerKeyHash> totals_;
};

/// Major-service usage grouped by (provider, cluster, hour).
class ServiceUsageIndex {
 public:
  struct Group {
    UserId provider;
    ClusterId cluster;
    Hour hour;
    std::vector<std::pair<UserId, ResourceVector>> consumers;  // sorted by consumer, merged
    bool colossus_style = false;
  };

  explicit ServiceUsageIndex(std::span<const ServiceUsageRecord> records);
  const Group* find(UserId provider, ClusterId cluster, Hour hour) const;
  const std::vector<Group>& groups() const { return groups_; }

 private:
  std::vector<Group> groups_;
  std::unordered_map<alloc::LedgerKey, std::size_t, alloc::LedgerKeyHash> index_;
};

/// GCU share of the provider's dynamic power owed to `consumer`. The
/// denominator is the provider's total GCU usage in the cluster-hour, and never
/// less than the GCU its consumers report. nullopt when it is zero.
std::optional<double> major_fraction(UserId consumer, UserId provider, ClusterId cluster, Hour hour,
                                     const ServiceUsageIndex& usage, const ProviderGcuTotals& totals);

/// Storage-style variant: GCU, SSD and HDD usage blended with usage-power
/// weights. nullopt when the weighted denominator is zero.
std::optional<double> colossus_fraction(UserId consumer, UserId provider, ClusterId cluster, Hour hour,
                                        const ServiceUsageIndex& usage, const ResourceWeights& usage_weights);

/// Moves fractions of each provider's machine-stage dynamic power to its
/// consumers. Idle power does not move.
alloc::UserEnergyLedger apply_major_realloc(const alloc::UserEnergyLedger& machine_stage,
                                            const ServiceUsageIndex& usage,
                                            const ProviderGcuTotals& totals,
                                            const PowerWeighting& weights, FlowLog* flows);

/// Cost position of one user on one day.
struct UserCostSummary {
  UserId user;
  double non_service_cost = 0.0;  // n-hat
  double total_cost = 0.0;        // non-service cost plus all service net costs

  /// max(|n^S|, total) for the provider's net cost n^S of one service.
  double clamped_denominator(double service_net_cost) const;
};

/// The user with the most negative net cost. Ties go to the lexicographically
/// smallest name with a "provider_tie" warning; no negative cost yields
/// nullopt with "provider_ambiguous".
std::optional<UserId> identify_provider(ServiceId service, std::span<const NetCostRecord> day_records,
                                        const Names& names, Diagnostics& diag);

/// consumer_net_cost / clamped denominator; nullopt when the denominator is 0.
std::optional<double> minor_fraction(double consumer_net_cost, double provider_service_net_cost,
                                     const UserCostSummary& provider);

/// Daily net-cost transfer fractions, per (day, provider), summed over the
/// services the provider runs.
class MinorTransferPlan {
 public:
  struct Transfer {
    UserId consumer;
    double fraction = 0.0;
  };

  static MinorTransferPlan build(std::span<const NetCostRecord> net_costs,
                                 std::span<const NonServiceCostRecord> non_service_costs,
                                 const Names& names, Diagnostics& diag);

  const std::vector<Transfer>* find(Day day, UserId provider) const;
  bool empty() const { return plan_.empty(); }
  const std::map<std::pair<std::int64_t, std::uint32_t>, std::vector<Transfer>>& all() const {
    return plan_;
  }

 private:
  std::map<std::pair<std::int64_t, std::uint32_t>, std::vector<Transfer>> plan_;
};

/// One net-cost round: each consumer receives fraction * (provider's energy at
/// the input stage) in every cluster-hour of the day. All transfers read the
/// input ledger, so the order of providers does not matter.
alloc::UserEnergyLedger apply_minor_realloc_round(const alloc::UserEnergyLedger& input,
                                                  const MinorTransferPlan& plan, alloc::Stage next,
                                                  FlowLog* flows);

}  // namespace carbonalloc::realloc
