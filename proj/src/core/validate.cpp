#include "carbonalloc/core/validate.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <fmt/format.h>

namespace carbonalloc {
namespace {

struct MachineHourKey {
  MachineId machine;
  Hour hour;
  bool operator==(const MachineHourKey&) const = default;
};

struct MachineHourHash {
  std::size_t operator()(const MachineHourKey& k) const noexcept {
    std::size_t seed = k.machine.value;
    hash_combine(seed, std::hash<Hour>{}(k.hour));
    return seed;
  }
};

class Collector {
 public:
  void add(std::string kind, std::string entity, std::string detail) {
    out_.push_back({std::move(kind), std::move(entity), std::move(detail)});
  }
  /// Flags negative and non-finite quantities; returns true when the value is fine.
  bool check_quantity(double v, const std::string& entity, std::string_view field) {
    if (!std::isfinite(v)) {
      add("non_finite", entity, fmt::format("{} is not finite", field));
      return false;
    }
    if (v < 0) {
      add("negative_value", entity, fmt::format("{} = {}", field, v));
      return false;
    }
    return true;
  }
  void check_vector(const ResourceVector& r, const std::string& entity) {
    check_quantity(r.gcu, entity, "gcu");
    check_quantity(r.ram_gib, entity, "ram_gib");
    check_quantity(r.ssd_tib, entity, "ssd_tib");
    check_quantity(r.hdd_tib, entity, "hdd_tib");
  }
  ValidationReport finish() {
    std::sort(out_.begin(), out_.end());
    out_.erase(std::unique(out_.begin(), out_.end()), out_.end());
    return std::move(out_);
  }

 private:
  ValidationReport out_;
};

void fleet_checks(Collector& c, std::span<const MachineRecord> machines,
                  std::span<const PowerSample> samples, const ClusterTopology& topology,
                  const Names& names) {
  std::unordered_set<MachineId> seen;
  for (const auto& m : machines) {
    const std::string entity = "machine " + names.machines.name(m.machine);
    if (!seen.insert(m.machine).second) c.add("duplicate_machine", entity, "machine listed twice");
    if (!topology.contains(m.cluster)) {
      c.add("unknown_cluster", entity,
            fmt::format("cluster '{}' has no zone/region mapping", names.clusters.name(m.cluster)));
    }
    if (m.sharing == Sharing::Dedicated && !m.owner) {
      c.add("missing_owner", entity, "dedicated machine without owner_user");
    }
    if (m.sharing == Sharing::Shared && m.owner) {
      c.add("owner_on_shared", entity, "shared machine carries an owner_user");
    }
    c.check_quantity(m.idle_rating_watts, entity, "idle_rating_watts");
  }

  std::unordered_set<MachineHourKey, MachineHourHash> sample_keys;
  sample_keys.reserve(samples.size());
  for (const auto& s : samples) {
    const std::string_view mname = names.machines.name(s.machine);
    auto entity = [&] { return fmt::format("sample {}@{}", mname, format_hour(s.hour)); };
    if (!seen.contains(s.machine)) {
      c.add("dangling_machine", entity(), "power sample for unknown machine");
    }
    if (!sample_keys.insert({s.machine, s.hour}).second) {
      c.add("duplicate_sample", entity(), "more than one sample for this machine-hour");
    }
    if (!(std::isfinite(s.measured_power_watts) && s.measured_power_watts >= 0)) {
      c.check_quantity(s.measured_power_watts, entity(), "measured_power_watts");
    }
  }
}

}  // namespace

ValidationReport validate_fleet(std::span<const MachineRecord> machines,
                                std::span<const PowerSample> samples,
                                const ClusterTopology& topology, const Names& names) {
  Collector c;
  fleet_checks(c, machines, samples, topology, names);
  return c.finish();
}

ValidationReport validate_bundle(const InputBundle& b) {
  Collector c;
  const Names& n = b.names;
  const ClusterTopology topology = b.topology();
  fleet_checks(c, b.machines, b.power_samples, topology, n);

  std::unordered_set<ClusterId> mapped;
  for (const auto& z : b.zone_map) {
    if (!mapped.insert(z.cluster).second) {
      c.add("duplicate_zone_mapping", "cluster " + n.clusters.name(z.cluster),
            "cluster mapped more than once");
    }
  }

  std::unordered_set<MachineId> machines;
  for (const auto& m : b.machines) machines.insert(m.machine);

  auto cluster_known = [&](ClusterId cl, const std::string& entity) {
    if (!topology.contains(cl)) {
      c.add("unknown_cluster", entity,
            fmt::format("cluster '{}' has no zone/region mapping", n.clusters.name(cl)));
    }
  };

  for (const auto& a : b.allocations) {
    const auto entity = fmt::format("allocation {}/{}@{}", n.users.name(a.user),
                                    n.clusters.name(a.cluster), format_hour(a.hour));
    cluster_known(a.cluster, entity);
    c.check_vector(a.allocation, entity);
  }
  for (const auto& g : b.gcu_usage) {
    if (!machines.contains(g.machine) || !(std::isfinite(g.gcu_used) && g.gcu_used >= 0)) {
      const auto entity = fmt::format("gcu_usage {}/{}@{}", n.users.name(g.user),
                                      n.machines.name(g.machine), format_hour(g.hour));
      if (!machines.contains(g.machine)) {
        c.add("dangling_machine", entity, "GCU usage on unknown machine");
      }
      c.check_quantity(g.gcu_used, entity, "gcu_used");
    }
  }
  for (const auto& s : b.service_usage) {
    const auto entity = fmt::format("service_usage {}->{}/{}@{}", n.users.name(s.consumer),
                                    n.users.name(s.provider), n.clusters.name(s.cluster),
                                    format_hour(s.hour));
    cluster_known(s.cluster, entity);
    c.check_vector(s.usage, entity);
    if (s.consumer == s.provider) c.add("self_service", entity, "consumer equals provider");
  }
  for (const auto& r : b.net_costs) {
    if (!std::isfinite(r.net_cost)) {
      c.add("non_finite",
            fmt::format("net_cost {}/{}@{}", n.users.name(r.user), n.services.name(r.service),
                        format_day(r.day)),
            "net_cost is not finite");
    }
  }
  for (const auto& r : b.non_service_costs) {
    if (!std::isfinite(r.cost)) {
      c.add("non_finite", fmt::format("non_service_cost {}@{}", n.users.name(r.user), format_day(r.day)),
            "cost is not finite");
    }
  }
  for (const auto& p : b.pue) {
    const auto entity = fmt::format("pue {}@{}", n.clusters.name(p.cluster), format_hour(p.hour));
    cluster_known(p.cluster, entity);
    if (!std::isfinite(p.pue)) {
      c.add("non_finite", entity, "pue is not finite");
    } else if (p.pue < 1.0) {
      c.add("pue_below_one", entity, fmt::format("pue = {}", p.pue));
    }
  }
  for (const auto& r : b.carbon_intensity) {
    c.check_quantity(r.g_per_kwh,
                     fmt::format("carbon_intensity {}@{}", n.zones.name(r.zone), format_hour(r.hour)),
                     "g_per_kwh");
  }
  for (const auto& r : b.annual_intensity) {
    c.check_quantity(r.g_per_kwh, fmt::format("annual_intensity {}@{}", n.zones.name(r.zone), r.year),
                     "g_per_kwh");
  }
  std::unordered_set<SkuId> skus;
  for (const auto& s : b.skus) {
    const auto entity = "sku " + n.skus.name(s.sku);
    if (!skus.insert(s.sku).second) c.add("duplicate_sku", entity, "SKU listed twice");
    if (!(std::isfinite(s.list_price_per_unit) && s.list_price_per_unit > 0)) {
      c.add("invalid_price", entity, fmt::format("list_price_per_unit = {}", s.list_price_per_unit));
    }
  }
  for (const auto& u : b.billing_usage) {
    const auto entity =
        fmt::format("billing_usage {}/{}/{}@{}", n.skus.name(u.sku), n.regions.name(u.region),
                    u.account ? n.accounts.name(*u.account) : std::string{}, format_month(u.month));
    if (!skus.contains(u.sku)) c.add("unknown_sku", entity, "usage for SKU missing from catalog");
    c.check_quantity(u.usage_units, entity, "usage_units");
  }
  return c.finish();
}

}  // namespace carbonalloc
