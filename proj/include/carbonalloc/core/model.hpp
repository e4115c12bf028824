#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "carbonalloc/core/ids.hpp"
#include "carbonalloc/core/time.hpp"

namespace carbonalloc {

enum class Sharing { Dedicated, Shared };

struct MachineRecord {
  MachineId machine;
  ClusterId cluster;
  Sharing sharing = Sharing::Shared;
  std::optional<UserId> owner;  // present iff Dedicated
  double idle_rating_watts = 0.0;
};

/// Hourly mean of the five-minute power samples.
struct PowerSample {
  MachineId machine;
  Hour hour;
  double measured_power_watts = 0.0;
};

struct ResourceVector {
  double gcu = 0.0;
  double ram_gib = 0.0;
  double ssd_tib = 0.0;
  double hdd_tib = 0.0;

  ResourceVector& operator+=(const ResourceVector& o) {
    gcu += o.gcu;
    ram_gib += o.ram_gib;
    ssd_tib += o.ssd_tib;
    hdd_tib += o.hdd_tib;
    return *this;
  }
  ResourceVector scaled(double k) const { return {gcu * k, ram_gib * k, ssd_tib * k, hdd_tib * k}; }
  bool non_negative() const { return gcu >= 0 && ram_gib >= 0 && ssd_tib >= 0 && hdd_tib >= 0; }
};

/// Per-unit power weights, in CPU-core equivalents.
struct ResourceWeights {
  double gcu = 1.0;
  double ram_per_gib = 1.0 / 20.0;
  double ssd_per_tib = 1.0;
  double hdd_per_tib = 1.0 / 6.0;
};

/// `busy` weights idle allocation; `usage` weights the storage-style service
/// reallocation (which ignores RAM). Usage weights default to the busy ones.
struct PowerWeighting {
  ResourceWeights busy{};
  ResourceWeights usage{};
};

struct ResourceAllocationRecord {
  UserId user;
  ClusterId cluster;
  Hour hour;
  ResourceVector allocation;
};

struct GcuUsageRecord {
  UserId user;
  MachineId machine;
  Hour hour;
  double gcu_used = 0.0;
};

/// Consumer's usage of a major shared service run by `provider`.
struct ServiceUsageRecord {
  UserId consumer;
  UserId provider;
  ClusterId cluster;
  Hour hour;
  ResourceVector usage;
  bool colossus_style = false;
};

/// Signed daily internal cost; negative for the service provider.
struct NetCostRecord {
  UserId user;
  ServiceId service;
  Day day;
  double net_cost = 0.0;
};

struct NonServiceCostRecord {
  UserId user;
  Day day;
  double cost = 0.0;
};

struct PueRecord {
  ClusterId cluster;
  Hour hour;
  double pue = 1.0;
};

struct CarbonIntensityRecord {
  ZoneId zone;
  Hour hour;
  double g_per_kwh = 0.0;
};

/// Annual grid average keyed by zone or country code (both live in the zone table).
struct AnnualIntensityRecord {
  ZoneId zone;
  int year = 0;
  double g_per_kwh = 0.0;
};

struct ZoneMapRecord {
  ClusterId cluster;
  std::optional<ZoneId> zone;
  RegionId region;
};

struct SkuRecord {
  SkuId sku;
  ProductId product;
  UserId provider;
  double list_price_per_unit = 0.0;
  std::string usage_unit;
  bool is_commitment = false;
};

/// A row without an account is unbilled usage (internal or free tier).
struct SkuUsageRecord {
  SkuId sku;
  RegionId region;
  std::optional<AccountId> account;
  Month month;
  double usage_units = 0.0;
};

class ClusterTopology {
 public:
  ClusterTopology() = default;
  /// First mapping wins on duplicates; validate_fleet reports them.
  static ClusterTopology from_records(std::span<const ZoneMapRecord> records);

  bool contains(ClusterId c) const {
    return c.value < region_.size() && region_[c.value].has_value();
  }
  std::optional<ZoneId> zone(ClusterId c) const {
    return contains(c) ? zone_[c.value] : std::nullopt;
  }
  /// Throws InputError for unmapped clusters.
  RegionId region(ClusterId c) const;
  const std::vector<ClusterId>& clusters() const { return clusters_; }

 private:
  std::vector<std::optional<ZoneId>> zone_;
  std::vector<std::optional<RegionId>> region_;
  std::vector<ClusterId> clusters_;
};

/// MachineId -> record lookup over a dense id space.
class MachineDirectory {
 public:
  MachineDirectory() = default;
  explicit MachineDirectory(std::span<const MachineRecord> machines);
  const MachineRecord* find(MachineId m) const {
    if (m.value >= slot_.size() || slot_[m.value] < 0) return nullptr;
    return &records_[static_cast<std::size_t>(slot_[m.value])];
  }
  const std::vector<MachineRecord>& records() const { return records_; }

 private:
  std::vector<MachineRecord> records_;
  std::vector<std::int64_t> slot_;
};

/// Every input table of one run, as loaded from (or written to) a bundle directory.
struct InputBundle {
  Names names;
  std::vector<MachineRecord> machines;
  std::vector<PowerSample> power_samples;
  std::vector<ResourceAllocationRecord> allocations;
  std::vector<GcuUsageRecord> gcu_usage;
  std::vector<ServiceUsageRecord> service_usage;
  std::vector<NetCostRecord> net_costs;
  std::vector<NonServiceCostRecord> non_service_costs;
  std::vector<PueRecord> pue;
  std::vector<CarbonIntensityRecord> carbon_intensity;
  std::vector<AnnualIntensityRecord> annual_intensity;
  std::vector<ZoneMapRecord> zone_map;
  std::vector<SkuRecord> skus;
  std::vector<SkuUsageRecord> billing_usage;
  /// Cloud users without SKUs whose emissions are spread over all accounts.
  std::vector<UserId> cloud_overhead_users;

  ClusterTopology topology() const { return ClusterTopology::from_records(zone_map); }
};

/// Keeps only records whose hour (or day/month) intersects [from, to).
InputBundle restrict_to_range(const InputBundle& bundle, Hour from, Hour to);

}  // namespace carbonalloc
