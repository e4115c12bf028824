#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "carbonalloc/alloc/ledger.hpp"
#include "carbonalloc/alloc/machine_allocation.hpp"
#include "carbonalloc/core/diagnostics.hpp"
#include "carbonalloc/core/model.hpp"

namespace carbonalloc::carbon {

enum class IntensitySource { Hourly, AnnualFallback, ConfiguredDefault };
enum class PueSource { Measured, ConfiguredDefault };

std::string to_string(IntensitySource s);
std::string to_string(PueSource s);

struct ResolvedIntensity {
  double g_per_kwh = 0.0;
  IntensitySource source = IntensitySource::Hourly;
};

/// Location-based emissions of one user in one cluster-hour.
struct EmissionRecord {
  UserId user;
  ClusterId cluster;
  Hour hour;
  double energy_it_wh = 0.0;
  double pue = 1.0;
  double energy_total_wh = 0.0;
  double g_per_kwh = 0.0;
  double kg_co2e = 0.0;
  IntensitySource intensity_source = IntensitySource::Hourly;
  PueSource pue_source = PueSource::Measured;
};

/// Wh x PUE x gCO2e/kWh, returned in kgCO2e.
inline double emission_kg(double energy_it_wh, double pue, double g_per_kwh) {
  return energy_it_wh * pue * g_per_kwh * 1e-6;
}

/// Source of hourly zone intensities. Only in-memory feeds ship; a networked
/// fetcher can implement this interface.
class IntensityFeed {
 public:
  virtual ~IntensityFeed() = default;
  virtual std::vector<CarbonIntensityRecord> fetch(ZoneId zone, Hour from, Hour to) const = 0;
};

class StaticIntensityFeed final : public IntensityFeed {
 public:
  explicit StaticIntensityFeed(std::vector<CarbonIntensityRecord> records) : records_(std::move(records)) {}
  std::vector<CarbonIntensityRecord> fetch(ZoneId zone, Hour from, Hour to) const override;

 private:
  std::vector<CarbonIntensityRecord> records_;
};

/// Hourly zone intensity with annual-average fallback. Clusters without a
/// zone use the annual table keyed by their region name.
class IntensityResolver {
 public:
  IntensityResolver(const ClusterTopology& topology, std::span<const CarbonIntensityRecord> hourly,
                    std::span<const AnnualIntensityRecord> annual, const Names& names);

  /// Throws MissingIntensityError when neither source covers the cluster-hour.
  ResolvedIntensity resolve(ClusterId cluster, Hour hour) const;

 private:
  std::optional<double> annual_for(ZoneId key, int year) const;

  const ClusterTopology* topology_;
  const Names* names_;
  std::unordered_map<std::uint64_t, double> hourly_;   // (zone, hour)
  std::unordered_map<std::uint32_t, std::vector<std::pair<int, double>>> annual_;  // zone -> sorted (year, value)
};

class PueTable {
 public:
  explicit PueTable(std::span<const PueRecord> records);
  std::optional<double> find(ClusterId cluster, Hour hour) const;

 private:
  std::unordered_map<alloc::ClusterHourKey, double, alloc::ClusterHourHash> values_;
};

struct CarbonConfig {
  double default_pue = 1.10;
  std::unordered_map<ClusterId, double> cluster_default_pue;
  bool allow_missing_intensity = false;
  double default_g_per_kwh = 320.8;
};

/// One record per ledger entry. Missing PUE falls back to the configured
/// default (flagged); missing intensity throws unless allowed by config.
std::vector<EmissionRecord> compute_emissions(const alloc::UserEnergyLedger& ledger, const PueTable& pue,
                                              const IntensityResolver& intensity,
                                              const CarbonConfig& config, Diagnostics& diag);

}  // namespace carbonalloc::carbon
