#include "carbonalloc/carbon/carbon_engine.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "carbonalloc/core/errors.hpp"

namespace carbonalloc::carbon {
namespace {

std::uint64_t zone_hour_key(ZoneId zone, Hour hour) {
  return (static_cast<std::uint64_t>(zone.value) << 40) ^ static_cast<std::uint64_t>(hour.value);
}

}  // namespace

std::string to_string(IntensitySource s) {
  switch (s) {
    case IntensitySource::Hourly:
      return "hourly";
    case IntensitySource::AnnualFallback:
      return "annual_fallback";
    case IntensitySource::ConfiguredDefault:
      return "configured_default";
  }
  return "unknown";
}

std::string to_string(PueSource s) {
  return s == PueSource::Measured ? "measured" : "configured_default";
}

std::vector<CarbonIntensityRecord> StaticIntensityFeed::fetch(ZoneId zone, Hour from, Hour to) const {
  std::vector<CarbonIntensityRecord> out;
  for (const auto& r : records_) {
    if (r.zone == zone && from <= r.hour && r.hour < to) out.push_back(r);
  }
  return out;
}

IntensityResolver::IntensityResolver(const ClusterTopology& topology,
                                     std::span<const CarbonIntensityRecord> hourly,
                                     std::span<const AnnualIntensityRecord> annual, const Names& names)
    : topology_(&topology), names_(&names) {
  hourly_.reserve(hourly.size());
  for (const auto& r : hourly) hourly_.emplace(zone_hour_key(r.zone, r.hour), r.g_per_kwh);
  for (const auto& r : annual) annual_[r.zone.value].emplace_back(r.year, r.g_per_kwh);
  for (auto& [_, v] : annual_) std::sort(v.begin(), v.end());
}

std::optional<double> IntensityResolver::annual_for(ZoneId key, int year) const {
  auto it = annual_.find(key.value);
  if (it == annual_.end()) return std::nullopt;
  // Exact year, else the most recent earlier year.
  std::optional<double> best;
  for (const auto& [y, v] : it->second) {
    if (y <= year) best = v;
  }
  return best;
}

ResolvedIntensity IntensityResolver::resolve(ClusterId cluster, Hour hour) const {
  auto missing = [&] {
    return MissingIntensityError(fmt::format("cluster {} at {}", names_->clusters.name(cluster), format_hour(hour)));
  };
  if (!topology_->contains(cluster)) throw missing();
  const auto zone = topology_->zone(cluster);
  if (zone) {
    if (auto it = hourly_.find(zone_hour_key(*zone, hour)); it != hourly_.end()) {
      return {it->second, IntensitySource::Hourly};
    }
    if (auto v = annual_for(*zone, year_of(hour))) return {*v, IntensitySource::AnnualFallback};
  } else {
    ZoneId country;
    if (names_->zones.find(names_->regions.name(topology_->region(cluster)), country)) {
      if (auto v = annual_for(country, year_of(hour))) return {*v, IntensitySource::AnnualFallback};
    }
  }
  throw missing();
}

PueTable::PueTable(std::span<const PueRecord> records) {
  values_.reserve(records.size());
  for (const auto& r : records) values_.emplace(alloc::ClusterHourKey{r.cluster, r.hour}, r.pue);
}

std::optional<double> PueTable::find(ClusterId cluster, Hour hour) const {
  auto it = values_.find({cluster, hour});
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::vector<EmissionRecord> compute_emissions(const alloc::UserEnergyLedger& ledger, const PueTable& pue,
                                              const IntensityResolver& intensity,
                                              const CarbonConfig& config, Diagnostics& diag) {
  std::vector<EmissionRecord> out;
  out.reserve(ledger.entries().size());
  std::size_t pue_defaults = 0;
  std::size_t intensity_defaults = 0;

  // Entries are grouped by cluster-hour, so resolve once per group.
  alloc::ClusterHourKey current{ClusterId{~0u}, Hour{0}};
  double current_pue = 1.0;
  PueSource current_pue_source = PueSource::Measured;
  ResolvedIntensity current_ci{};
  bool first = true;

  for (const auto& e : ledger.entries()) {
    const alloc::ClusterHourKey key{e.key.cluster, e.key.hour};
    if (first || !(key == current)) {
      first = false;
      current = key;
      if (auto p = pue.find(key.cluster, key.hour)) {
        current_pue = *p;
        current_pue_source = PueSource::Measured;
      } else {
        auto it = config.cluster_default_pue.find(key.cluster);
        current_pue = it != config.cluster_default_pue.end() ? it->second : config.default_pue;
        current_pue_source = PueSource::ConfiguredDefault;
        ++pue_defaults;
      }
      try {
        current_ci = intensity.resolve(key.cluster, key.hour);
      } catch (const MissingIntensityError&) {
        if (!config.allow_missing_intensity) throw;
        current_ci = {config.default_g_per_kwh, IntensitySource::ConfiguredDefault};
        ++intensity_defaults;
      }
    }
    EmissionRecord r;
    r.user = e.key.user;
    r.cluster = e.key.cluster;
    r.hour = e.key.hour;
    r.energy_it_wh = e.total_wh();
    r.pue = current_pue;
    r.energy_total_wh = r.energy_it_wh * current_pue;
    r.g_per_kwh = current_ci.g_per_kwh;
    r.kg_co2e = emission_kg(r.energy_it_wh, current_pue, current_ci.g_per_kwh);
    r.intensity_source = current_ci.source;
    r.pue_source = current_pue_source;
    out.push_back(r);
  }
  if (pue_defaults > 0) {
    diag.warn("pue_default", fmt::format("{} cluster-hours used the configured default PUE", pue_defaults));
  }
  if (intensity_defaults > 0) {
    diag.warn("intensity_default",
              fmt::format("{} cluster-hours used the configured default carbon intensity", intensity_defaults));
  }
  return out;
}

}  // namespace carbonalloc::carbon
