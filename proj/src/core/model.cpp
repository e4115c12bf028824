#include "carbonalloc/core/model.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "carbonalloc/core/errors.hpp"

namespace carbonalloc {

ClusterTopology ClusterTopology::from_records(std::span<const ZoneMapRecord> records) {
  ClusterTopology t;
  for (const auto& r : records) {
    if (r.cluster.value >= t.region_.size()) {
      t.region_.resize(r.cluster.value + 1);
      t.zone_.resize(r.cluster.value + 1);
    }
    if (t.region_[r.cluster.value]) continue;
    t.region_[r.cluster.value] = r.region;
    t.zone_[r.cluster.value] = r.zone;
    t.clusters_.push_back(r.cluster);
  }
  std::sort(t.clusters_.begin(), t.clusters_.end());
  return t;
}

RegionId ClusterTopology::region(ClusterId c) const {
  if (!contains(c)) throw InputError(fmt::format("cluster #{} has no region mapping", c.value));
  return *region_[c.value];
}

MachineDirectory::MachineDirectory(std::span<const MachineRecord> machines) {
  records_.reserve(machines.size());
  for (const auto& m : machines) {
    if (m.machine.value >= slot_.size()) slot_.resize(m.machine.value + 1, -1);
    if (slot_[m.machine.value] >= 0) continue;  // duplicates are a validation error; first wins
    slot_[m.machine.value] = static_cast<std::int64_t>(records_.size());
    records_.push_back(m);
  }
}

InputBundle restrict_to_range(const InputBundle& bundle, Hour from, Hour to) {
  if (!(from < to)) throw ConfigError("empty date range");
  auto in_hours = [&](Hour h) { return from <= h && h < to; };
  auto day_overlaps = [&](Day d) {
    const Hour start = first_hour(d);
    return start < to && Hour{start.value + 24} > from;
  };
  auto month_overlaps = [&](Month m) {
    const Hour start = first_hour(first_day(m));
    const Hour end = first_hour(first_day(Month{m.value + 1}));
    return start < to && end > from;
  };

  InputBundle out;
  out.names = bundle.names;
  out.machines = bundle.machines;
  out.zone_map = bundle.zone_map;
  out.skus = bundle.skus;
  out.annual_intensity = bundle.annual_intensity;
  out.cloud_overhead_users = bundle.cloud_overhead_users;
  auto keep = [](const auto& src, auto& dst, auto pred) {
    std::copy_if(src.begin(), src.end(), std::back_inserter(dst), pred);
  };
  keep(bundle.power_samples, out.power_samples, [&](const auto& r) { return in_hours(r.hour); });
  keep(bundle.allocations, out.allocations, [&](const auto& r) { return in_hours(r.hour); });
  keep(bundle.gcu_usage, out.gcu_usage, [&](const auto& r) { return in_hours(r.hour); });
  keep(bundle.service_usage, out.service_usage, [&](const auto& r) { return in_hours(r.hour); });
  keep(bundle.pue, out.pue, [&](const auto& r) { return in_hours(r.hour); });
  keep(bundle.carbon_intensity, out.carbon_intensity, [&](const auto& r) { return in_hours(r.hour); });
  keep(bundle.net_costs, out.net_costs, [&](const auto& r) { return day_overlaps(r.day); });
  keep(bundle.non_service_costs, out.non_service_costs, [&](const auto& r) { return day_overlaps(r.day); });
  keep(bundle.billing_usage, out.billing_usage, [&](const auto& r) { return month_overlaps(r.month); });
  return out;
}

}  // namespace carbonalloc
