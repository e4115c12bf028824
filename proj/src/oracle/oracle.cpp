#include "carbonalloc/oracle/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>

#include <fmt/format.h>

#include "carbonalloc/core/errors.hpp"

namespace carbonalloc::oracle {
namespace {

using Vec = std::vector<double>;
using Matrix = std::vector<Vec>;  // [from][to]

double busy(const ResourceVector& r, const ResourceWeights& w) {
  return r.gcu * w.gcu + r.ram_gib * w.ram_per_gib + r.ssd_tib * w.ssd_per_tib + r.hdd_tib * w.hdd_per_tib;
}

double storage_weight(const ResourceVector& r, const ResourceWeights& w) {
  return r.gcu * w.gcu + r.ssd_tib * w.ssd_per_tib + r.hdd_tib * w.hdd_per_tib;
}

void check_limits(const InputBundle& b) {
  std::set<std::int64_t> hours;
  for (const auto& s : b.power_samples) hours.insert(s.hour.value);
  const std::size_t users = b.names.users.size() - 1;
  if (b.machines.size() > kMaxMachines || users > kMaxUsers || hours.size() > kMaxHours) {
    throw OracleLimitError(fmt::format(
        "bundle too large for the oracle: {} machines (max {}), {} users (max {}), {} hours (max {})",
        b.machines.size(), kMaxMachines, users, kMaxUsers, hours.size(), kMaxHours));
  }
}

/// Net-cost transfer matrix of one day, rows scaled so no provider gives away
/// more than everything.
Matrix day_matrix(const InputBundle& b, Day day, std::size_t n) {
  Matrix m(n, Vec(n, 0.0));
  Vec total(n, 0.0);
  std::map<std::uint32_t, Vec> per_service;
  for (const auto& r : b.net_costs) {
    if (r.day != day) continue;
    total[r.user.value] += r.net_cost;
    auto& v = per_service[r.service.value];
    v.resize(n, 0.0);
    v[r.user.value] += r.net_cost;
  }
  for (const auto& r : b.non_service_costs) {
    if (r.day == day) total[r.user.value] += r.cost;
  }
  std::vector<std::set<std::uint32_t>> present(n);
  for (const auto& r : b.net_costs) {
    if (r.day == day) present[r.user.value].insert(r.service.value);
  }

  for (const auto& [service, cost] : per_service) {
    std::optional<std::size_t> provider;
    for (std::size_t u = 0; u < n; ++u) {
      if (!present[u].contains(service)) continue;
      if (!provider || cost[u] < cost[*provider] ||
          (cost[u] == cost[*provider] && b.names.users.name(UserId{static_cast<std::uint32_t>(u)}) <
                                             b.names.users.name(UserId{static_cast<std::uint32_t>(*provider)}))) {
        provider = u;
      }
    }
    if (!provider || !(cost[*provider] < 0)) continue;
    const std::size_t p = *provider;
    const double denominator = std::max(std::abs(cost[p]), total[p]);
    if (!(denominator > 0)) continue;
    for (std::size_t u = 0; u < n; ++u) {
      if (u == p || !present[u].contains(service)) continue;
      m[p][u] += std::max(0.0, cost[u]) / denominator;
    }
  }
  for (std::size_t p = 0; p < n; ++p) {
    double row = 0.0;
    for (double f : m[p]) row += f;
    if (row > 1.0) {
      for (double& f : m[p]) f /= row;
    }
  }
  return m;
}

}  // namespace

OracleResult oracle_allocate(const InputBundle& b, const OracleConfig& cfg) {
  check_limits(b);
  if (cfg.minor_rounds < 1) throw ConfigError("minor_rounds must be at least 1");
  const std::size_t n = b.names.users.size();
  const auto& w = cfg.weights;

  std::map<std::uint32_t, const MachineRecord*> machine;
  for (const auto& m : b.machines) machine.emplace(m.machine.value, &m);

  std::map<std::pair<std::uint32_t, std::int64_t>, double> sample;  // (machine, hour)
  std::set<std::pair<std::uint32_t, std::int64_t>> cluster_hours;
  for (const auto& s : b.power_samples) {
    auto it = machine.find(s.machine.value);
    if (it == machine.end()) continue;
    sample[{s.machine.value, s.hour.value}] += s.measured_power_watts;
    cluster_hours.insert({it->second->cluster.value, s.hour.value});
  }

  std::map<std::pair<std::uint32_t, std::int64_t>, Vec> weighted;  // (cluster, hour)
  for (const auto& a : b.allocations) {
    auto& v = weighted[{a.cluster.value, a.hour.value}];
    v.resize(n, 0.0);
    v[a.user.value] += busy(a.allocation, w.busy);
  }
  std::map<std::pair<std::uint32_t, std::int64_t>, Vec> gcu_on;    // (machine, hour)
  std::map<std::pair<std::uint32_t, std::int64_t>, Vec> gcu_in;    // (cluster, hour)
  for (const auto& g : b.gcu_usage) {
    auto it = machine.find(g.machine.value);
    if (it == machine.end() || !(g.gcu_used > 0)) continue;
    auto& on = gcu_on[{g.machine.value, g.hour.value}];
    on.resize(n, 0.0);
    on[g.user.value] += g.gcu_used;
    auto& in = gcu_in[{it->second->cluster.value, g.hour.value}];
    in.resize(n, 0.0);
    in[g.user.value] += g.gcu_used;
  }
  struct ServiceCell {
    std::vector<ResourceVector> usage;
    bool colossus = false;
  };
  std::map<std::tuple<std::uint32_t, std::int64_t, std::uint32_t>, ServiceCell> services;
  for (const auto& s : b.service_usage) {
    if (s.consumer == s.provider) continue;
    auto& cell = services[{s.cluster.value, s.hour.value, s.provider.value}];
    cell.usage.resize(n);
    cell.usage[s.consumer.value] += s.usage;
    cell.colossus = cell.colossus || s.colossus_style;
  }
  std::map<std::int64_t, Matrix> minor;
  for (const auto& r : b.net_costs) {
    if (!minor.contains(r.day.value)) minor.emplace(r.day.value, day_matrix(b, r.day, n));
  }

  // Facility lookups.
  std::map<std::pair<std::uint32_t, std::int64_t>, double> pue;
  for (const auto& p : b.pue) pue.emplace(std::pair{p.cluster.value, p.hour.value}, p.pue);
  std::map<std::pair<std::uint32_t, std::int64_t>, double> hourly;
  for (const auto& c : b.carbon_intensity) hourly.emplace(std::pair{c.zone.value, c.hour.value}, c.g_per_kwh);
  std::map<std::uint32_t, std::optional<ZoneId>> zone_of;
  std::map<std::uint32_t, RegionId> region_of;
  for (const auto& z : b.zone_map) {
    zone_of.emplace(z.cluster.value, z.zone);
    region_of.emplace(z.cluster.value, z.region);
  }
  auto annual = [&](std::uint32_t zone, int year) -> std::optional<double> {
    std::optional<std::pair<int, double>> best;
    for (const auto& a : b.annual_intensity) {
      if (a.zone.value != zone || a.year > year) continue;
      if (!best || a.year > best->first) best = {a.year, a.g_per_kwh};
    }
    if (!best) return std::nullopt;
    return best->second;
  };
  auto intensity = [&](std::uint32_t cluster, Hour hour) -> double {
    std::optional<double> g;
    if (auto z = zone_of.find(cluster); z != zone_of.end()) {
      if (z->second) {
        if (auto h = hourly.find({z->second->value, hour.value}); h != hourly.end()) {
          g = h->second;
        } else {
          g = annual(z->second->value, year_of(hour));
        }
      } else {
        ZoneId country;
        if (b.names.zones.find(b.names.regions.name(region_of.at(cluster)), country)) {
          g = annual(country.value, year_of(hour));
        }
      }
    }
    if (g) return *g;
    if (cfg.allow_missing_intensity) return cfg.default_g_per_kwh;
    throw MissingIntensityError(
        fmt::format("cluster {} at {}", b.names.clusters.name(ClusterId{cluster}), format_hour(hour)));
  };

  OracleResult out;
  const std::size_t stage_count = 2 + static_cast<std::size_t>(cfg.minor_rounds);
  out.stages.resize(stage_count);
  out.moved_wh.assign(stage_count, 0.0);

  for (const auto& [cluster, hour_value] : cluster_hours) {
    const Hour hour{hour_value};
    Vec idle(n, 0.0);
    Vec dyn(n, 0.0);
    const Vec none(n, 0.0);
    auto wit = weighted.find({cluster, hour_value});
    const Vec& alloc = wit == weighted.end() ? none : wit->second;
    double alloc_total = 0.0;
    for (double v : alloc) alloc_total += v;

    for (const auto& m : b.machines) {
      if (m.cluster.value != cluster) continue;
      auto s = sample.find({m.machine.value, hour_value});
      if (s == sample.end()) continue;
      const double i = std::min(m.idle_rating_watts, s->second);
      const double d = s->second - i;
      auto to_shares = [&](Vec& target, double wh) {
        if (alloc_total > 0) {
          for (std::size_t u = 0; u < n; ++u) target[u] += wh * alloc[u] / alloc_total;
        } else {
          target[0] += wh;
        }
      };
      if (m.sharing == Sharing::Dedicated && m.owner) {
        idle[m.owner->value] += i;
      } else {
        to_shares(idle, i);
      }
      auto g = gcu_on.find({m.machine.value, hour_value});
      double g_total = 0.0;
      if (g != gcu_on.end()) {
        for (double v : g->second) g_total += v;
      }
      if (g_total > 0) {
        for (std::size_t u = 0; u < n; ++u) dyn[u] += d * g->second[u] / g_total;
      } else if (m.sharing == Sharing::Dedicated && m.owner) {
        dyn[m.owner->value] += d;
      } else {
        to_shares(dyn, d);
      }
    }

    auto record = [&](std::size_t stage, const Vec& i, const Vec& d) {
      for (std::size_t u = 0; u < n; ++u) {
        if (i[u] != 0.0 || d[u] != 0.0) {
          out.stages[stage][{cluster, hour_value, static_cast<std::uint32_t>(u)}] = {i[u], d[u]};
        }
      }
    };
    record(0, idle, dyn);

    // Major services: gamma matrix over dynamic power only.
    Matrix gamma(n, Vec(n, 0.0));
    auto own = gcu_in.find({cluster, hour_value});
    for (std::size_t p = 0; p < n; ++p) {
      auto cell = services.find({cluster, hour_value, static_cast<std::uint32_t>(p)});
      if (cell == services.end() || !(dyn[p] > 0)) continue;
      const auto& usage = cell->second.usage;
      if (cell->second.colossus) {
        double total = 0.0;
        for (const auto& u : usage) total += storage_weight(u, w.usage);
        if (!(total > 0)) continue;
        for (std::size_t c = 0; c < n; ++c) gamma[p][c] = storage_weight(usage[c], w.usage) / total;
      } else {
        double consumers = 0.0;
        for (const auto& u : usage) consumers += u.gcu;
        const double provider_gcu = own == gcu_in.end() ? 0.0 : own->second[p];
        const double denominator = std::max(provider_gcu, consumers);
        if (!(denominator > 0)) continue;
        for (std::size_t c = 0; c < n; ++c) gamma[p][c] = usage[c].gcu / denominator;
      }
    }
    // Residual of each provider first (rounding residue below 1e-12 of its
    // dynamic power counts as fully consumed), then the inflows.
    Vec dyn1(n, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
      double given = 0.0;
      for (std::size_t c = 0; c < n; ++c) given += gamma[p][c] * dyn[p];
      const double left = dyn[p] - given;
      dyn1[p] = left > 1e-12 * dyn[p] ? left : 0.0;
    }
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t c = 0; c < n; ++c) {
        dyn1[c] += gamma[p][c] * dyn[p];
        out.moved_wh[1] += gamma[p][c] * dyn[p];
      }
    }
    record(1, idle, dyn1);

    // Net-cost rounds.
    Vec ci = idle;
    Vec cd = dyn1;
    auto mit = minor.find(day_of(hour).value);
    for (int r = 1; r <= cfg.minor_rounds; ++r) {
      if (mit != minor.end()) {
        const Matrix& m = mit->second;
        Vec ni(n, 0.0);
        Vec nd(n, 0.0);
        for (std::size_t p = 0; p < n; ++p) {
          double out_fraction = 0.0;
          for (std::size_t c = 0; c < n; ++c) {
            out_fraction += m[p][c];
            ni[c] += m[p][c] * ci[p];
            nd[c] += m[p][c] * cd[p];
            out.moved_wh[1 + r] += m[p][c] * (ci[p] + cd[p]);
          }
          const double kept = std::max(0.0, 1.0 - out_fraction);
          ni[p] += kept * ci[p];
          nd[p] += kept * cd[p];
        }
        ci = std::move(ni);
        cd = std::move(nd);
      }
      record(static_cast<std::size_t>(1 + r), ci, cd);
    }

    // Emissions of the final stage.
    double total = 0.0;
    for (std::size_t u = 0; u < n; ++u) total += ci[u] + cd[u];
    if (!(total > 0)) continue;
    auto pit = pue.find({cluster, hour_value});
    const double p = pit == pue.end() ? cfg.default_pue : pit->second;
    const double g = intensity(cluster, hour);
    for (std::size_t u = 0; u < n; ++u) {
      const double wh = ci[u] + cd[u];
      if (wh != 0.0) out.emissions_kg[{cluster, hour_value, static_cast<std::uint32_t>(u)}] = wh * p * g / 1e6;
    }
  }

  // Customer footprints, month by month.
  std::map<std::uint32_t, const SkuRecord*> catalog;
  for (const auto& s : b.skus) {
    if (!s.is_commitment && !catalog.contains(s.sku.value)) catalog.emplace(s.sku.value, &s);
  }
  std::set<std::uint32_t> cloud;
  for (const auto& [_, s] : catalog) cloud.insert(s->provider.value);
  for (const auto& u : b.cloud_overhead_users) cloud.insert(u.value);

  // (month, user) -> Wh, kg; (month, user, region) -> Wh, kg
  std::map<std::pair<std::int32_t, std::uint32_t>, std::pair<double, double>> monthly;
  std::map<std::tuple<std::int32_t, std::uint32_t, std::uint32_t>, std::pair<double, double>> regional;
  std::set<std::int32_t> months;
  const auto& final_stage = out.stages.back();
  for (const auto& [key, kg] : out.emissions_kg) {
    const auto& [cluster, hour_value, user] = key;
    if (!cloud.contains(user)) continue;
    const auto cell = final_stage.at(key);
    const double wh = cell.idle_wh + cell.dynamic_wh;
    const std::int32_t month = month_of(Hour{hour_value}).value;
    auto& m = monthly[{month, user}];
    m.first += wh;
    m.second += kg;
    auto& r = regional[{month, user, region_of.at(cluster).value}];
    r.first += wh;
    r.second += kg;
    if (wh > 0) months.insert(month);
  }
  for (const auto& u : b.billing_usage) {
    if (catalog.contains(u.sku.value)) months.insert(u.month.value);
  }

  for (const std::int32_t month : months) {
    std::map<std::uint32_t, double> usage;                                   // sku
    std::map<std::pair<std::uint32_t, std::uint32_t>, double> usage_region;  // (sku, region)
    for (const auto& u : b.billing_usage) {
      if (u.month.value != month || !catalog.contains(u.sku.value)) continue;
      usage[u.sku.value] += u.usage_units;
      usage_region[{u.sku.value, u.region.value}] += u.usage_units;
    }
    double cloud_kg = 0.0;
    for (const std::uint32_t u : cloud) {
      auto it = monthly.find({month, u});
      if (it != monthly.end()) cloud_kg += it->second.second;
    }

    // Effective g/kWh per (sku, region), alpha already applied, and Wh per unit.
    std::map<std::pair<std::uint32_t, std::uint32_t>, double> g_adjusted;
    std::map<std::uint32_t, double> x;
    std::set<std::uint32_t> providers;
    for (const auto& [_, s] : catalog) providers.insert(s->provider.value);
    for (const std::uint32_t j : providers) {
      auto mit = monthly.find({month, j});
      const double p_j = mit == monthly.end() ? 0.0 : mit->second.first;
      const double cf_j = mit == monthly.end() ? 0.0 : mit->second.second;
      double weighted_usage = 0.0;
      for (const auto& [sku, s] : catalog) {
        if (s->provider.value == j && usage.contains(sku)) weighted_usage += usage[sku] * s->list_price_per_unit;
      }
      if (!(weighted_usage > 0)) continue;
      std::map<std::uint32_t, double> xj;
      for (const auto& [sku, s] : catalog) {
        if (s->provider.value == j) xj[sku] = p_j * s->list_price_per_unit / weighted_usage;
      }
      const double global = p_j > 0 ? cf_j / p_j * 1e6 : 0.0;
      std::map<std::pair<std::uint32_t, std::uint32_t>, double> g_raw;
      double unscaled = 0.0;
      for (const auto& [key, units] : usage_region) {
        if (!xj.contains(key.first)) continue;
        auto r = regional.find({month, j, key.second});
        const double g = r != regional.end() && r->second.first > 0 ? r->second.second / r->second.first * 1e6
                                                                    : global;
        g_raw[key] = g;
        unscaled += g * xj[key.first] * units / 1e6;
      }
      if (!(unscaled > 0)) continue;
      const double alpha = cf_j / unscaled;
      for (const auto& [key, g] : g_raw) g_adjusted[key] = alpha * g;
      x.insert(xj.begin(), xj.end());
    }

    double billed = 0.0;
    for (const auto& u : b.billing_usage) {
      if (u.month.value != month || !u.account) continue;
      auto g = g_adjusted.find({u.sku.value, u.region.value});
      if (g == g_adjusted.end()) continue;
      billed += g->second * x.at(u.sku.value) * u.usage_units / 1e6;
    }
    double beta = 1.0;
    if (cloud_kg > 0 || billed > 0) {
      if (!(billed > 0)) throw BetaUndefinedError(format_month(Month{month}));
      beta = cloud_kg / billed;
    }
    out.beta[month] = beta;
    for (const auto& u : b.billing_usage) {
      if (u.month.value != month || !u.account) continue;
      auto g = g_adjusted.find({u.sku.value, u.region.value});
      if (g == g_adjusted.end()) continue;
      const auto product = catalog.at(u.sku.value)->product.value;
      out.footprint_kg[{month, u.account->value, product, u.region.value}] +=
          beta * g->second * x.at(u.sku.value) * u.usage_units / 1e6;
    }
  }
  return out;
}

}  // namespace carbonalloc::oracle
