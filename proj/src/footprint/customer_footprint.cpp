#include "carbonalloc/footprint/customer_footprint.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "carbonalloc/core/errors.hpp"

namespace carbonalloc::footprint {
namespace {

// g/kWh x Wh -> kg
constexpr double kKgPerGramWhPerKwh = 1e-6;

}  // namespace

std::vector<SkuEnergyRate> sku_energy_rates(double provider_energy_wh, std::span<const SkuRecord> skus,
                                            const std::unordered_map<SkuId, double>& total_usage) {
  double weighted = 0.0;
  for (const auto& s : skus) {
    auto it = total_usage.find(s.sku);
    if (it != total_usage.end()) weighted += it->second * s.list_price_per_unit;
  }
  if (!(weighted > 0)) throw NoBillableUsageError("provider SKUs carry no priced usage");
  std::vector<SkuEnergyRate> out;
  out.reserve(skus.size());
  for (const auto& s : skus) out.push_back({s.sku, provider_energy_wh * s.list_price_per_unit / weighted});
  return out;
}

std::vector<RegionalIntensity> regional_intensity(UserId provider,
                                                  std::span<const carbon::EmissionRecord> emissions,
                                                  const ClusterTopology& topology) {
  std::map<RegionId, std::pair<double, double>> sums;  // kg, Wh
  for (const auto& e : emissions) {
    if (e.user != provider) continue;
    auto& s = sums[topology.region(e.cluster)];
    s.first += e.kg_co2e;
    s.second += e.energy_it_wh;
  }
  std::vector<RegionalIntensity> out;
  for (const auto& [region, s] : sums) {
    if (s.second > 0) out.push_back({region, s.first / s.second / kKgPerGramWhPerKwh});
  }
  return out;
}

std::optional<AlphaBalance> alpha_balance(double provider_kg, double provider_energy_wh,
                                          std::span<const SkuEnergyRate> rates,
                                          std::span<const RegionalIntensity> intensities,
                                          const std::map<SkuRegionKey, double>& regional_usage) {
  std::unordered_map<SkuId, double> rate_of;
  for (const auto& r : rates) rate_of[r.sku] = r.wh_per_unit;
  std::map<RegionId, double> intensity_of;
  for (const auto& i : intensities) intensity_of[i.region] = i.g_per_kwh;
  const double global = provider_energy_wh > 0 ? provider_kg / provider_energy_wh / kKgPerGramWhPerKwh : 0.0;

  AlphaBalance balance;
  double unscaled_kg = 0.0;
  for (const auto& [key, usage] : regional_usage) {
    auto rate = rate_of.find(key.sku);
    if (rate == rate_of.end()) continue;
    auto it = intensity_of.find(key.region);
    const double g = it != intensity_of.end() ? it->second : global;
    balance.adjusted_g_per_kwh[key] = g;
    unscaled_kg += g * rate->second * usage * kKgPerGramWhPerKwh;
  }
  if (!(unscaled_kg > 0)) return std::nullopt;
  balance.alpha = provider_kg / unscaled_kg;
  for (auto& [_, g] : balance.adjusted_g_per_kwh) g *= balance.alpha;
  return balance;
}

double beta_overhead(double total_cloud_kg, double billed_kg, const std::string& key) {
  if (!(billed_kg > 0)) throw BetaUndefinedError(key);
  return total_cloud_kg / billed_kg;
}

std::vector<FootprintReport> account_footprints(
    Month month, double beta, std::span<const SkuUsageRecord> billing,
    const std::unordered_map<SkuId, const SkuRecord*>& catalog,
    const std::unordered_map<SkuId, double>& rates,
    const std::unordered_map<SkuId, const AlphaBalance*>& balances, Diagnostics& diag) {
  struct Key {
    AccountId account;
    ProductId product;
    RegionId region;
    auto operator<=>(const Key&) const = default;
  };
  std::map<Key, double> sums;
  std::size_t unrated = 0;
  for (const auto& u : billing) {
    if (u.month != month || !u.account) continue;
    auto sku = catalog.find(u.sku);
    auto rate = rates.find(u.sku);
    auto bal = balances.find(u.sku);
    if (sku == catalog.end() || rate == rates.end() || bal == balances.end()) {
      ++unrated;
      continue;
    }
    double kg = 0.0;
    auto g = bal->second->adjusted_g_per_kwh.find({u.sku, u.region});
    if (g != bal->second->adjusted_g_per_kwh.end()) {
      kg = beta * g->second * rate->second * u.usage_units * kKgPerGramWhPerKwh;
    }
    sums[{*u.account, sku->second->product, u.region}] += kg;
  }
  if (unrated > 0) {
    diag.warn("unrated_usage", fmt::format("{}: {} billed usage rows have no SKU energy rate; excluded",
                                           format_month(month), unrated));
  }
  std::vector<FootprintReport> out;
  out.reserve(sums.size());
  for (const auto& [k, kg] : sums) out.push_back({k.account, k.product, k.region, month, kg, beta});
  return out;
}

FootprintResult compute_customer_footprints(const InputBundle& bundle,
                                            std::span<const carbon::EmissionRecord> emissions,
                                            Diagnostics& diag) {
  const ClusterTopology topology = bundle.topology();
  const Names& names = bundle.names;

  std::unordered_map<SkuId, const SkuRecord*> catalog;
  std::map<UserId, std::vector<SkuRecord>> skus_of;
  for (const auto& s : bundle.skus) {
    if (s.is_commitment || catalog.contains(s.sku)) continue;
    catalog.emplace(s.sku, &s);
    skus_of[s.provider].push_back(s);
  }
  std::set<UserId> cloud_users;
  for (const auto& [p, _] : skus_of) cloud_users.insert(p);
  cloud_users.insert(bundle.cloud_overhead_users.begin(), bundle.cloud_overhead_users.end());

  std::size_t excluded = 0;
  std::set<Month> months;
  for (const auto& u : bundle.billing_usage) {
    if (catalog.contains(u.sku)) {
      months.insert(u.month);
    } else {
      ++excluded;
    }
  }
  if (excluded > 0) {
    diag.warn("excluded_usage", fmt::format("{} billing rows reference commitment or unknown SKUs; excluded",
                                            excluded));
  }
  std::map<Month, std::vector<carbon::EmissionRecord>> emissions_by_month;
  for (const auto& e : emissions) {
    if (!cloud_users.contains(e.user)) continue;
    const Month m = month_of(e.hour);
    emissions_by_month[m].push_back(e);
    if (e.energy_it_wh > 0) months.insert(m);
  }

  FootprintResult result;
  for (const Month month : months) {
    const auto& month_emissions = emissions_by_month[month];
    MonthSummary summary;
    summary.month = month;

    std::map<UserId, std::pair<double, double>> energy_carbon;  // Wh, kg
    for (const auto& e : month_emissions) {
      auto& ec = energy_carbon[e.user];
      ec.first += e.energy_it_wh;
      ec.second += e.kg_co2e;
    }
    for (UserId u : cloud_users) summary.cloud_kg += energy_carbon[u].second;

    std::unordered_map<SkuId, double> total_usage;
    std::map<SkuRegionKey, double> regional_usage;
    for (const auto& u : bundle.billing_usage) {
      if (u.month != month || !catalog.contains(u.sku)) continue;
      total_usage[u.sku] += u.usage_units;
      regional_usage[{u.sku, u.region}] += u.usage_units;
    }

    std::unordered_map<SkuId, double> rates;
    for (const auto& [provider, skus] : skus_of) {
      ProviderSummary p;
      p.provider = provider;
      p.energy_wh = energy_carbon[provider].first;
      p.kg_co2e = energy_carbon[provider].second;
      try {
        p.rates = sku_energy_rates(p.energy_wh, skus, total_usage);
      } catch (const NoBillableUsageError&) {
        if (p.energy_wh > 0) {
          diag.warn("no_billable_usage",
                    fmt::format("{}: provider {} has energy but no billable SKU usage; its emissions "
                                "are spread as overhead",
                                format_month(month), names.users.name(provider)));
        }
        summary.providers.push_back(std::move(p));
        continue;
      }
      p.intensities = regional_intensity(provider, month_emissions, topology);
      std::map<SkuRegionKey, double> own_usage;
      for (const auto& s : skus) {
        for (auto it = regional_usage.lower_bound({s.sku, RegionId{0}});
             it != regional_usage.end() && it->first.sku == s.sku; ++it) {
          own_usage.insert(*it);
        }
      }
      p.balance = alpha_balance(p.kg_co2e, p.energy_wh, p.rates, p.intensities, own_usage);
      for (const auto& r : p.rates) p.rated_energy_wh += total_usage[r.sku] * r.wh_per_unit;
      if (!p.balance) {
        if (p.kg_co2e > 0) {
          diag.warn("alpha_undefined", fmt::format("{}: provider {} has no SKU carbon to balance; skipped",
                                                   format_month(month), names.users.name(provider)));
        }
        summary.providers.push_back(std::move(p));
        continue;
      }
      p.billable = true;
      for (const auto& r : p.rates) rates[r.sku] = r.wh_per_unit;
      for (const auto& [key, usage] : own_usage) {
        p.sku_carbon_kg += p.balance->adjusted_g_per_kwh.at(key) * rates[key.sku] * usage * kKgPerGramWhPerKwh;
      }
      summary.providers.push_back(std::move(p));
    }

    std::unordered_map<SkuId, const AlphaBalance*> balances;
    for (const auto& p : summary.providers) {
      if (!p.billable) continue;
      for (const auto& r : p.rates) balances[r.sku] = &*p.balance;
    }
    for (const auto& u : bundle.billing_usage) {
      if (u.month != month || !u.account) continue;
      auto bal = balances.find(u.sku);
      if (bal == balances.end()) continue;
      auto g = bal->second->adjusted_g_per_kwh.find({u.sku, u.region});
      if (g == bal->second->adjusted_g_per_kwh.end()) continue;
      summary.billed_kg += g->second * rates[u.sku] * u.usage_units * kKgPerGramWhPerKwh;
    }

    if (summary.cloud_kg > 0 || summary.billed_kg > 0) {
      summary.beta = beta_overhead(summary.cloud_kg, summary.billed_kg, format_month(month));
    }
    auto rows = account_footprints(month, summary.beta, bundle.billing_usage, catalog, rates, balances, diag);
    for (const auto& r : rows) summary.allocated_kg += r.kg_co2e;
    result.rows.insert(result.rows.end(), rows.begin(), rows.end());
    result.months.push_back(std::move(summary));
  }
  return result;
}

}  // namespace carbonalloc::footprint
