#pragma once

#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "carbonalloc/carbon/carbon_engine.hpp"
#include "carbonalloc/core/diagnostics.hpp"
#include "carbonalloc/core/model.hpp"

namespace carbonalloc::footprint {

/// Energy allocated to one usage unit of a SKU.
struct SkuEnergyRate {
  SkuId sku;
  double wh_per_unit = 0.0;
};

/// X_s = energy * price_s / sum_v(usage_v * price_v) over the provider's SKUs.
/// Per-unit energy is proportional to list price and sum(usage * X) equals
/// the provider's energy. Throws NoBillableUsageError when the weighted usage
/// is zero.
std::vector<SkuEnergyRate> sku_energy_rates(double provider_energy_wh, std::span<const SkuRecord> skus,
                                            const std::unordered_map<SkuId, double>& total_usage);

struct RegionalIntensity {
  RegionId region;
  double g_per_kwh = 0.0;  // emissions over IT energy, PUE included
};

/// Effective intensity of one provider per region, from its emission records.
/// Regions without energy are omitted. Sorted by region id.
std::vector<RegionalIntensity> regional_intensity(UserId provider,
                                                  std::span<const carbon::EmissionRecord> emissions,
                                                  const ClusterTopology& topology);

struct SkuRegionKey {
  SkuId sku;
  RegionId region;
  auto operator<=>(const SkuRegionKey&) const = default;
};

struct AlphaBalance {
  double alpha = 1.0;
  /// Adjusted intensity per (SKU, region), g/kWh: alpha times the regional value.
  std::map<SkuRegionKey, double> adjusted_g_per_kwh;
};

/// Rescales regional intensities so SKU-allocated carbon equals the provider's
/// footprint. Regions where the provider used no energy take its global mean
/// intensity. nullopt when the unscaled SKU carbon is zero.
std::optional<AlphaBalance> alpha_balance(double provider_kg, double provider_energy_wh,
                                          std::span<const SkuEnergyRate> rates,
                                          std::span<const RegionalIntensity> intensities,
                                          const std::map<SkuRegionKey, double>& regional_usage);

/// total cloud emissions / carbon carried by billed usage.
/// Throws BetaUndefinedError (with `key`) when the denominator is zero.
double beta_overhead(double total_cloud_kg, double billed_kg, const std::string& key);

/// Footprint of one billing account for one product in one region and month.
struct FootprintReport {
  AccountId account;
  ProductId product;
  RegionId region;
  Month month;
  double kg_co2e = 0.0;
  double beta = 1.0;
};

struct ProviderSummary {
  UserId provider;
  double energy_wh = 0.0;  // P_j
  double kg_co2e = 0.0;    // CF_j
  bool billable = false;   // has rates, alpha and billed carbon
  std::vector<SkuEnergyRate> rates;
  std::vector<RegionalIntensity> intensities;
  std::optional<AlphaBalance> balance;
  double rated_energy_wh = 0.0;  // sum usage * X
  double sku_carbon_kg = 0.0;    // sum adjusted intensity * X * usage (all usage rows)
};

struct MonthSummary {
  Month month;
  double cloud_kg = 0.0;   // sum of CF_j over providers and overhead users
  double billed_kg = 0.0;  // carbon of billed usage before beta
  double beta = 1.0;
  double allocated_kg = 0.0;  // sum of footprint rows
  std::vector<ProviderSummary> providers;
};

/// Footprint rows of one month. `rows` are sorted by (account, product, region).
std::vector<FootprintReport> account_footprints(
    Month month, double beta, std::span<const SkuUsageRecord> billing,
    const std::unordered_map<SkuId, const SkuRecord*>& catalog,
    const std::unordered_map<SkuId, double>& rates,
    const std::unordered_map<SkuId, const AlphaBalance*>& balances, Diagnostics& diag);

struct FootprintResult {
  std::vector<MonthSummary> months;
  std::vector<FootprintReport> rows;  // sorted by (month, account, product, region)
};

/// Runs rates, regional intensities, alpha, beta and account footprints for
/// every month touched by billing usage or cloud energy.
/// Provider energy comes from the emission records' IT energy, so the two
/// always describe the same final ledger.
FootprintResult compute_customer_footprints(const InputBundle& bundle,
                                            std::span<const carbon::EmissionRecord> emissions,
                                            Diagnostics& diag);

}  // namespace carbonalloc::footprint
