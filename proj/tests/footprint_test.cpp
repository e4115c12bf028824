#include <algorithm>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "carbonalloc/core/errors.hpp"
#include "carbonalloc/footprint/customer_footprint.hpp"
#include "carbonalloc/report/report.hpp"
#include "test_support.hpp"

namespace carbonalloc {
namespace {

using testing::Fixture;
using testing::at;

std::vector<SkuRecord> two_skus() {
  return {{SkuId{0}, ProductId{0}, UserId{1}, 1.75, "a", false}, {SkuId{1}, ProductId{0}, UserId{1}, 1.0, "b", false}};
}

double rate_of(const std::vector<footprint::SkuEnergyRate>& r, std::uint32_t sku) {
  for (const auto& x : r) {
    if (x.sku.value == sku) return x.wh_per_unit;
  }
  return -1;
}

TEST(SkuRates, PriceProportional) {
  const auto skus = two_skus();
  // The table's quantities: A = 15, B = 10.
  auto r = footprint::sku_energy_rates(30, skus, {{SkuId{0}, 15}, {SkuId{1}, 10}});
  EXPECT_NEAR(rate_of(r, 1), 30.0 / (15 * 1.75 + 10), 1e-15);
  EXPECT_NEAR(rate_of(r, 1), 0.8276, 1e-4);
  EXPECT_NEAR(rate_of(r, 0), 1.4483, 1e-4);
  EXPECT_NEAR(rate_of(r, 0) / rate_of(r, 1), 1.75, 1e-12);
  EXPECT_NEAR(15 * rate_of(r, 0) + 10 * rate_of(r, 1), 30, 1e-12);
  // Quantities that reproduce the listed 0.92 and 1.62: A = 10, B = 15.
  r = footprint::sku_energy_rates(30, skus, {{SkuId{0}, 10}, {SkuId{1}, 15}});
  EXPECT_NEAR(rate_of(r, 1), 30.0 / 32.5, 1e-15);
  EXPECT_NEAR(rate_of(r, 1) / 0.92, 1.0, 0.005);
  EXPECT_NEAR(rate_of(r, 0) / 1.62, 1.0, 0.005);
}

TEST(SkuRates, SingleAndEmpty) {
  const std::vector<SkuRecord> one{{SkuId{0}, ProductId{0}, UserId{1}, 3.0, "a", false}};
  EXPECT_DOUBLE_EQ(footprint::sku_energy_rates(50, one, {{SkuId{0}, 4}})[0].wh_per_unit, 12.5);
  EXPECT_THROW(footprint::sku_energy_rates(50, one, {}), NoBillableUsageError);
  EXPECT_THROW(footprint::sku_energy_rates(50, one, {{SkuId{0}, 0}}), NoBillableUsageError);
}

TEST(SkuRates, RandomizedClosure) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.01, 100);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<SkuRecord> skus;
    std::unordered_map<SkuId, double> usage;
    const int n = 1 + static_cast<int>(rng() % 6);
    for (int s = 0; s < n; ++s) {
      skus.push_back({SkuId{static_cast<std::uint32_t>(s)}, ProductId{0}, UserId{1}, u(rng), "x", false});
      usage[SkuId{static_cast<std::uint32_t>(s)}] = u(rng);
    }
    const double p = 1e6 * u(rng);
    const auto r = footprint::sku_energy_rates(p, skus, usage);
    double sum = 0;
    for (int s = 0; s < n; ++s) {
      sum += usage[SkuId{static_cast<std::uint32_t>(s)}] * r[s].wh_per_unit;
      ASSERT_NEAR(r[s].wh_per_unit / r[0].wh_per_unit, skus[s].list_price_per_unit / skus[0].list_price_per_unit,
                  1e-9 * skus[s].list_price_per_unit / skus[0].list_price_per_unit);
    }
    ASSERT_NEAR(sum / p, 1.0, 1e-9);
  }
}

carbon::EmissionRecord rec(UserId u, ClusterId c, double wh, double g) {
  carbon::EmissionRecord e;
  e.user = u;
  e.cluster = c;
  e.hour = testing::h0();
  e.energy_it_wh = wh;
  e.energy_total_wh = wh;
  e.g_per_kwh = g;
  e.kg_co2e = carbon::emission_kg(wh, 1.0, g);
  return e;
}

TEST(RegionalIntensity, WeightedMean) {
  Fixture f;
  const auto c1 = f.cluster("c1", "Z1", "r");
  const auto c2 = f.cluster("c2", "Z2", "r");
  const auto c3 = f.cluster("c3", "Z3", "empty");
  const auto p = f.user("p");
  const auto other = f.user("other");
  const std::vector<carbon::EmissionRecord> em{rec(p, c1, 60, 100), rec(p, c2, 40, 600), rec(other, c1, 1e9, 900),
                                               rec(p, c3, 0, 700)};
  const auto r = footprint::regional_intensity(p, em, f.b.topology());
  ASSERT_EQ(r.size(), 1u);
  EXPECT_NEAR(r[0].g_per_kwh, 300, 1e-12);

  const std::vector<carbon::EmissionRecord> single{rec(p, c1, 123, 500), rec(p, c1, 77, 500)};
  EXPECT_NEAR(footprint::regional_intensity(p, single, f.b.topology())[0].g_per_kwh, 500, 1e-12);
}

TEST(AlphaBalance, MatchingAndSkewedUsage) {
  // 600 Wh at 100 g/kWh in region 0, 400 Wh at 600 g/kWh in region 1: CF = 0.3 kg.
  const std::vector<footprint::SkuEnergyRate> rates{{SkuId{0}, 10.0}};
  const std::vector<footprint::RegionalIntensity> ci{{RegionId{0}, 100}, {RegionId{1}, 600}};
  const double cf = 0.3, energy = 1000;
  std::map<footprint::SkuRegionKey, double> matching{{{SkuId{0}, RegionId{0}}, 60}, {{SkuId{0}, RegionId{1}}, 40}};
  auto bal = footprint::alpha_balance(cf, energy, rates, ci, matching);
  ASSERT_TRUE(bal);
  EXPECT_NEAR(bal->alpha, 1.0, 1e-12);

  std::map<footprint::SkuRegionKey, double> low{{{SkuId{0}, RegionId{0}}, 100}};
  bal = footprint::alpha_balance(cf, energy, rates, ci, low);
  ASSERT_TRUE(bal);
  EXPECT_NEAR(bal->alpha, 3.0, 1e-12);
  double carbon = 0;
  for (const auto& [k, u] : low) carbon += bal->adjusted_g_per_kwh.at(k) * 10.0 * u * 1e-6;
  EXPECT_NEAR(carbon, cf, 1e-12);

  // Region without provider energy takes the provider's global mean, 300 g/kWh.
  std::map<footprint::SkuRegionKey, double> elsewhere{{{SkuId{0}, RegionId{7}}, 100}};
  bal = footprint::alpha_balance(cf, energy, rates, ci, elsewhere);
  ASSERT_TRUE(bal);
  EXPECT_NEAR(bal->alpha, 1.0, 1e-12);

  EXPECT_FALSE(footprint::alpha_balance(cf, energy, rates, ci, {}).has_value());
}

TEST(Beta, OverheadFactor) {
  EXPECT_EQ(footprint::beta_overhead(5, 5, "m"), 1.0);
  EXPECT_DOUBLE_EQ(footprint::beta_overhead(6, 4, "m"), 1.5);
  EXPECT_THROW(footprint::beta_overhead(6, 0, "2023-09"), BetaUndefinedError);
}

/// Cloud provider in two regions plus an overhead user without SKUs.
Fixture cloud_world(double usage_scale, bool overhead) {
  Fixture f;
  f.cluster("east", "ZE", "region-east");
  f.cluster("west", "ZW", "region-west");
  const auto db = f.user("db");
  const auto ctl = f.user("ctl");
  const auto m = month_of(testing::h0());
  const auto a = f.sku("a", "sql", db, 1.75);
  const auto b = f.sku("b", "sql", db, 1.0);
  f.sku("commit", "sql", db, 5.0, true);
  f.bill(a, "region-east", "alpha", m, 6 * usage_scale);
  f.bill(b, "region-east", "alpha", m, 5 * usage_scale);
  f.bill(a, "region-west", "beta", m, 4 * usage_scale);
  f.bill(b, "region-west", "beta", m, 10 * usage_scale);
  f.bill(b, "region-west", "", m, 2 * usage_scale);
  f.bill(f.b.names.skus.intern("commit"), "region-west", "beta", m, 99);
  if (overhead) f.b.cloud_overhead_users.push_back(ctl);
  return f;
}

std::vector<carbon::EmissionRecord> cloud_emissions(Fixture& f, double energy_scale) {
  UserId db, ctl;
  ClusterId ce, cw;
  f.b.names.users.find("db", db);
  f.b.names.users.find("ctl", ctl);
  f.b.names.clusters.find("east", ce);
  f.b.names.clusters.find("west", cw);
  return {rec(db, ce, 600 * energy_scale, 100), rec(db, cw, 400 * energy_scale, 600),
          rec(ctl, ce, 300 * energy_scale, 100), rec(f.user("web"), cw, 5000, 600)};
}

TEST(CustomerFootprints, ClosuresAndCommitmentExclusion) {
  auto f = cloud_world(1, true);
  const auto em = cloud_emissions(f, 1);
  Diagnostics diag;
  const auto r = footprint::compute_customer_footprints(f.b, em, diag);
  ASSERT_EQ(r.months.size(), 1u);
  const auto& ms = r.months[0];
  const double cf_db = (600 * 100 + 400 * 600) * 1e-6;
  const double cf_ctl = 300 * 100 * 1e-6;
  EXPECT_NEAR(ms.cloud_kg, cf_db + cf_ctl, 1e-15);
  ASSERT_EQ(ms.providers.size(), 1u);
  const auto& p = ms.providers[0];
  EXPECT_TRUE(p.billable);
  EXPECT_NEAR(p.rated_energy_wh / 1000, 1.0, 1e-12);
  EXPECT_NEAR(p.sku_carbon_kg / cf_db, 1.0, 1e-12);
  EXPECT_NEAR(ms.allocated_kg / ms.cloud_kg, 1.0, 1e-12);
  EXPECT_GT(ms.beta, 1.0);
  EXPECT_EQ(diag.count("excluded_usage"), 1u);
  // Unbilled row absorbs energy but never reaches an account.
  double total = 0;
  for (const auto& row : r.rows) total += row.kg_co2e;
  EXPECT_NEAR(total / ms.cloud_kg, 1.0, 1e-12);
}

TEST(CustomerFootprints, BetaIsOneWhenFullyBilledAndHomogeneous) {
  auto f = cloud_world(1, false);
  f.b.billing_usage.erase(std::remove_if(f.b.billing_usage.begin(), f.b.billing_usage.end(),
                                         [](const SkuUsageRecord& u) { return !u.account; }),
                          f.b.billing_usage.end());
  Diagnostics diag;
  const auto base = footprint::compute_customer_footprints(f.b, cloud_emissions(f, 1), diag);
  EXPECT_NEAR(base.months[0].beta, 1.0, 1e-12);

  auto g = cloud_world(2, true);
  auto h = cloud_world(1, true);
  const auto doubled = footprint::compute_customer_footprints(g.b, cloud_emissions(g, 2), diag);
  const auto single = footprint::compute_customer_footprints(h.b, cloud_emissions(h, 1), diag);
  EXPECT_NEAR(doubled.months[0].beta, single.months[0].beta, 1e-12);
}

TEST(CustomerFootprints, BetaUndefinedWithoutBilledUsage) {
  auto f = cloud_world(1, true);
  f.b.billing_usage.erase(std::remove_if(f.b.billing_usage.begin(), f.b.billing_usage.end(),
                                         [](const SkuUsageRecord& u) { return u.account.has_value(); }),
                          f.b.billing_usage.end());
  Diagnostics diag;
  EXPECT_THROW(footprint::compute_customer_footprints(f.b, cloud_emissions(f, 1), diag), BetaUndefinedError);
}

TEST(AccountFootprints, SplitAccountsAreIdentical) {
  Fixture f;
  const auto p = f.user("p");
  const auto s = f.sku("s", "prod", p, 2.0);
  const auto m = month_of(testing::h0());
  f.bill(s, "r", "x", m, 5);
  f.bill(s, "r", "y", m, 5);
  f.bill(s, "r", "z", m, 0);
  footprint::AlphaBalance bal;
  bal.adjusted_g_per_kwh[{s, f.b.names.regions.intern("r")}] = 400;
  const std::unordered_map<SkuId, const SkuRecord*> catalog{{s, &f.b.skus[0]}};
  const std::unordered_map<SkuId, double> rates{{s, 3.0}};
  const std::unordered_map<SkuId, const footprint::AlphaBalance*> balances{{s, &bal}};
  Diagnostics diag;
  const auto rows = footprint::account_footprints(m, 1.5, f.b.billing_usage, catalog, rates, balances, diag);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_NEAR(rows[0].kg_co2e, 1.5 * 400 * 3 * 5 * 1e-6, 1e-15);
  EXPECT_EQ(rows[0].kg_co2e, rows[1].kg_co2e);
  EXPECT_EQ(rows[2].kg_co2e, 0.0);
}

report::RunOutputs run_preset(sim::Preset p) {
  sim::ScenarioSpec spec;
  spec.preset = p;
  return report::execute_run(sim::generate(spec), report::RunConfig{});
}

TEST(Presets, TwoAccountsReconcile) {
  const auto run = run_preset(sim::Preset::TwoAccounts);
  EXPECT_TRUE(run.closures_pass());
  ASSERT_FALSE(run.footprint.months.empty());
  for (const auto& m : run.footprint.months) EXPECT_NEAR(m.allocated_kg / m.cloud_kg, 1.0, 1e-9);
}

TEST(Presets, OverheadPoolRaisesBeta) {
  const auto run = run_preset(sim::Preset::OverheadPool);
  EXPECT_TRUE(run.closures_pass());
  ASSERT_FALSE(run.footprint.months.empty());
  EXPECT_GT(run.footprint.months[0].beta, 1.0);
}

}  // namespace
}  // namespace carbonalloc
