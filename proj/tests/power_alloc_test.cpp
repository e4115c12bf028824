#include <cmath>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "carbonalloc/alloc/machine_allocation.hpp"
#include "carbonalloc/core/errors.hpp"
#include "carbonalloc/power/power_split.hpp"
#include "carbonalloc/realloc/pipeline.hpp"
#include "test_support.hpp"

namespace carbonalloc {
namespace {

using testing::Fixture;
using testing::at;

MachineRecord machine(double rating) { return {MachineId{0}, ClusterId{0}, Sharing::Shared, std::nullopt, rating}; }
PowerSample sample(double w) { return {MachineId{0}, testing::h0(), w}; }

TEST(SplitPower, ClampedIdle) {
  auto s = power::split_power(machine(6e6), sample(14e6));
  EXPECT_EQ(s.idle_watts, 6e6);
  EXPECT_EQ(s.dynamic_watts, 8e6);
  s = power::split_power(machine(6e6), sample(12e6));
  EXPECT_EQ(s.idle_watts, 6e6);
  EXPECT_EQ(s.dynamic_watts, 6e6);
  s = power::split_power(machine(10), sample(8));
  EXPECT_EQ(s.idle_watts, 8);
  EXPECT_EQ(s.dynamic_watts, 0);
  s = power::split_power(machine(0), sample(0));
  EXPECT_EQ(s.idle_watts, 0);
  EXPECT_EQ(s.dynamic_watts, 0);
}

TEST(SplitPower, MismatchedMachine) {
  auto p = sample(5);
  p.machine = MachineId{3};
  EXPECT_THROW(power::split_power(machine(1), p), InputError);
}

TEST(SplitPower, RandomizedBoundsAndMonotonicity) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1e4);
  for (int i = 0; i < 5000; ++i) {
    const double rating = u(rng);
    const double p = u(rng);
    const auto s = power::split_power(machine(rating), sample(p));
    ASSERT_GE(s.idle_watts, 0);
    ASSERT_LE(s.idle_watts, p);
    ASSERT_GE(s.dynamic_watts, 0);
    ASSERT_EQ(s.dynamic_watts, p - s.idle_watts);
    const auto higher = power::split_power(machine(rating + u(rng)), sample(p));
    ASSERT_GE(higher.idle_watts, s.idle_watts);
    ASSERT_LE(higher.dynamic_watts, s.dynamic_watts);
  }
}

TEST(ClusterPower, SingleMachineAndMissingSample) {
  Fixture f;
  const auto c = f.cluster("c1");
  const auto m = f.shared("m", c, 6);
  f.shared("off", c, 3);
  f.sample(m, at(0), 14);
  const MachineDirectory dir(f.b.machines);
  Diagnostics diag;
  const auto splits = power::split_all(dir, f.b.power_samples, diag);
  const auto series = power::cluster_power_series(splits, dir);
  ASSERT_EQ(series.size(), 1u);
  EXPECT_EQ(series[0].idle_watts, 6);
  EXPECT_EQ(series[0].dynamic_watts, 8);
  EXPECT_EQ(series[0].measured_watts, 14);
  EXPECT_EQ(diag.count("missing_sample"), 1u);
}

TEST(ClusterPower, MatchesIndependentResum) {
  const auto bundle = sim::generate([] {
    sim::ScenarioSpec s;
    s.seed = 9;
    s.machine_count = 50;
    s.cluster_count = 3;
    return s;
  }());
  const MachineDirectory dir(bundle.machines);
  Diagnostics diag;
  const auto series = power::cluster_power_series(power::split_all(dir, bundle.power_samples, diag), dir);

  std::map<std::pair<std::uint32_t, std::int64_t>, std::array<double, 3>> expected;
  std::map<std::uint32_t, const MachineRecord*> by_id;
  for (const auto& m : bundle.machines) by_id[m.machine.value] = &m;
  for (const auto& s : bundle.power_samples) {
    const auto* m = by_id.at(s.machine.value);
    const double idle = std::min(m->idle_rating_watts, s.measured_power_watts);
    auto& e = expected[{m->cluster.value, s.hour.value}];
    e[0] += idle;
    e[1] += s.measured_power_watts - idle;
    e[2] += s.measured_power_watts;
  }
  ASSERT_EQ(series.size(), expected.size());
  for (const auto& cp : series) {
    const auto& e = expected.at({cp.cluster.value, cp.hour.value});
    EXPECT_NEAR(cp.idle_watts, e[0], 1e-9 * e[2]);
    EXPECT_NEAR(cp.dynamic_watts, e[1], 1e-9 * e[2]);
    EXPECT_NEAR(cp.measured_watts, e[2], 1e-12 * e[2]);
    EXPECT_NEAR(cp.idle_watts + cp.dynamic_watts, cp.measured_watts, 1e-12 * e[2]);
  }
}

TEST(WeightedAllocation, TableWeights) {
  const ResourceWeights w;
  EXPECT_DOUBLE_EQ(alloc::weighted_allocation({10, 200, 0, 0}, w), 10.0 + 200.0 / 20.0);
  EXPECT_DOUBLE_EQ(alloc::weighted_allocation({0, 0, 1, 6}, w), 1.0 + 6.0 / 6.0);
  EXPECT_EQ(alloc::weighted_allocation({}, w), 0.0);
}

TEST(IdleFraction, Shares) {
  const ResourceWeights w;
  const std::vector<ResourceAllocationRecord> allocs = {
      {UserId{1}, ClusterId{0}, testing::h0(), {10, 200, 0, 0}},  // 20
      {UserId{2}, ClusterId{0}, testing::h0(), {0, 0, 1, 6}},     // 2
  };
  EXPECT_NEAR(alloc::idle_fraction(UserId{1}, ClusterId{0}, testing::h0(), allocs, w), 20.0 / 22.0, 1e-15);
  EXPECT_NEAR(alloc::idle_fraction(UserId{2}, ClusterId{0}, testing::h0(), allocs, w), 2.0 / 22.0, 1e-15);
  EXPECT_EQ(alloc::idle_fraction(UserId{3}, ClusterId{0}, testing::h0(), allocs, w), 0.0);
  const std::span<const ResourceAllocationRecord> sole(allocs.data(), 1);
  EXPECT_EQ(alloc::idle_fraction(UserId{1}, ClusterId{0}, testing::h0(), sole, w), 1.0);
  EXPECT_THROW(alloc::idle_fraction(UserId{1}, ClusterId{1}, testing::h0(), allocs, w), NoAllocationsError);
}

TEST(IdleFraction, ScaleInvariance) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 100);
  const ResourceWeights w;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ResourceAllocationRecord> allocs;
    for (std::uint32_t j = 1; j <= 5; ++j) allocs.push_back({UserId{j}, ClusterId{0}, testing::h0(), {u(rng), u(rng), u(rng), u(rng)}});
    const double k = 0.01 + u(rng);
    auto scaled = allocs;
    for (auto& a : scaled) a.allocation = a.allocation.scaled(k);
    double sum = 0;
    for (std::uint32_t j = 1; j <= 5; ++j) {
      const double f = alloc::idle_fraction(UserId{j}, ClusterId{0}, testing::h0(), allocs, w);
      sum += f;
      ASSERT_NEAR(f, alloc::idle_fraction(UserId{j}, ClusterId{0}, testing::h0(), scaled, w), 1e-12);
    }
    ASSERT_NEAR(sum, 1.0, 1e-12);
  }
}

struct Figure1Cells {
  std::map<std::int64_t, std::map<std::string, double>> by_hour;
};

Figure1Cells figure1_final(int machines) {
  sim::ScenarioSpec spec;
  spec.preset = sim::Preset::Figure1;
  spec.figure1_machines = machines;
  const auto bundle = sim::generate(spec);
  const auto result = realloc::run_allocation_pipeline(bundle, {});
  Figure1Cells out;
  for (const auto& e : result.final_ledger().entries()) {
    out.by_hour[e.key.hour.value - sim::ScenarioSpec::default_start().value][bundle.names.users.name(e.key.user)] += e.total_wh();
  }
  return out;
}

TEST(Figure1, DayAndNight) {
  for (int n : {1, 4}) {
    const auto cells = figure1_final(n);
    ASSERT_EQ(cells.by_hour.size(), 24u);
    for (const auto& [hour, users] : cells.by_hour) {
      const bool day = hour >= 6 && hour < 18;
      EXPECT_NEAR(users.at("prod"), day ? 12e6 : 9e6, 1e-9 * 12e6) << hour;
      EXPECT_NEAR(users.at("nonprod"), day ? 2e6 : 3e6, 1e-9 * 3e6) << hour;
    }
  }
}

TEST(Figure1, IdleAllToProd) {
  sim::ScenarioSpec spec;
  spec.preset = sim::Preset::Figure1;
  const auto bundle = sim::generate(spec);
  const MachineDirectory dir(bundle.machines);
  Diagnostics diag;
  const auto splits = power::split_all(dir, bundle.power_samples, diag);
  const alloc::AllocationShares shares(bundle.allocations, ResourceWeights{});
  const auto idle = alloc::allocate_idle(splits, dir, shares, diag);
  UserId prod;
  ASSERT_TRUE(bundle.names.users.find("prod", prod));
  for (const auto& e : idle.entries()) {
    if (e.key.user == prod) {
      EXPECT_NEAR(e.idle_wh, 6e6, 1e-3);
    } else {
      EXPECT_EQ(e.idle_wh, 0.0);
    }
  }
}

TEST(AllocateIdle, DedicatedOnlyAndOverhead) {
  Fixture f;
  const auto c = f.cluster("c1");
  const auto a = f.user("a");
  const auto b = f.user("b");
  f.sample(f.dedicated("ma", c, a, 5), at(0), 7);
  f.sample(f.dedicated("mb", c, b, 3), at(0), 2);
  f.sample(f.shared("ms", c, 4), at(0), 4);  // nobody holds an allocation
  const MachineDirectory dir(f.b.machines);
  Diagnostics diag;
  const auto splits = power::split_all(dir, f.b.power_samples, diag);
  const alloc::AllocationShares shares(f.b.allocations, ResourceWeights{});
  const auto idle = alloc::allocate_idle(splits, dir, shares, diag);
  EXPECT_EQ(idle.find({c, at(0), a})->idle_wh, 5);
  EXPECT_EQ(idle.find({c, at(0), b})->idle_wh, 2);
  EXPECT_EQ(idle.find({c, at(0), Names::unallocated_overhead()})->idle_wh, 4);
  EXPECT_EQ(diag.count("no_allocations"), 1u);
}

TEST(AllocateDynamic, GcuProportionalAndLocal) {
  Fixture f;
  const auto c = f.cluster("c1");
  const auto a = f.user("a");
  const auto b = f.user("b");
  const auto m1 = f.shared("m1", c, 10);
  const auto m2 = f.shared("m2", c, 10);
  const auto m3 = f.dedicated("m3", c, b, 1);
  f.sample(m1, at(0), 40);  // d = 30
  f.sample(m2, at(0), 20);  // d = 10, only b uses it
  f.sample(m3, at(0), 5);   // d = 4, nobody reports usage
  f.gcu(a, m1, at(0), 1);
  f.gcu(b, m1, at(0), 2);
  f.gcu(b, m2, at(0), 7);
  f.alloc(a, c, at(0), {1, 0, 0, 0});
  const MachineDirectory dir(f.b.machines);
  Diagnostics diag;
  const auto splits = power::split_all(dir, f.b.power_samples, diag);
  const alloc::AllocationShares shares(f.b.allocations, ResourceWeights{});
  const auto dyn = alloc::allocate_dynamic(splits, dir, f.b.gcu_usage, shares, diag);
  EXPECT_NEAR(dyn.find({c, at(0), a})->dynamic_wh, 10, 1e-12);
  EXPECT_NEAR(dyn.find({c, at(0), b})->dynamic_wh, 20 + 10 + 4, 1e-12);
}

TEST(AllocateDynamic, ZeroUsageSharedFollowsIdleFractions) {
  Fixture f;
  const auto c = f.cluster("c1");
  const auto a = f.user("a");
  const auto b = f.user("b");
  f.sample(f.shared("m", c, 2), at(0), 12);
  f.alloc(a, c, at(0), {3, 0, 0, 0});
  f.alloc(b, c, at(0), {1, 0, 0, 0});
  const MachineDirectory dir(f.b.machines);
  Diagnostics diag;
  const auto splits = power::split_all(dir, f.b.power_samples, diag);
  const alloc::AllocationShares shares(f.b.allocations, ResourceWeights{});
  const auto dyn = alloc::allocate_dynamic(splits, dir, f.b.gcu_usage, shares, diag);
  EXPECT_NEAR(dyn.find({c, at(0), a})->dynamic_wh, 7.5, 1e-12);
  EXPECT_NEAR(dyn.find({c, at(0), b})->dynamic_wh, 2.5, 1e-12);
  EXPECT_EQ(diag.count("zero_gcu_usage"), 1u);
}

}  // namespace
}  // namespace carbonalloc
