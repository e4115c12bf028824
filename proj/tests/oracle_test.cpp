#include <map>

#include <gtest/gtest.h>

#include "carbonalloc/oracle/oracle.hpp"
#include "carbonalloc/report/report.hpp"
#include "test_support.hpp"

namespace carbonalloc {
namespace {

InputBundle preset(sim::Preset p) {
  sim::ScenarioSpec spec;
  spec.preset = p;
  return sim::generate(spec);
}

double worst(const InputBundle& b, const report::RunConfig& cfg) {
  const auto ref = oracle::oracle_allocate(b, report::oracle_config(cfg));
  const auto run = report::execute_run(b, cfg);
  return report::compare_with_oracle(b, run, ref).max_rel_dev();
}

TEST(Oracle, Figure1ByEnumeration) {
  const auto b = preset(sim::Preset::Figure1);
  const auto ref = oracle::oracle_allocate(b, {});
  UserId prod, nonprod;
  ASSERT_TRUE(b.names.users.find("prod", prod));
  ASSERT_TRUE(b.names.users.find("nonprod", nonprod));
  const auto& final_stage = ref.stages.back();
  int rows = 0;
  for (const auto& [key, cell] : final_stage) {
    const auto hod = std::get<1>(key) % 24;
    const bool day = hod >= 6 && hod < 18;
    const double total = cell.idle_wh + cell.dynamic_wh;
    if (std::get<2>(key) == prod.value) {
      EXPECT_NEAR(total, day ? 12e6 : 9e6, 1e-3);
      ++rows;
    } else if (std::get<2>(key) == nonprod.value) {
      EXPECT_NEAR(total, day ? 2e6 : 3e6, 1e-3);
      ++rows;
    }
  }
  EXPECT_EQ(rows, 48);
  EXPECT_LT(worst(b, {}), 1e-9);
}

TEST(Oracle, PresetsMatchPipeline) {
  for (const auto p : sim::all_presets()) EXPECT_LT(worst(preset(p), {}), 1e-9) << sim::to_string(p);
}

TEST(Oracle, RandomSeedsMatchPipeline) {
  for (std::uint64_t seed = 100; seed < 104; ++seed) {
    EXPECT_LT(worst(sim::generate(testing::small_random_spec(seed)), {}), 1e-9) << seed;
  }
}

TEST(Oracle, RoundMismatchIsLocalizedToNetCostStages) {
  const auto b = sim::generate(sim::ScenarioSpec{});
  report::RunConfig cfg;
  cfg.rounds = 1;
  cfg.oracle_rounds = 2;
  const auto ref = oracle::oracle_allocate(b, report::oracle_config(cfg));
  const auto run = report::execute_run(b, cfg);
  const auto cmp = report::compare_with_oracle(b, run, ref);
  EXPECT_GT(cmp.max_rel_dev(), 1e-6);
  for (const auto& t : cmp.tables) {
    if (t.table.find("machine_allocation") != std::string::npos ||
        t.table.find("after_major_realloc") != std::string::npos ||
        t.table.find("after_minor_round_1") != std::string::npos) {
      EXPECT_LT(t.max_rel_dev, 1e-9) << t.table;
    }
  }
  bool final_differs = false;
  for (const auto& t : cmp.tables) final_differs |= t.table.ends_with("/final") && t.max_rel_dev > 1e-6;
  EXPECT_TRUE(final_differs);
}

TEST(Oracle, EmptyBundle) {
  const auto ref = oracle::oracle_allocate(InputBundle{}, {});
  for (const auto& s : ref.stages) EXPECT_TRUE(s.empty());
  EXPECT_TRUE(ref.emissions_kg.empty());
  EXPECT_TRUE(ref.footprint_kg.empty());
}

TEST(Oracle, RefusesOversizedBundles) {
  sim::ScenarioSpec spec;
  spec.machine_count = 201;
  spec.hours = 2;
  EXPECT_THROW(oracle::oracle_allocate(sim::generate(spec), {}), oracle::OracleLimitError);
  spec.machine_count = 10;
  spec.hours = 73;
  EXPECT_THROW(oracle::oracle_allocate(sim::generate(spec), {}), oracle::OracleLimitError);
  spec.hours = 2;
  spec.user_count = 21;
  EXPECT_THROW(oracle::oracle_allocate(sim::generate(spec), {}), oracle::OracleLimitError);
}

TEST(RelativeDeviation, Floor) {
  EXPECT_EQ(report::relative_deviation(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(report::relative_deviation(1, 2), 0.5);
  EXPECT_DOUBLE_EQ(report::relative_deviation(1e-12, 0, 1e-3), 1e-9);
}

}  // namespace
}  // namespace carbonalloc
