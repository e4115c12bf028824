#include <cmath>
#include <fstream>
#include <map>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "carbonalloc/core/errors.hpp"
#include "carbonalloc/sim/fleet_sim.hpp"
#include "test_support.hpp"

namespace carbonalloc {
namespace {

std::map<std::string, std::string> hashes_of(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    out[e.path().filename().string()] = sim::sha256_file(e.path());
  }
  return out;
}

TEST(Generate, SameSeedSameBytes) {
  testing::TempDir a("sim-a"), b("sim-b"), c("sim-c");
  sim::ScenarioSpec spec;
  spec.machine_count = 60;
  spec.cluster_count = 3;
  sim::write_scenario(a.path(), spec, sim::generate(spec));
  sim::write_scenario(b.path(), spec, sim::generate(spec));
  const auto ha = hashes_of(a.path());
  EXPECT_EQ(ha, hashes_of(b.path()));
  EXPECT_TRUE(ha.contains("manifest.json"));
  spec.seed = 43;
  sim::write_scenario(c.path(), spec, sim::generate(spec));
  EXPECT_NE(ha.at("power_samples.csv"), hashes_of(c.path()).at("power_samples.csv"));
}

TEST(Generate, ManifestRecordsProvenance) {
  testing::TempDir dir("sim-manifest");
  sim::ScenarioSpec spec;
  spec.seed = 7;
  sim::write_scenario(dir.path(), spec, sim::generate(spec));
  std::ifstream in(dir.path() / "manifest.json");
  const auto m = nlohmann::json::parse(in);
  EXPECT_EQ(m.at("seed").get<std::uint64_t>(), 7u);
  EXPECT_EQ(m.at("generator").get<std::string>(), sim::kGeneratorAlgorithm);
  EXPECT_TRUE(m.contains("schema_version"));
  const auto& tables = m.at("files");
  ASSERT_TRUE(tables.contains("machines.csv"));
  EXPECT_EQ(tables.at("machines.csv").get<std::string>(), sim::sha256_file(dir.path() / "machines.csv"));
}

TEST(Sha256, KnownDigest) {
  testing::TempDir dir("sha");
  {
    std::ofstream out(dir.path() / "abc.txt", std::ios::binary);
    out << "abc";
  }
  EXPECT_EQ(sim::sha256_file(dir.path() / "abc.txt"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Figure1Preset, ExactScenario) {
  sim::ScenarioSpec spec;
  spec.preset = sim::Preset::Figure1;
  const auto b = sim::generate(spec);
  ASSERT_EQ(b.machines.size(), 1u);
  EXPECT_EQ(b.machines[0].idle_rating_watts, 6e6);
  ASSERT_EQ(b.power_samples.size(), 24u);
  UserId prod, nonprod;
  ASSERT_TRUE(b.names.users.find("prod", prod));
  ASSERT_TRUE(b.names.users.find("nonprod", nonprod));
  std::map<std::int64_t, std::pair<double, double>> gcu;
  for (const auto& g : b.gcu_usage) {
    auto& cell = gcu[g.hour.value];
    (g.user == prod ? cell.first : cell.second) += g.gcu_used;
  }
  for (const auto& s : b.power_samples) {
    const int hod = static_cast<int>(s.hour.value % 24);
    const bool day = hod >= 6 && hod < 18;
    EXPECT_EQ(s.measured_power_watts, day ? 14e6 : 12e6);
    const auto& [p, n] = gcu.at(s.hour.value);
    EXPECT_DOUBLE_EQ(p / (p + n), day ? 0.75 : 0.5);
  }
  for (const auto& a : b.allocations) EXPECT_EQ(a.user, prod);
}

TEST(Figure1Preset, SplitKeepsTotals) {
  sim::ScenarioSpec spec;
  spec.preset = sim::Preset::Figure1;
  spec.figure1_machines = 5;
  const auto b = sim::generate(spec);
  ASSERT_EQ(b.machines.size(), 5u);
  double rating = 0;
  for (const auto& m : b.machines) rating += m.idle_rating_watts;
  EXPECT_NEAR(rating, 6e6, 1e-6);
}

TEST(Presets, IgnoreSeed) {
  for (const auto p : sim::all_presets()) {
    sim::ScenarioSpec a, b;
    a.preset = b.preset = p;
    b.seed = 999;
    const auto ba = sim::generate(a), bb = sim::generate(b);
    ASSERT_EQ(ba.power_samples.size(), bb.power_samples.size());
    for (std::size_t i = 0; i < ba.power_samples.size(); ++i) {
      EXPECT_EQ(ba.power_samples[i].measured_power_watts, bb.power_samples[i].measured_power_watts);
    }
    EXPECT_EQ(sim::parse_preset(sim::to_string(p)), p);
  }
  EXPECT_THROW(sim::parse_preset("figure-one"), ConfigError);
}

TEST(IntensityFeed, MeanNearDefault) {
  std::vector<ZoneId> zones;
  for (std::uint32_t z = 0; z < 12; ++z) zones.push_back(ZoneId{z});
  const auto t = sim::intensity_feed({}, 1234, zones, sim::ScenarioSpec::default_start(), 24 * 365);
  ASSERT_GT(t.hourly.size(), 12u * 8000u);
  double sum = 0, sq = 0;
  for (const auto& r : t.hourly) {
    ASSERT_GE(r.g_per_kwh, 0);
    sum += r.g_per_kwh;
    sq += r.g_per_kwh * r.g_per_kwh;
  }
  const double n = static_cast<double>(t.hourly.size());
  const double mean = sum / n;
  EXPECT_NEAR(mean / 320.8, 1.0, 0.05);
  EXPECT_NEAR(std::sqrt(sq / n - mean * mean) / 227.5, 1.0, 0.25);
  EXPECT_FALSE(t.annual.empty());
}

TEST(IntensityFeed, ZeroStdIsConstant) {
  sim::IntensitySpec spec;
  spec.std_g_per_kwh = 0;
  spec.missing_rate = 0;
  const std::vector<ZoneId> zones{ZoneId{0}, ZoneId{1}};
  const auto t = sim::intensity_feed(spec, 1, zones, sim::ScenarioSpec::default_start(), 100);
  ASSERT_EQ(t.hourly.size(), 200u);
  for (const auto& r : t.hourly) EXPECT_NEAR(r.g_per_kwh, 320.8, 1e-9);
}

TEST(IntensityFeed, NegativeMeanRejected) {
  sim::IntensitySpec spec;
  spec.mean_g_per_kwh = -1;
  const std::vector<ZoneId> zones{ZoneId{0}};
  EXPECT_THROW(sim::intensity_feed(spec, 1, zones, sim::ScenarioSpec::default_start(), 10), ConfigError);
  sim::ScenarioSpec s;
  s.intensity.mean_g_per_kwh = -5;
  EXPECT_THROW(sim::generate(s), ConfigError);
}

TEST(ValidateSpec, Contradictions) {
  const auto bad = [](auto mutate) {
    sim::ScenarioSpec s;
    mutate(s);
    return s;
  };
  EXPECT_THROW(sim::validate_spec(bad([](auto& s) { s.idle_fraction = 1.0; })), ConfigError);
  EXPECT_THROW(sim::validate_spec(bad([](auto& s) { s.idle_fraction = 0.0; })), ConfigError);
  EXPECT_THROW(sim::validate_spec(bad([](auto& s) { s.machine_count = 0; })), ConfigError);
  EXPECT_THROW(sim::validate_spec(bad([](auto& s) { s.hours = 0; })), ConfigError);
  EXPECT_THROW(sim::validate_spec(bad([](auto& s) { s.user_count = 3; })), ConfigError);
  EXPECT_THROW(sim::validate_spec(bad([](auto& s) {
                 s.economy.cyclic = true;
                 s.economy.acyclic_depth = 1;
               })),
               ConfigError);
  EXPECT_NO_THROW(sim::validate_spec(sim::ScenarioSpec{}));
}

TEST(RandomFleet, WithinOracleShapes) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto spec = testing::small_random_spec(seed);
    const auto b = sim::generate(spec);
    EXPECT_EQ(b.machines.size(), static_cast<std::size_t>(spec.machine_count));
    EXPECT_EQ(b.names.users.size() - 1, static_cast<std::size_t>(spec.user_count));
    EXPECT_FALSE(b.skus.empty());
    EXPECT_FALSE(b.net_costs.empty());
  }
}

}  // namespace
}  // namespace carbonalloc
