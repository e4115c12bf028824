#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "carbonalloc/core/model.hpp"

namespace carbonalloc::sim {

/// Identifier recorded in manifests. Bump it whenever the sampling code changes.
inline constexpr std::string_view kGeneratorAlgorithm = "mt19937_64+u53+box-muller/v1";

enum class Preset { Figure1, SankeySmall, OverheadPool, TwoAccounts, BalancedService, BlobstoreAds };

std::string to_string(Preset p);
/// Throws ConfigError for unknown names.
Preset parse_preset(std::string_view name);
const std::vector<Preset>& all_presets();

struct IntensitySpec {
  double mean_g_per_kwh = 320.8;
  double std_g_per_kwh = 227.5;
  double autocorrelation = 0.9;   // hour-to-hour, in log space
  double missing_rate = 0.02;     // hourly rows dropped to exercise the annual fallback
};

/// Shape of the net-cost service economy of random fleets.
struct EconomyShape {
  int acyclic_depth = 2;  // length of the provider -> provider chain
  bool cyclic = false;    // last provider in the chain also serves the first
  double non_service_scale = 2.1;  // provider's non-service cost, up to this times its revenue
};

struct ScenarioSpec {
  std::uint64_t seed = 42;
  std::optional<Preset> preset;
  int machine_count = 40;
  int user_count = 8;
  int hours = 24;
  int cluster_count = 0;  // 0: one cluster per 250 machines
  Hour start{};           // defaults to 2023-09-18T00:00Z, see default_start()
  double diurnal_amplitude = 0.3;
  double idle_fraction = 0.45;  // of peak power
  EconomyShape economy{};
  IntensitySpec intensity{};
  int figure1_machines = 1;  // figure1 variant: split the aggregate machine into N
  bool with_billing = true;

  static Hour default_start();
};

/// Throws ConfigError for contradictory specs.
void validate_spec(const ScenarioSpec& spec);

/// Deterministic in `spec`. Presets ignore the seed and the size fields.
InputBundle generate(const ScenarioSpec& spec);

struct IntensityTables {
  std::vector<CarbonIntensityRecord> hourly;
  std::vector<AnnualIntensityRecord> annual;  // calendar-year means of the generated series
};

/// Seeded lognormal-marginal hourly series per zone, AR(1) in log space.
/// Throws ConfigError for a negative mean or std.
IntensityTables intensity_feed(const IntensitySpec& spec, std::uint64_t seed, std::span<const ZoneId> zones,
                               Hour start, int hours);

/// Writes the bundle plus manifest.json (seed, preset, schema version,
/// generator algorithm, SHA-256 of each table).
void write_scenario(const std::filesystem::path& dir, const ScenarioSpec& spec, const InputBundle& bundle);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace carbonalloc::sim
