#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "carbonalloc/core/model.hpp"

// Brute-force reference implementation. It deliberately shares nothing with
// the allocation pipeline except the core model types: every step is
// recomputed per cluster-hour with dense user x user transfer matrices.
namespace carbonalloc::oracle {

inline constexpr std::size_t kMaxMachines = 200;
inline constexpr std::size_t kMaxUsers = 20;
inline constexpr std::size_t kMaxHours = 72;

class OracleLimitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OracleConfig {
  PowerWeighting weights{};
  int minor_rounds = 2;
  double default_pue = 1.10;
  bool allow_missing_intensity = false;
  double default_g_per_kwh = 320.8;
};

/// (cluster, hour, user) as raw ids.
using EnergyKey = std::tuple<std::uint32_t, std::int64_t, std::uint32_t>;
/// (month, account, product, region).
using FootprintKey = std::tuple<std::int32_t, std::uint32_t, std::uint32_t, std::uint32_t>;

struct EnergyCell {
  double idle_wh = 0.0;
  double dynamic_wh = 0.0;
};

struct OracleResult {
  /// [0] machine stage, [1] after major services, then one per net-cost round.
  std::vector<std::map<EnergyKey, EnergyCell>> stages;
  std::vector<double> moved_wh;  // energy moved into each stage (0 for the machine stage)
  std::map<EnergyKey, double> emissions_kg;
  std::map<FootprintKey, double> footprint_kg;
  std::map<std::int32_t, double> beta;
};

/// Throws OracleLimitError when the bundle exceeds the size limits, plus the
/// same MissingIntensityError / BetaUndefinedError as the main path.
OracleResult oracle_allocate(const InputBundle& bundle, const OracleConfig& config);

}  // namespace carbonalloc::oracle
