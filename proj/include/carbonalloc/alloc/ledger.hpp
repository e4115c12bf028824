#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "carbonalloc/core/ids.hpp"
#include "carbonalloc/core/time.hpp"

namespace carbonalloc::alloc {

enum class StageKind { Machine, AfterMajorRealloc, AfterMinorRound };

struct Stage {
  StageKind kind = StageKind::Machine;
  int round = 0;  // 1-based, minor rounds only

  static Stage machine() { return {StageKind::Machine, 0}; }
  static Stage after_major() { return {StageKind::AfterMajorRealloc, 0}; }
  static Stage after_minor(int round) { return {StageKind::AfterMinorRound, round}; }
  std::string label() const;
  bool operator==(const Stage&) const = default;
};

struct LedgerKey {
  ClusterId cluster;
  Hour hour;
  UserId user;

  friend auto operator<=>(const LedgerKey&, const LedgerKey&) = default;
};

struct LedgerKeyHash {
  std::size_t operator()(const LedgerKey& k) const noexcept {
    std::size_t seed = k.user.value;
    hash_combine(seed, k.cluster.value);
    hash_combine(seed, std::hash<std::int64_t>{}(k.hour.value));
    return seed;
  }
};

/// Energy (Wh) attributed to one user in one cluster-hour. `idle_wh` and
/// `dynamic_wh` track the origin of the energy; reallocation moves both.
struct LedgerEntry {
  LedgerKey key;
  double idle_wh = 0.0;
  double dynamic_wh = 0.0;

  double total_wh() const { return idle_wh + dynamic_wh; }
};

/// Per (user, cluster, hour) energy at one pipeline stage. Entries are sorted
/// by (cluster, hour, user) and unique.
class UserEnergyLedger {
 public:
  UserEnergyLedger() = default;
  UserEnergyLedger(Stage stage, std::vector<LedgerEntry> entries);

  Stage stage() const { return stage_; }
  const std::vector<LedgerEntry>& entries() const { return entries_; }
  const LedgerEntry* find(const LedgerKey& key) const;
  double total_wh() const;

 private:
  Stage stage_{};
  std::vector<LedgerEntry> entries_;
};

/// Keyed accumulator that produces a sorted ledger.
class LedgerBuilder {
 public:
  void reserve(std::size_t n) { cells_.reserve(n); }
  void add(const LedgerKey& key, double idle_wh, double dynamic_wh);
  UserEnergyLedger finish(Stage stage) &&;

 private:
  std::unordered_map<LedgerKey, std::pair<double, double>, LedgerKeyHash> cells_;
};

/// Entry-wise sum of two ledgers.
UserEnergyLedger merge(const UserEnergyLedger& a, const UserEnergyLedger& b, Stage stage);

}  // namespace carbonalloc::alloc
