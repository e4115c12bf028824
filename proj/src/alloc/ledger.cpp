#include "carbonalloc/alloc/ledger.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace carbonalloc::alloc {

std::string Stage::label() const {
  switch (kind) {
    case StageKind::Machine:
      return "machine_allocation";
    case StageKind::AfterMajorRealloc:
      return "after_major_realloc";
    case StageKind::AfterMinorRound:
      return fmt::format("after_minor_round_{}", round);
  }
  return "unknown";
}

UserEnergyLedger::UserEnergyLedger(Stage stage, std::vector<LedgerEntry> entries)
    : stage_(stage), entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(),
            [](const LedgerEntry& a, const LedgerEntry& b) { return a.key < b.key; });
}

const LedgerEntry* UserEnergyLedger::find(const LedgerKey& key) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), key,
                             [](const LedgerEntry& e, const LedgerKey& k) { return e.key < k; });
  return (it != entries_.end() && it->key == key) ? &*it : nullptr;
}

double UserEnergyLedger::total_wh() const {
  double total = 0.0;
  for (const auto& e : entries_) total += e.total_wh();
  return total;
}

void LedgerBuilder::add(const LedgerKey& key, double idle_wh, double dynamic_wh) {
  auto& cell = cells_[key];
  cell.first += idle_wh;
  cell.second += dynamic_wh;
}

UserEnergyLedger LedgerBuilder::finish(Stage stage) && {
  std::vector<LedgerEntry> entries;
  entries.reserve(cells_.size());
  for (const auto& [key, v] : cells_) entries.push_back({key, v.first, v.second});
  cells_.clear();
  return UserEnergyLedger(stage, std::move(entries));
}

UserEnergyLedger merge(const UserEnergyLedger& a, const UserEnergyLedger& b, Stage stage) {
  std::vector<LedgerEntry> out;
  out.reserve(a.entries().size() + b.entries().size());
  auto ia = a.entries().begin();
  auto ib = b.entries().begin();
  while (ia != a.entries().end() || ib != b.entries().end()) {
    if (ib == b.entries().end() || (ia != a.entries().end() && ia->key < ib->key)) {
      out.push_back(*ia++);
    } else if (ia == a.entries().end() || ib->key < ia->key) {
      out.push_back(*ib++);
    } else {
      out.push_back({ia->key, ia->idle_wh + ib->idle_wh, ia->dynamic_wh + ib->dynamic_wh});
      ++ia;
      ++ib;
    }
  }
  return UserEnergyLedger(stage, std::move(out));
}

}  // namespace carbonalloc::alloc
