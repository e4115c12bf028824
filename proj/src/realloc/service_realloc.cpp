#include "carbonalloc/realloc/service_realloc.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace carbonalloc::realloc {

using alloc::LedgerBuilder;
using alloc::LedgerKey;
using alloc::Stage;
using alloc::StageKind;
using alloc::UserEnergyLedger;

namespace {

int stage_order(Stage s) {
  switch (s.kind) {
    case StageKind::Machine:
      return 0;
    case StageKind::AfterMajorRealloc:
      return 1;
    case StageKind::AfterMinorRound:
      return 1 + s.round;
  }
  return 0;
}

Stage stage_from_order(int order) {
  if (order == 0) return Stage::machine();
  if (order == 1) return Stage::after_major();
  return Stage::after_minor(order - 1);
}

constexpr double kResidue = 1e-12;

double colossus_weight(const ResourceVector& u, const ResourceWeights& w) {
  return w.hdd_per_tib * u.hdd_tib + w.ssd_per_tib * u.ssd_tib + w.gcu * u.gcu;
}

}  // namespace

void FlowLog::add(Stage stage, UserId from, UserId to, double wh) {
  if (wh == 0.0) return;
  cells_[{stage_order(stage), from.value, to.value}] += wh;
}

double FlowLog::moved_wh(Stage stage) const {
  const int order = stage_order(stage);
  double total = 0.0;
  for (auto it = cells_.lower_bound({order, 0, 0}); it != cells_.end() && it->first.stage_order == order; ++it) {
    total += it->second;
  }
  return total;
}

std::vector<FlowLog::Edge> FlowLog::edges() const {
  std::vector<Edge> out;
  out.reserve(cells_.size());
  for (const auto& [k, wh] : cells_) {
    out.push_back({stage_from_order(k.stage_order), UserId{k.from}, UserId{k.to}, wh});
  }
  return out;
}

ProviderGcuTotals::ProviderGcuTotals(std::span<const GcuUsageRecord> usage, const MachineDirectory& machines) {
  for (const auto& u : usage) {
    const MachineRecord* m = machines.find(u.machine);
    if (m == nullptr || !(u.gcu_used > 0)) continue;
    totals_[{m->cluster, u.hour, u.user}] += u.gcu_used;
  }
}

double ProviderGcuTotals::get(UserId user, ClusterId cluster, Hour hour) const {
  auto it = totals_.find({cluster, hour, user});
  return it == totals_.end() ? 0.0 : it->second;
}

ServiceUsageIndex::ServiceUsageIndex(std::span<const ServiceUsageRecord> records) {
  std::map<LedgerKey, std::pair<std::map<UserId, ResourceVector>, bool>> raw;
  for (const auto& r : records) {
    if (r.consumer == r.provider) continue;  // flagged by validation
    auto& cell = raw[{r.cluster, r.hour, r.provider}];
    cell.first[r.consumer] += r.usage;
    cell.second = cell.second || r.colossus_style;
  }
  groups_.reserve(raw.size());
  for (auto& [key, cell] : raw) {
    Group g{key.user, key.cluster, key.hour, {}, cell.second};
    g.consumers.assign(cell.first.begin(), cell.first.end());
    index_.emplace(key, groups_.size());
    groups_.push_back(std::move(g));
  }
}

const ServiceUsageIndex::Group* ServiceUsageIndex::find(UserId provider, ClusterId cluster, Hour hour) const {
  auto it = index_.find({cluster, hour, provider});
  return it == index_.end() ? nullptr : &groups_[it->second];
}

std::optional<double> major_fraction(UserId consumer, UserId provider, ClusterId cluster, Hour hour,
                                     const ServiceUsageIndex& usage, const ProviderGcuTotals& totals) {
  double mine = 0.0;
  double consumers = 0.0;
  if (const auto* g = usage.find(provider, cluster, hour)) {
    for (const auto& [user, u] : g->consumers) {
      consumers += u.gcu;
      if (user == consumer) mine = u.gcu;
    }
  }
  const double denominator = std::max(totals.get(provider, cluster, hour), consumers);
  if (!(denominator > 0)) return std::nullopt;
  return mine / denominator;
}

std::optional<double> colossus_fraction(UserId consumer, UserId provider, ClusterId cluster, Hour hour,
                                        const ServiceUsageIndex& usage, const ResourceWeights& usage_weights) {
  const auto* g = usage.find(provider, cluster, hour);
  if (g == nullptr) return std::nullopt;
  double mine = 0.0;
  double total = 0.0;
  for (const auto& [user, u] : g->consumers) {
    const double w = colossus_weight(u, usage_weights);
    total += w;
    if (user == consumer) mine = w;
  }
  if (!(total > 0)) return std::nullopt;
  return mine / total;
}

UserEnergyLedger apply_major_realloc(const UserEnergyLedger& machine_stage, const ServiceUsageIndex& usage,
                                     const ProviderGcuTotals& totals, const PowerWeighting& weights,
                                     FlowLog* flows) {
  struct Move {
    LedgerKey to;
    double wh;
  };
  std::unordered_map<LedgerKey, double, alloc::LedgerKeyHash> outgoing;
  std::vector<Move> moves;

  for (const auto& g : usage.groups()) {
    const auto* provider_entry = machine_stage.find({g.cluster, g.hour, g.provider});
    if (provider_entry == nullptr || !(provider_entry->dynamic_wh > 0)) continue;
    const double dynamic = provider_entry->dynamic_wh;
    for (const auto& [consumer, _] : g.consumers) {
      const auto gamma = g.colossus_style
                             ? colossus_fraction(consumer, g.provider, g.cluster, g.hour, usage, weights.usage)
                             : major_fraction(consumer, g.provider, g.cluster, g.hour, usage, totals);
      if (!gamma || !(*gamma > 0)) continue;
      const double wh = *gamma * dynamic;
      moves.push_back({{g.cluster, g.hour, consumer}, wh});
      outgoing[provider_entry->key] += wh;
      if (flows) flows->add(Stage::after_major(), g.provider, consumer, wh);
    }
  }

  LedgerBuilder out;
  out.reserve(machine_stage.entries().size() + moves.size());
  for (const auto& e : machine_stage.entries()) {
    double dynamic = e.dynamic_wh;
    if (auto it = outgoing.find(e.key); it != outgoing.end()) {
      // A fully consumed provider leaves rounding residue, not energy.
      const double left = dynamic - it->second;
      dynamic = left > kResidue * dynamic ? left : 0.0;
    }
    out.add(e.key, e.idle_wh, dynamic);
  }
  for (const auto& m : moves) out.add(m.to, 0.0, m.wh);
  return std::move(out).finish(Stage::after_major());
}

double UserCostSummary::clamped_denominator(double service_net_cost) const {
  return std::max(std::abs(service_net_cost), total_cost);
}

std::optional<UserId> identify_provider(ServiceId service, std::span<const NetCostRecord> day_records,
                                        const Names& names, Diagnostics& diag) {
  std::map<UserId, double> per_user;
  for (const auto& r : day_records) {
    if (r.service == service) per_user[r.user] += r.net_cost;
  }
  if (per_user.empty()) return std::nullopt;
  double lowest = per_user.begin()->second;
  for (const auto& [_, v] : per_user) lowest = std::min(lowest, v);
  std::vector<UserId> tied;
  for (const auto& [u, v] : per_user) {
    if (v == lowest) tied.push_back(u);
  }
  const std::string day = day_records.empty() ? std::string{} : format_day(day_records.front().day);
  if (!(lowest < 0)) {
    diag.warn("provider_ambiguous", fmt::format("service {} on {}: no user receives revenue; skipped",
                                                names.services.name(service), day));
    return std::nullopt;
  }
  auto by_name = [&](UserId a, UserId b) { return names.users.name(a) < names.users.name(b); };
  std::sort(tied.begin(), tied.end(), by_name);
  if (tied.size() > 1) {
    diag.warn("provider_tie", fmt::format("service {} on {}: {} users tie for lowest net cost; chose {}",
                                          names.services.name(service), day, tied.size(),
                                          names.users.name(tied.front())));
  }
  return tied.front();
}

std::optional<double> minor_fraction(double consumer_net_cost, double provider_service_net_cost,
                                     const UserCostSummary& provider) {
  const double denominator = provider.clamped_denominator(provider_service_net_cost);
  if (!(denominator > 0)) return std::nullopt;
  return consumer_net_cost / denominator;
}

MinorTransferPlan MinorTransferPlan::build(std::span<const NetCostRecord> net_costs,
                                           std::span<const NonServiceCostRecord> non_service_costs,
                                           const Names& names, Diagnostics& diag) {
  // day -> records, kept in input order
  std::map<std::int64_t, std::vector<NetCostRecord>> by_day;
  for (const auto& r : net_costs) by_day[r.day.value].push_back(r);
  std::map<std::pair<std::int64_t, UserId>, double> non_service;
  for (const auto& r : non_service_costs) non_service[{r.day.value, r.user}] += r.cost;

  MinorTransferPlan plan;
  for (const auto& [day, records] : by_day) {
    std::map<UserId, double> total_cost;
    std::map<ServiceId, std::map<UserId, double>> per_service;
    for (const auto& r : records) {
      total_cost[r.user] += r.net_cost;
      per_service[r.service][r.user] += r.net_cost;
    }
    for (auto& [user, tc] : total_cost) {
      if (auto it = non_service.find({day, user}); it != non_service.end()) tc += it->second;
    }

    std::map<UserId, std::map<UserId, double>> fractions;  // provider -> consumer -> fraction
    for (const auto& [service, costs] : per_service) {
      const auto provider = identify_provider(service, records, names, diag);
      if (!provider) continue;
      const double provider_cost = costs.at(*provider);
      UserCostSummary summary{*provider, 0.0, total_cost[*provider]};
      if (auto it = non_service.find({day, *provider}); it != non_service.end()) {
        summary.non_service_cost = it->second;
      }
      for (const auto& [consumer, cost] : costs) {
        if (consumer == *provider) continue;
        double n = cost;
        if (n < 0) {
          diag.warn("negative_consumer_cost",
                    fmt::format("service {} on {}: consumer {} has net cost {}; clamped to 0",
                                names.services.name(service), format_day(Day{day}),
                                names.users.name(consumer), n));
          n = 0.0;
        }
        const auto f = minor_fraction(n, provider_cost, summary);
        if (!f) {
          diag.warn("zero_cost_denominator",
                    fmt::format("service {} on {}: provider {} has zero clamped total cost; skipped",
                                names.services.name(service), format_day(Day{day}),
                                names.users.name(*provider)));
          break;
        }
        if (*f > 0) fractions[*provider][consumer] += *f;
      }
    }

    for (auto& [provider, per_consumer] : fractions) {
      double sum = 0.0;
      for (const auto& [_, f] : per_consumer) sum += f;
      const double scale = sum > 1.0 ? 1.0 / sum : 1.0;
      if (sum > 1.0 + 1e-9) {
        diag.warn("provider_oversubscribed",
                  fmt::format("provider {} on {}: net-cost fractions sum to {}; scaled to 1",
                              names.users.name(provider), format_day(Day{day}), sum));
      }
      auto& transfers = plan.plan_[{day, provider.value}];
      for (const auto& [consumer, f] : per_consumer) transfers.push_back({consumer, f * scale});
    }
  }
  return plan;
}

const std::vector<MinorTransferPlan::Transfer>* MinorTransferPlan::find(Day day, UserId provider) const {
  auto it = plan_.find({day.value, provider.value});
  return it == plan_.end() ? nullptr : &it->second;
}

UserEnergyLedger apply_minor_realloc_round(const UserEnergyLedger& input, const MinorTransferPlan& plan,
                                           Stage next, FlowLog* flows) {
  LedgerBuilder out;
  out.reserve(input.entries().size() * 2);
  for (const auto& e : input.entries()) {
    const auto* transfers = plan.find(day_of(e.key.hour), e.key.user);
    if (transfers == nullptr) {
      out.add(e.key, e.idle_wh, e.dynamic_wh);
      continue;
    }
    double moved = 0.0;
    for (const auto& t : *transfers) {
      moved += t.fraction;
      out.add({e.key.cluster, e.key.hour, t.consumer}, e.idle_wh * t.fraction, e.dynamic_wh * t.fraction);
      if (flows) flows->add(next, e.key.user, t.consumer, e.total_wh() * t.fraction);
    }
    const double kept = std::max(0.0, 1.0 - moved);
    out.add(e.key, e.idle_wh * kept, e.dynamic_wh * kept);
  }
  return std::move(out).finish(next);
}

}  // namespace carbonalloc::realloc
