#include "carbonalloc/report/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "carbonalloc/core/errors.hpp"
#include "carbonalloc/io/csv.hpp"

namespace carbonalloc::report {
namespace {

namespace fs = std::filesystem;
using alloc::LedgerKey;

/// Position of every id in name order, so reports sort by the names users see.
template <class Tag>
std::vector<std::uint32_t> name_rank(const TypedSymbols<Tag>& symbols) {
  std::vector<std::uint32_t> order(symbols.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return symbols.name(Id<Tag>{a}) < symbols.name(Id<Tag>{b});
  });
  std::vector<std::uint32_t> rank(symbols.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) rank[order[i]] = i;
  return rank;
}

struct KeyOrder {
  std::vector<std::uint32_t> cluster;
  std::vector<std::uint32_t> user;

  explicit KeyOrder(const Names& n) : cluster(name_rank(n.clusters)), user(name_rank(n.users)) {}
  bool operator()(const LedgerKey& a, const LedgerKey& b) const {
    return std::tuple(cluster[a.cluster.value], a.hour, user[a.user.value]) <
           std::tuple(cluster[b.cluster.value], b.hour, user[b.user.value]);
  }
};

std::string ledger_key_text(const Names& n, const LedgerKey& k) {
  return fmt::format("{}|{}|{}", n.clusters.name(k.cluster), format_hour(k.hour), n.users.name(k.user));
}

ClosureCheck make_check(std::string check, std::string key, double expected, double actual, double worst_rel,
                        double tolerance) {
  return {std::move(check), std::move(key), expected, actual, worst_rel, worst_rel <= tolerance};
}

bool valid_currency(const std::string& c) {
  return c.size() == 3 && std::all_of(c.begin(), c.end(), [](char ch) { return ch >= 'A' && ch <= 'Z'; });
}

}  // namespace

void validate_config(const RunConfig& c) {
  if (c.rounds < 1) throw ConfigError(fmt::format("rounds must be at least 1, got {}", c.rounds));
  if (c.oracle_rounds < 1) throw ConfigError("oracle rounds must be at least 1");
  if (c.from && c.to && !(*c.from < *c.to)) {
    throw ConfigError(fmt::format("empty date range [{}, {})", format_hour(*c.from), format_hour(*c.to)));
  }
  if (!(c.default_pue >= 1.0)) throw ConfigError(fmt::format("default PUE must be >= 1, got {}", c.default_pue));
  if (!(c.default_g_per_kwh >= 0)) throw ConfigError("default carbon intensity must be non-negative");
  if (!valid_currency(c.currency)) throw ConfigError(fmt::format("'{}' is not an ISO 4217 code", c.currency));
  if (c.energy_decimals < 0 || c.carbon_decimals < 0) throw ConfigError("decimals must be non-negative");
}

double relative_deviation(double a, double b, double floor) {
  const double scale = std::max({std::abs(a), std::abs(b), floor});
  if (scale == 0.0) return 0.0;
  return std::abs(a - b) / scale;
}

bool RunOutputs::closures_pass() const {
  return std::all_of(closures.begin(), closures.end(), [](const ClosureCheck& c) { return c.pass; });
}

RunOutputs execute_run(const InputBundle& bundle, const RunConfig& config) {
  validate_config(config);
  RunOutputs run;
  run.pipeline = realloc::run_allocation_pipeline(bundle, {config.weights, config.rounds});

  const ClusterTopology topology = bundle.topology();
  const carbon::PueTable pue(bundle.pue);
  const carbon::IntensityResolver intensity(topology, bundle.carbon_intensity, bundle.annual_intensity,
                                            bundle.names);
  carbon::CarbonConfig cc;
  cc.default_pue = config.default_pue;
  cc.allow_missing_intensity = config.allow_missing_intensity;
  cc.default_g_per_kwh = config.default_g_per_kwh;
  run.emissions = carbon::compute_emissions(run.pipeline.final_ledger(), pue, intensity, cc, run.diagnostics);
  run.footprint = footprint::compute_customer_footprints(bundle, run.emissions, run.diagnostics);
  run.closures = closure_checks(bundle, run, config.tolerance);
  return run;
}

std::vector<ClosureCheck> closure_checks(const InputBundle& bundle, const RunOutputs& run, double tolerance) {
  const Names& n = bundle.names;
  std::vector<ClosureCheck> out;

  // Measured energy per cluster-hour.
  std::map<std::pair<std::uint32_t, std::int64_t>, double> measured;
  double measured_total = 0.0;
  for (const auto& cp : run.pipeline.cluster_power) {
    measured[{cp.cluster.value, cp.hour.value}] = cp.measured_watts;
    measured_total += cp.measured_watts;
  }

  for (const auto& stage : run.pipeline.stages) {
    std::map<std::pair<std::uint32_t, std::int64_t>, double> sums;
    double negative = 0.0;
    for (const auto& e : stage.entries()) {
      sums[{e.key.cluster.value, e.key.hour.value}] += e.total_wh();
      negative = std::min({negative, e.idle_wh, e.dynamic_wh});
    }
    double worst = 0.0;
    std::string worst_key = "all";
    auto consider = [&](std::pair<std::uint32_t, std::int64_t> key, double expected, double actual) {
      const double rel = relative_deviation(expected, actual);
      if (rel > worst) {
        worst = rel;
        worst_key = fmt::format("{}|{}", n.clusters.name(ClusterId{key.first}), format_hour(Hour{key.second}));
      }
    };
    for (const auto& [key, m] : measured) {
      auto it = sums.find(key);
      consider(key, m, it == sums.end() ? 0.0 : it->second);
    }
    for (const auto& [key, s] : sums) {
      if (!measured.contains(key)) consider(key, 0.0, s);
    }
    out.push_back(make_check("energy_conservation", stage.stage().label() + "@" + worst_key, measured_total,
                             stage.total_wh(), worst, tolerance));
    const double neg_rel = negative < 0 ? (measured_total > 0 ? -negative / measured_total : 1.0) : 0.0;
    out.push_back(make_check("non_negative_energy", stage.stage().label(), 0.0, negative, neg_rel, tolerance));
  }

  // Fleet carbon: emissions against measured energy x PUE x intensity.
  {
    std::map<std::pair<std::uint32_t, std::int64_t>, std::pair<double, double>> factors;
    double actual = 0.0;
    for (const auto& e : run.emissions) {
      factors.emplace(std::pair{e.cluster.value, e.hour.value}, std::pair{e.pue, e.g_per_kwh});
      actual += e.kg_co2e;
    }
    double expected = 0.0;
    for (const auto& [key, m] : measured) {
      auto it = factors.find(key);
      if (it != factors.end()) expected += carbon::emission_kg(m, it->second.first, it->second.second);
    }
    out.push_back(make_check("carbon_closure", "fleet", expected, actual, relative_deviation(expected, actual),
                             tolerance));
  }

  for (const auto& month : run.footprint.months) {
    const std::string m = format_month(month.month);
    for (const auto& p : month.providers) {
      if (!p.billable) continue;
      const std::string key = m + "|" + n.users.name(p.provider);
      out.push_back(make_check("sku_energy", key, p.energy_wh, p.rated_energy_wh,
                               relative_deviation(p.energy_wh, p.rated_energy_wh), tolerance));
      out.push_back(make_check("sku_carbon", key, p.kg_co2e, p.sku_carbon_kg,
                               relative_deviation(p.kg_co2e, p.sku_carbon_kg), tolerance));
    }
    out.push_back(make_check("footprint_total", m, month.cloud_kg, month.allocated_kg,
                             relative_deviation(month.cloud_kg, month.allocated_kg), tolerance));
  }
  return out;
}

void write_validation_report(const fs::path& dir, const ValidationReport& report) {
  fs::create_directories(dir);
  constexpr std::string_view header[] = {"kind", "entity", "detail"};
  io::CsvWriter w(dir / "validation_report.csv", header);
  for (const auto& v : report) {
    w.field(v.kind).field(v.entity).field(v.detail);
    w.end_row();
  }
}

void write_reports(const fs::path& dir, const InputBundle& bundle, const RunOutputs& run, const RunConfig& config) {
  fs::create_directories(dir);
  const Names& n = bundle.names;
  const KeyOrder order(n);
  const int ed = config.energy_decimals;
  const int cd = config.carbon_decimals;
  const auto& stages = run.pipeline.stages;

  // user_energy.csv: one row per key seen at any stage, one column per stage.
  {
    std::vector<LedgerKey> keys;
    for (const auto& s : stages) {
      for (const auto& e : s.entries()) keys.push_back(e.key);
    }
    std::sort(keys.begin(), keys.end(), order);
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

    std::vector<std::string> names = {"cluster_id", "hour_utc", "user"};
    for (const auto& s : stages) names.push_back(s.stage().label() + "_wh");
    names.push_back("final_idle_wh");
    names.push_back("final_dynamic_wh");
    std::vector<std::string_view> header(names.begin(), names.end());
    io::CsvWriter w(dir / "user_energy.csv", header);
    for (const auto& k : keys) {
      w.field(n.clusters.name(k.cluster)).field(format_hour(k.hour)).field(n.users.name(k.user));
      const alloc::LedgerEntry* last = nullptr;
      for (const auto& s : stages) {
        last = s.find(k);
        w.field(last ? last->total_wh() : 0.0, ed);
      }
      w.field(last ? last->idle_wh : 0.0, ed).field(last ? last->dynamic_wh : 0.0, ed);
      w.end_row();
    }
  }

  {
    std::vector<const carbon::EmissionRecord*> rows;
    rows.reserve(run.emissions.size());
    for (const auto& e : run.emissions) rows.push_back(&e);
    std::sort(rows.begin(), rows.end(), [&](const auto* a, const auto* b) {
      return order({a->cluster, a->hour, a->user}, {b->cluster, b->hour, b->user});
    });
    constexpr std::string_view header[] = {"cluster_id",      "hour_utc",  "user",    "energy_it_wh",
                                           "pue",             "energy_total_wh", "g_per_kwh", "kg_co2e",
                                           "intensity_source", "pue_source"};
    io::CsvWriter w(dir / "emissions.csv", header);
    for (const auto* e : rows) {
      w.field(n.clusters.name(e->cluster)).field(format_hour(e->hour)).field(n.users.name(e->user));
      w.field(e->energy_it_wh, ed).field(e->pue, 4).field(e->energy_total_wh, ed).field(e->g_per_kwh, 3);
      w.field(e->kg_co2e, cd).field(carbon::to_string(e->intensity_source)).field(carbon::to_string(e->pue_source));
      w.end_row();
    }
  }

  {
    auto rows = run.footprint.rows;
    std::sort(rows.begin(), rows.end(), [&](const auto& a, const auto& b) {
      return std::tuple(a.month, n.accounts.name(a.account), n.products.name(a.product), n.regions.name(a.region)) <
             std::tuple(b.month, n.accounts.name(b.account), n.products.name(b.product), n.regions.name(b.region));
    });
    constexpr std::string_view header[] = {"month", "billing_account", "product_id", "region_id", "kg_co2e", "beta"};
    io::CsvWriter w(dir / "footprint_report.csv", header);
    for (const auto& r : rows) {
      w.field(format_month(r.month)).field(n.accounts.name(r.account)).field(n.products.name(r.product));
      w.field(n.regions.name(r.region)).field(r.kg_co2e, cd).field(r.beta, 9);
      w.end_row();
    }
  }

  {
    constexpr std::string_view months_header[] = {"month", "cloud_kg", "billed_kg", "beta", "allocated_kg"};
    io::CsvWriter months(dir / "footprint_months.csv", months_header);
    constexpr std::string_view providers_header[] = {"month",           "provider",      "energy_wh", "kg_co2e",
                                                     "alpha",           "rated_energy_wh", "sku_carbon_kg",
                                                     "billable"};
    io::CsvWriter providers(dir / "footprint_providers.csv", providers_header);
    const auto user_rank = name_rank(n.users);
    for (const auto& m : run.footprint.months) {
      months.field(format_month(m.month)).field(m.cloud_kg, cd).field(m.billed_kg, cd).field(m.beta, 9);
      months.field(m.allocated_kg, cd);
      months.end_row();
      auto ps = m.providers;
      std::sort(ps.begin(), ps.end(),
                [&](const auto& a, const auto& b) { return user_rank[a.provider.value] < user_rank[b.provider.value]; });
      for (const auto& p : ps) {
        providers.field(format_month(m.month)).field(n.users.name(p.provider)).field(p.energy_wh, ed);
        providers.field(p.kg_co2e, cd);
        if (p.balance) {
          providers.field(p.balance->alpha, 9);
        } else {
          providers.field(std::string_view{});
        }
        providers.field(p.rated_energy_wh, ed).field(p.sku_carbon_kg, cd).field(p.billable ? "true" : "false");
        providers.end_row();
      }
    }
  }

  {
    constexpr std::string_view header[] = {"stage", "total_wh", "moved_wh"};
    io::CsvWriter w(dir / "flow_summary.csv", header);
    w.field("measured").field(run.pipeline.measured_total_wh(), ed).field(0.0, ed);
    w.end_row();
    for (const auto& s : stages) {
      w.field(s.stage().label()).field(s.total_wh(), ed).field(run.pipeline.flows.moved_wh(s.stage()), ed);
      w.end_row();
    }
    double facility = 0.0;
    for (const auto& e : run.emissions) facility += e.energy_total_wh;
    w.field("facility_with_pue").field(facility, ed).field(0.0, ed);
    w.end_row();
  }

  {
    auto edges = run.pipeline.flows.edges();
    const auto user_rank = name_rank(n.users);
    std::stable_sort(edges.begin(), edges.end(), [&](const auto& a, const auto& b) {
      const auto sa = a.stage.kind == alloc::StageKind::AfterMajorRealloc ? 0 : a.stage.round;
      const auto sb = b.stage.kind == alloc::StageKind::AfterMajorRealloc ? 0 : b.stage.round;
      return std::tuple(sa, user_rank[a.from.value], user_rank[a.to.value]) <
             std::tuple(sb, user_rank[b.from.value], user_rank[b.to.value]);
    });
    constexpr std::string_view header[] = {"stage", "from_user", "to_user", "wh"};
    io::CsvWriter w(dir / "flow_edges.csv", header);
    for (const auto& e : edges) {
      w.field(e.stage.label()).field(n.users.name(e.from)).field(n.users.name(e.to)).field(e.wh, ed);
      w.end_row();
    }
  }

  {
    constexpr std::string_view header[] = {"check", "key", "expected", "actual", "rel_error", "status"};
    io::CsvWriter w(dir / "closure_report.csv", header);
    for (const auto& c : run.closures) {
      w.field(c.check).field(c.key).field(c.expected).field(c.actual).field(c.rel_error);
      w.field(c.pass ? "pass" : "fail");
      w.end_row();
    }
  }

  {
    constexpr std::string_view header[] = {"stage", "code", "message"};
    io::CsvWriter w(dir / "diagnostics.csv", header);
    for (const auto& d : run.pipeline.diagnostics.entries()) {
      w.field("allocation").field(d.code).field(d.message);
      w.end_row();
    }
    for (const auto& d : run.diagnostics.entries()) {
      w.field("carbon").field(d.code).field(d.message);
      w.end_row();
    }
  }

  {
    nlohmann::ordered_json j;
    j["input"] = config.input.string();
    j["from"] = config.from ? nlohmann::ordered_json(format_hour(*config.from)) : nlohmann::ordered_json();
    j["to"] = config.to ? nlohmann::ordered_json(format_hour(*config.to)) : nlohmann::ordered_json();
    j["rounds"] = config.rounds;
    j["default_pue"] = config.default_pue;
    j["allow_missing_intensity"] = config.allow_missing_intensity;
    j["default_g_per_kwh"] = config.default_g_per_kwh;
    j["currency"] = config.currency;
    j["energy_decimals"] = config.energy_decimals;
    j["carbon_decimals"] = config.carbon_decimals;
    const auto& busy = config.weights.busy;
    const auto& usage = config.weights.usage;
    j["busy_weights"] = {busy.gcu, busy.ram_per_gib, busy.ssd_per_tib, busy.hdd_per_tib};
    j["usage_weights"] = {usage.gcu, usage.ram_per_gib, usage.ssd_per_tib, usage.hdd_per_tib};
    std::ofstream f(dir / "run_config.json");
    f << j.dump(2) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Oracle comparison

namespace {

class TableDiff {
 public:
  explicit TableDiff(std::string name) : name_(std::move(name)) {}

  void pipeline(const std::string& key, double v) { cells_[key].first += v; }
  void oracle(const std::string& key, double v) { cells_[key].second += v; }

  void finish(OracleComparison& out) const {
    double largest = 0.0;
    for (const auto& [_, c] : cells_) largest = std::max({largest, std::abs(c.first), std::abs(c.second)});
    const double floor = 1e-6 * largest;
    std::vector<DiffRow> rows;
    TableSummary summary{name_, cells_.size(), 0.0, ""};
    for (const auto& [key, c] : cells_) {
      const double dev = relative_deviation(c.first, c.second, floor);
      if (dev > summary.max_rel_dev) {
        summary.max_rel_dev = dev;
        summary.worst_key = key;
      }
      if (dev > 0) rows.push_back({name_, key, c.first, c.second, dev});
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
      return std::tie(b.rel_dev, a.key) < std::tie(a.rel_dev, b.key);
    });
    if (rows.size() > 20) rows.resize(20);
    out.tables.push_back(std::move(summary));
    out.worst.insert(out.worst.end(), rows.begin(), rows.end());
  }

 private:
  std::string name_;
  std::map<std::string, std::pair<double, double>> cells_;
};

std::string energy_key_text(const Names& n, const oracle::EnergyKey& k) {
  return ledger_key_text(n, {ClusterId{std::get<0>(k)}, Hour{std::get<1>(k)}, UserId{std::get<2>(k)}});
}

void diff_stage(const Names& n, const alloc::UserEnergyLedger& mine,
                const std::map<oracle::EnergyKey, oracle::EnergyCell>& theirs, const std::string& label,
                OracleComparison& out) {
  TableDiff idle("user_energy_idle/" + label);
  TableDiff dynamic("user_energy_dynamic/" + label);
  for (const auto& e : mine.entries()) {
    const auto key = ledger_key_text(n, e.key);
    idle.pipeline(key, e.idle_wh);
    dynamic.pipeline(key, e.dynamic_wh);
  }
  for (const auto& [k, c] : theirs) {
    const auto key = energy_key_text(n, k);
    idle.oracle(key, c.idle_wh);
    dynamic.oracle(key, c.dynamic_wh);
  }
  idle.finish(out);
  dynamic.finish(out);
}

}  // namespace

double OracleComparison::max_rel_dev() const {
  double m = 0.0;
  for (const auto& t : tables) m = std::max(m, t.max_rel_dev);
  return m;
}

oracle::OracleConfig oracle_config(const RunConfig& config) {
  oracle::OracleConfig o;
  o.weights = config.weights;
  o.minor_rounds = config.oracle_rounds;
  o.default_pue = config.default_pue;
  o.allow_missing_intensity = config.allow_missing_intensity;
  o.default_g_per_kwh = config.default_g_per_kwh;
  return o;
}

OracleComparison compare_with_oracle(const InputBundle& bundle, const RunOutputs& run,
                                     const oracle::OracleResult& reference) {
  const Names& n = bundle.names;
  OracleComparison out;
  const auto& stages = run.pipeline.stages;
  const std::size_t common = std::min(stages.size(), reference.stages.size());
  for (std::size_t i = 0; i + 1 < common; ++i) {
    diff_stage(n, stages[i], reference.stages[i], stages[i].stage().label(), out);
  }
  if (!stages.empty() && !reference.stages.empty()) {
    diff_stage(n, stages.back(), reference.stages.back(), "final", out);
  }

  TableDiff moved("flow_summary_moved");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    moved.pipeline(stages[i].stage().label(), run.pipeline.flows.moved_wh(stages[i].stage()));
  }
  for (std::size_t i = 0; i < reference.moved_wh.size(); ++i) {
    const auto label = i == 0   ? alloc::Stage::machine().label()
                       : i == 1 ? alloc::Stage::after_major().label()
                                : alloc::Stage::after_minor(static_cast<int>(i) - 1).label();
    moved.oracle(label, reference.moved_wh[i]);
  }
  moved.finish(out);

  TableDiff emissions("emissions_kg");
  for (const auto& e : run.emissions) emissions.pipeline(ledger_key_text(n, {e.cluster, e.hour, e.user}), e.kg_co2e);
  for (const auto& [k, kg] : reference.emissions_kg) emissions.oracle(energy_key_text(n, k), kg);
  emissions.finish(out);

  TableDiff footprints("footprint_kg");
  auto fp_key = [&](Month m, AccountId a, ProductId p, RegionId r) {
    return fmt::format("{}|{}|{}|{}", format_month(m), n.accounts.name(a), n.products.name(p), n.regions.name(r));
  };
  for (const auto& r : run.footprint.rows) footprints.pipeline(fp_key(r.month, r.account, r.product, r.region), r.kg_co2e);
  for (const auto& [k, kg] : reference.footprint_kg) {
    const auto& [m, a, p, r] = k;
    footprints.oracle(fp_key(Month{m}, AccountId{a}, ProductId{p}, RegionId{r}), kg);
  }
  footprints.finish(out);

  TableDiff beta("beta");
  for (const auto& m : run.footprint.months) beta.pipeline(format_month(m.month), m.beta);
  for (const auto& [m, b] : reference.beta) beta.oracle(format_month(Month{m}), b);
  beta.finish(out);
  return out;
}

void write_oracle_diff(const fs::path& dir, const OracleComparison& comparison) {
  fs::create_directories(dir);
  {
    constexpr std::string_view header[] = {"table", "rows", "max_rel_dev", "worst_key"};
    io::CsvWriter w(dir / "oracle_summary.csv", header);
    for (const auto& t : comparison.tables) {
      w.field(t.table).field(static_cast<long long>(t.rows)).field(t.max_rel_dev).field(t.worst_key);
      w.end_row();
    }
  }
  constexpr std::string_view header[] = {"table", "key", "pipeline", "oracle", "rel_dev"};
  io::CsvWriter w(dir / "oracle_diff.csv", header);
  for (const auto& r : comparison.worst) {
    w.field(r.table).field(r.key).field(r.pipeline).field(r.oracle).field(r.rel_dev);
    w.end_row();
  }
}

}  // namespace carbonalloc::report
