#include "carbonalloc/io/bundle_io.hpp"

#include <fmt/format.h>

#include "carbonalloc/core/errors.hpp"
#include "carbonalloc/io/csv.hpp"

namespace carbonalloc::io {
namespace {

namespace fs = std::filesystem;

const TableSchema& schema(std::string_view file) {
  for (const auto& s : bundle_schemas()) {
    if (s.file == file) return s;
  }
  throw std::logic_error("unknown table");
}

/// Calls `row` for every data row of `file`; absent optional files are skipped.
template <class RowFn>
void read_table(const fs::path& dir, std::string_view file, RowFn&& row) {
  const auto& s = schema(file);
  const fs::path path = dir / s.file;
  if (!fs::exists(path)) {
    if (s.required) throw InputError(fmt::format("missing required file {}", path.string()));
    return;
  }
  CsvReader reader(path);
  reader.require_header(s.columns);
  std::vector<std::string_view> f;
  while (reader.next(f)) row(f, reader);
}

Sharing parse_sharing(std::string_view text, const CsvReader& where) {
  if (text == "dedicated" || text == "Dedicated") return Sharing::Dedicated;
  if (text == "shared" || text == "Shared") return Sharing::Shared;
  throw InputError(fmt::format("{}:{}: sharing must be 'dedicated' or 'shared', got '{}'",
                               where.path().string(), where.line(), text));
}

ResourceVector parse_vector(const std::vector<std::string_view>& f, std::size_t first,
                            const CsvReader& r) {
  return {parse_double(f[first], r), parse_double(f[first + 1], r), parse_double(f[first + 2], r),
          parse_double(f[first + 3], r)};
}

template <class Tag>
std::string_view name_of(const TypedSymbols<Tag>& t, Id<Tag> id) {
  return t.name(id);
}

}  // namespace

const std::vector<TableSchema>& bundle_schemas() {
  static const std::vector<TableSchema> schemas = {
      {"machines.csv", {"machine_id", "cluster_id", "sharing", "owner_user", "idle_rating_watts"}, true},
      {"power_samples.csv", {"machine_id", "hour_utc", "measured_power_watts"}, true},
      {"resource_allocations.csv",
       {"user", "cluster_id", "hour_utc", "gcu", "ram_gib", "ssd_tib", "hdd_tib"}, true},
      {"gcu_usage.csv", {"user", "machine_id", "hour_utc", "gcu_used"}, true},
      {"service_usage.csv",
       {"consumer", "provider", "cluster_id", "hour_utc", "gcu", "ram_gib", "ssd_tib", "hdd_tib",
        "colossus_style"},
       false},
      {"net_cost.csv", {"user", "service", "day_utc", "net_cost"}, false},
      {"non_service_cost.csv", {"user", "day_utc", "cost"}, false},
      {"pue.csv", {"cluster_id", "hour_utc", "pue"}, false},
      {"carbon_intensity.csv", {"zone_id", "hour_utc", "g_per_kwh"}, false},
      {"annual_intensity.csv", {"zone_id", "year", "g_per_kwh"}, false},
      {"zone_map.csv", {"cluster_id", "zone_id", "region_id"}, true},
      {"sku_catalog.csv",
       {"sku_id", "product_id", "provider_user", "list_price_per_unit", "usage_unit", "is_commitment"},
       false},
      {"billing_usage.csv", {"sku_id", "region_id", "billing_account", "month", "usage_units"}, false},
      {"cloud_overhead.csv", {"user"}, false},
  };
  return schemas;
}

InputBundle load_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError(fmt::format("input directory {} not found", dir.string()));
  InputBundle b;
  Names& n = b.names;

  read_table(dir, "machines.csv", [&](const auto& f, const CsvReader& r) {
    MachineRecord m;
    m.machine = n.machines.intern(f[0]);
    m.cluster = n.clusters.intern(f[1]);
    m.sharing = parse_sharing(f[2], r);
    if (!f[3].empty()) m.owner = n.users.intern(f[3]);
    m.idle_rating_watts = parse_double(f[4], r);
    b.machines.push_back(m);
  });
  read_table(dir, "power_samples.csv", [&](const auto& f, const CsvReader& r) {
    b.power_samples.push_back({n.machines.intern(f[0]), parse_hour(f[1]), parse_double(f[2], r)});
  });
  read_table(dir, "resource_allocations.csv", [&](const auto& f, const CsvReader& r) {
    b.allocations.push_back(
        {n.users.intern(f[0]), n.clusters.intern(f[1]), parse_hour(f[2]), parse_vector(f, 3, r)});
  });
  read_table(dir, "gcu_usage.csv", [&](const auto& f, const CsvReader& r) {
    b.gcu_usage.push_back(
        {n.users.intern(f[0]), n.machines.intern(f[1]), parse_hour(f[2]), parse_double(f[3], r)});
  });
  read_table(dir, "service_usage.csv", [&](const auto& f, const CsvReader& r) {
    b.service_usage.push_back({n.users.intern(f[0]), n.users.intern(f[1]), n.clusters.intern(f[2]),
                               parse_hour(f[3]), parse_vector(f, 4, r), parse_bool(f[8], r)});
  });
  read_table(dir, "net_cost.csv", [&](const auto& f, const CsvReader& r) {
    b.net_costs.push_back(
        {n.users.intern(f[0]), n.services.intern(f[1]), parse_day(f[2]), parse_double(f[3], r)});
  });
  read_table(dir, "non_service_cost.csv", [&](const auto& f, const CsvReader& r) {
    b.non_service_costs.push_back({n.users.intern(f[0]), parse_day(f[1]), parse_double(f[2], r)});
  });
  read_table(dir, "pue.csv", [&](const auto& f, const CsvReader& r) {
    b.pue.push_back({n.clusters.intern(f[0]), parse_hour(f[1]), parse_double(f[2], r)});
  });
  read_table(dir, "carbon_intensity.csv", [&](const auto& f, const CsvReader& r) {
    b.carbon_intensity.push_back({n.zones.intern(f[0]), parse_hour(f[1]), parse_double(f[2], r)});
  });
  read_table(dir, "annual_intensity.csv", [&](const auto& f, const CsvReader& r) {
    b.annual_intensity.push_back(
        {n.zones.intern(f[0]), static_cast<int>(parse_int(f[1], r)), parse_double(f[2], r)});
  });
  read_table(dir, "zone_map.csv", [&](const auto& f, const CsvReader&) {
    ZoneMapRecord z;
    z.cluster = n.clusters.intern(f[0]);
    if (!f[1].empty()) z.zone = n.zones.intern(f[1]);
    z.region = n.regions.intern(f[2]);
    b.zone_map.push_back(z);
  });
  read_table(dir, "sku_catalog.csv", [&](const auto& f, const CsvReader& r) {
    b.skus.push_back({n.skus.intern(f[0]), n.products.intern(f[1]), n.users.intern(f[2]),
                      parse_double(f[3], r), std::string(f[4]), parse_bool(f[5], r)});
  });
  read_table(dir, "billing_usage.csv", [&](const auto& f, const CsvReader& r) {
    SkuUsageRecord u;
    u.sku = n.skus.intern(f[0]);
    u.region = n.regions.intern(f[1]);
    if (!f[2].empty()) u.account = n.accounts.intern(f[2]);
    u.month = parse_month(f[3]);
    u.usage_units = parse_double(f[4], r);
    b.billing_usage.push_back(u);
  });
  read_table(dir, "cloud_overhead.csv", [&](const auto& f, const CsvReader&) {
    b.cloud_overhead_users.push_back(n.users.intern(f[0]));
  });
  return b;
}

void write_bundle(const fs::path& dir, const InputBundle& b) {
  fs::create_directories(dir);
  const Names& n = b.names;
  auto open = [&](std::string_view file) {
    const auto& s = schema(file);
    return std::make_unique<CsvWriter>(dir / s.file, s.columns);
  };
  {
    auto w = open("machines.csv");
    for (const auto& m : b.machines) {
      w->field(name_of(n.machines, m.machine)).field(name_of(n.clusters, m.cluster));
      w->field(m.sharing == Sharing::Dedicated ? "dedicated" : "shared");
      w->field(m.owner ? name_of(n.users, *m.owner) : std::string_view{});
      w->field(m.idle_rating_watts);
      w->end_row();
    }
  }
  {
    auto w = open("power_samples.csv");
    for (const auto& s : b.power_samples) {
      w->field(name_of(n.machines, s.machine)).field(format_hour(s.hour)).field(s.measured_power_watts);
      w->end_row();
    }
  }
  auto write_vector = [](CsvWriter& w, const ResourceVector& v) {
    w.field(v.gcu).field(v.ram_gib).field(v.ssd_tib).field(v.hdd_tib);
  };
  {
    auto w = open("resource_allocations.csv");
    for (const auto& a : b.allocations) {
      w->field(name_of(n.users, a.user)).field(name_of(n.clusters, a.cluster)).field(format_hour(a.hour));
      write_vector(*w, a.allocation);
      w->end_row();
    }
  }
  {
    auto w = open("gcu_usage.csv");
    for (const auto& g : b.gcu_usage) {
      w->field(name_of(n.users, g.user)).field(name_of(n.machines, g.machine)).field(format_hour(g.hour));
      w->field(g.gcu_used);
      w->end_row();
    }
  }
  {
    auto w = open("service_usage.csv");
    for (const auto& s : b.service_usage) {
      w->field(name_of(n.users, s.consumer)).field(name_of(n.users, s.provider));
      w->field(name_of(n.clusters, s.cluster)).field(format_hour(s.hour));
      write_vector(*w, s.usage);
      w->field(s.colossus_style ? "true" : "false");
      w->end_row();
    }
  }
  {
    auto w = open("net_cost.csv");
    for (const auto& c : b.net_costs) {
      w->field(name_of(n.users, c.user)).field(name_of(n.services, c.service)).field(format_day(c.day));
      w->field(c.net_cost);
      w->end_row();
    }
  }
  {
    auto w = open("non_service_cost.csv");
    for (const auto& c : b.non_service_costs) {
      w->field(name_of(n.users, c.user)).field(format_day(c.day)).field(c.cost);
      w->end_row();
    }
  }
  {
    auto w = open("pue.csv");
    for (const auto& p : b.pue) {
      w->field(name_of(n.clusters, p.cluster)).field(format_hour(p.hour)).field(p.pue);
      w->end_row();
    }
  }
  {
    auto w = open("carbon_intensity.csv");
    for (const auto& c : b.carbon_intensity) {
      w->field(name_of(n.zones, c.zone)).field(format_hour(c.hour)).field(c.g_per_kwh);
      w->end_row();
    }
  }
  {
    auto w = open("annual_intensity.csv");
    for (const auto& a : b.annual_intensity) {
      w->field(name_of(n.zones, a.zone)).field(static_cast<long long>(a.year)).field(a.g_per_kwh);
      w->end_row();
    }
  }
  {
    auto w = open("zone_map.csv");
    for (const auto& z : b.zone_map) {
      w->field(name_of(n.clusters, z.cluster));
      w->field(z.zone ? name_of(n.zones, *z.zone) : std::string_view{});
      w->field(name_of(n.regions, z.region));
      w->end_row();
    }
  }
  {
    auto w = open("sku_catalog.csv");
    for (const auto& s : b.skus) {
      w->field(name_of(n.skus, s.sku)).field(name_of(n.products, s.product)).field(name_of(n.users, s.provider));
      w->field(s.list_price_per_unit).field(s.usage_unit).field(s.is_commitment ? "true" : "false");
      w->end_row();
    }
  }
  {
    auto w = open("billing_usage.csv");
    for (const auto& u : b.billing_usage) {
      w->field(name_of(n.skus, u.sku)).field(name_of(n.regions, u.region));
      w->field(u.account ? name_of(n.accounts, *u.account) : std::string_view{});
      w->field(format_month(u.month)).field(u.usage_units);
      w->end_row();
    }
  }
  {
    auto w = open("cloud_overhead.csv");
    for (const auto& u : b.cloud_overhead_users) {
      w->field(name_of(n.users, u));
      w->end_row();
    }
  }
}

}  // namespace carbonalloc::io
