#include "carbonalloc/sim/fleet_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "carbonalloc/core/errors.hpp"
#include "carbonalloc/io/bundle_io.hpp"

namespace carbonalloc::sim {
namespace {

/// mt19937_64 with hand-rolled uniform/normal draws. The std distributions
/// are implementation-defined, so they would break cross-platform hashes.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool chance(double p) { return uniform() < p; }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }
  double normal() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

/// Independent streams per concern, so adding a table does not shift the others.
std::uint64_t substream(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Small helper for hand-written scenarios.
class Builder {
 public:
  InputBundle b;

  UserId user(std::string_view n) { return b.names.users.intern(n); }
  ClusterId cluster(std::string_view name, std::string_view zone, std::string_view region) {
    const ClusterId c = b.names.clusters.intern(name);
    std::optional<ZoneId> z;
    if (!zone.empty()) z = b.names.zones.intern(zone);
    b.zone_map.push_back({c, z, b.names.regions.intern(region)});
    return c;
  }
  MachineId machine(std::string_view name, ClusterId c, std::optional<UserId> owner, double rating) {
    const MachineId m = b.names.machines.intern(name);
    b.machines.push_back({m, c, owner ? Sharing::Dedicated : Sharing::Shared, owner, rating});
    return m;
  }
  void sample(MachineId m, Hour h, double w) { b.power_samples.push_back({m, h, w}); }
  void alloc(UserId u, ClusterId c, Hour h, ResourceVector r) { b.allocations.push_back({u, c, h, r}); }
  void gcu(UserId u, MachineId m, Hour h, double g) { b.gcu_usage.push_back({u, m, h, g}); }
  void service(UserId consumer, UserId provider, ClusterId c, Hour h, ResourceVector r, bool colossus) {
    b.service_usage.push_back({consumer, provider, c, h, r, colossus});
  }
  void net(UserId u, std::string_view svc, Day d, double cost) {
    b.net_costs.push_back({u, b.names.services.intern(svc), d, cost});
  }
  void non_service(UserId u, Day d, double cost) { b.non_service_costs.push_back({u, d, cost}); }
  SkuId sku(std::string_view id, std::string_view product, UserId provider, double price,
            std::string_view unit, bool commitment = false) {
    const SkuId s = b.names.skus.intern(id);
    b.skus.push_back({s, b.names.products.intern(product), provider, price, std::string(unit), commitment});
    return s;
  }
  void bill(SkuId s, std::string_view region, std::string_view account, Month m, double units) {
    std::optional<AccountId> a;
    if (!account.empty()) a = b.names.accounts.intern(account);
    b.billing_usage.push_back({s, b.names.regions.intern(region), a, m, units});
  }
  /// Constant PUE per cluster and intensity per zone for every hour, plus a
  /// matching annual row.
  void flat_feeds(Hour start, int hours, double pue, const std::map<std::string, double>& zone_g) {
    for (const auto& z : b.zone_map) {
      for (int h = 0; h < hours; ++h) b.pue.push_back({z.cluster, Hour{start.value + h}, pue});
    }
    for (const auto& [zone, g] : zone_g) {
      const ZoneId id = b.names.zones.intern(zone);
      for (int h = 0; h < hours; ++h) b.carbon_intensity.push_back({id, Hour{start.value + h}, g});
      b.annual_intensity.push_back({id, year_of(start), g});
    }
  }
};

bool daytime(Hour h) {
  const auto hod = h.value % 24;
  return hod >= 6 && hod < 18;
}

// A 16 MW cluster with one production user: 6 MW idle, 14 MW by day at 75%
// prod GCU share and 12 MW at night at 50%. prod holds every allocation.
InputBundle figure1(const ScenarioSpec& spec) {
  Builder x;
  const Hour start = spec.start;
  const int n = spec.figure1_machines;
  const UserId prod = x.user("prod");
  const UserId nonprod = x.user("nonprod");
  const ClusterId c = x.cluster("cluster-1", "Z1", "region-1");
  std::vector<MachineId> machines;
  for (int i = 0; i < n; ++i) {
    machines.push_back(x.machine(n == 1 ? "aggregate" : fmt::format("m{:03}", i), c, std::nullopt, 6e6 / n));
  }
  for (int h = 0; h < 24; ++h) {
    const Hour hour{start.value + h};
    const bool day = daytime(hour);
    x.alloc(prod, c, hour, {1000.0, 0, 0, 0});
    for (const auto m : machines) {
      x.sample(m, hour, (day ? 14e6 : 12e6) / n);
      x.gcu(prod, m, hour, (day ? 600.0 : 300.0) / n);
      x.gcu(nonprod, m, hour, (day ? 200.0 : 300.0) / n);
    }
  }
  x.flat_feeds(start, 24, 1.1, {{"Z1", 320.8}});
  return std::move(x.b);
}

/// One cluster of shared machines that a provider and its consumers all use.
struct MinorEconomy {
  Builder x;
  ClusterId c1, c2;
  std::vector<MachineId> machines;
};

MinorEconomy minor_economy_base(Hour start, std::span<const std::string_view> users) {
  MinorEconomy e;
  e.c1 = e.x.cluster("cluster-a", "ZA", "region-a");
  e.c2 = e.x.cluster("cluster-b", "ZB", "region-b");
  std::vector<UserId> ids;
  for (auto u : users) ids.push_back(e.x.user(u));
  for (int i = 0; i < 4; ++i) {
    const ClusterId c = i < 2 ? e.c1 : e.c2;
    e.machines.push_back(e.x.machine(fmt::format("m{}", i), c, std::nullopt, 200.0 + 10 * i));
  }
  for (int h = 0; h < 24; ++h) {
    const Hour hour{start.value + h};
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const double g = 10.0 + 3.0 * static_cast<double>(k) + (daytime(hour) ? 5.0 : 0.0);
      e.x.alloc(ids[k], e.c1, hour, {g, 40.0 * (k + 1), 0.5, 3.0});
      e.x.alloc(ids[k], e.c2, hour, {g + 1.0, 20.0, 1.0, 0.0});
    }
    for (std::size_t i = 0; i < e.machines.size(); ++i) {
      e.x.sample(e.machines[i], hour, 420.0 + 15.0 * static_cast<double>(i) + (daytime(hour) ? 80.0 : 0.0));
      for (std::size_t k = 0; k < ids.size(); ++k) {
        e.x.gcu(ids[k], e.machines[i], hour, 1.0 + 0.5 * static_cast<double>((k + i) % 3));
      }
    }
  }
  e.x.flat_feeds(start, 24, 1.12, {{"ZA", 150.0}, {"ZB", 450.0}});
  return e;
}

// Balanced service: the provider has no non-service cost and its consumers
// pay exactly its revenue, so every joule leaves the provider.
InputBundle balanced_service(const ScenarioSpec& spec) {
  constexpr std::string_view users[] = {"blobstore", "ads", "search"};
  auto e = minor_economy_base(spec.start, users);
  const Day d = day_of(spec.start);
  e.x.net(e.x.user("blobstore"), "blob-storage", d, -6000.0);
  e.x.net(e.x.user("ads"), "blob-storage", d, 2000.0);
  e.x.net(e.x.user("search"), "blob-storage", d, 4000.0);
  e.x.non_service(e.x.user("blobstore"), d, 0.0);
  return std::move(e.x.b);
}

// Ads pays 1000 of the provider's 10000 revenue; the provider's own
// non-service cost equals its revenue.
InputBundle blobstore_ads(const ScenarioSpec& spec) {
  constexpr std::string_view users[] = {"blobstore", "ads", "search", "youtube"};
  auto e = minor_economy_base(spec.start, users);
  const Day d = day_of(spec.start);
  e.x.net(e.x.user("blobstore"), "blob-storage", d, -10000.0);
  e.x.net(e.x.user("ads"), "blob-storage", d, 1000.0);
  e.x.net(e.x.user("search"), "blob-storage", d, 4000.0);
  e.x.net(e.x.user("youtube"), "blob-storage", d, 5000.0);
  e.x.non_service(e.x.user("blobstore"), d, 10000.0);
  e.x.non_service(e.x.user("ads"), d, 50000.0);
  return std::move(e.x.b);
}

// Cluster-hours without any allocation push shared idle power to the
// overhead user; a cloud control plane without SKUs feeds beta.
InputBundle overhead_pool(const ScenarioSpec& spec) {
  Builder x;
  const Hour start = spec.start;
  const UserId web = x.user("web");
  const UserId vm = x.user("cloud-vm");
  const UserId control = x.user("cloud-control");
  const ClusterId c = x.cluster("cluster-1", "Z1", "region-1");
  const MachineId shared = x.machine("shared-0", c, std::nullopt, 300.0);
  const MachineId ctl = x.machine("control-0", c, control, 150.0);
  for (int h = 0; h < 6; ++h) {
    const Hour hour{start.value + h};
    if (h < 3) x.alloc(web, c, hour, {8.0, 64.0, 0.0, 0.0});
    x.sample(shared, hour, 500.0 + 20.0 * h);
    x.sample(ctl, hour, 200.0);
    x.gcu(web, shared, hour, 2.0);
    x.gcu(vm, shared, hour, 6.0);
    x.gcu(control, ctl, hour, 1.0);
  }
  x.flat_feeds(start, 6, 1.1, {{"Z1", 400.0}});
  const Month m = month_of(start);
  const SkuId core = x.sku("vm-core-hour", "compute", vm, 0.04, "core-hour");
  const SkuId ram = x.sku("vm-ram-gib-hour", "compute", vm, 0.005, "gib-hour");
  x.sku("vm-core-commit", "compute", vm, 0.02, "core-hour", true);
  x.bill(core, "region-1", "acct-1", m, 4000.0);
  x.bill(ram, "region-1", "acct-1", m, 16000.0);
  x.bill(core, "region-1", "acct-2", m, 1000.0);
  x.bill(core, "region-1", "", m, 500.0);
  x.b.cloud_overhead_users.push_back(control);
  return std::move(x.b);
}

// One cloud product with two SKUs billed to two accounts in two regions.
InputBundle two_accounts(const ScenarioSpec& spec) {
  Builder x;
  const Hour start = spec.start;
  const UserId db = x.user("cloud-db");
  const ClusterId east = x.cluster("cluster-east", "ZE", "region-east");
  const ClusterId west = x.cluster("cluster-west", "ZW", "region-west");
  const MachineId me = x.machine("db-east", east, db, 100.0);
  const MachineId mw = x.machine("db-west", west, db, 100.0);
  for (int h = 0; h < 24; ++h) {
    const Hour hour{start.value + h};
    x.sample(me, hour, 150.0);
    x.sample(mw, hour, 250.0);
    x.gcu(db, me, hour, 4.0);
    x.gcu(db, mw, hour, 6.0);
  }
  x.flat_feeds(start, 24, 1.1, {{"ZE", 100.0}, {"ZW", 600.0}});
  const Month m = month_of(start);
  const SkuId a = x.sku("db-sku-a", "cloud-sql", db, 1.75, "instance-hour");
  const SkuId b = x.sku("db-sku-b", "cloud-sql", db, 1.0, "gib-month");
  x.bill(a, "region-east", "acct-alpha", m, 6.0);
  x.bill(b, "region-east", "acct-alpha", m, 5.0);
  x.bill(a, "region-west", "acct-beta", m, 4.0);
  x.bill(b, "region-west", "acct-beta", m, 10.0);
  x.bill(b, "region-west", "", m, 2.0);
  return std::move(x.b);
}

// Every stage in a few dozen rows: dedicated and shared machines, a GCU
// service, a storage service, a net-cost service and one cloud product.
InputBundle sankey_small(const ScenarioSpec& spec) {
  Builder x;
  const Hour start = spec.start;
  const UserId ads = x.user("ads");
  const UserId search = x.user("search");
  const UserId storage = x.user("storage");
  const UserId bigtable = x.user("bigtable");
  const UserId network = x.user("network");
  const UserId vm = x.user("cloud-vm");
  const ClusterId c1 = x.cluster("cluster-1", "Z1", "region-1");
  const ClusterId c2 = x.cluster("cluster-2", "Z2", "region-2");
  const MachineId ded = x.machine("search-ded", c1, search, 180.0);
  const MachineId s1 = x.machine("shared-1", c1, std::nullopt, 220.0);
  const MachineId s2 = x.machine("shared-2", c2, std::nullopt, 240.0);
  const UserId everyone[] = {ads, search, storage, bigtable, network, vm};
  for (int h = 0; h < 24; ++h) {
    const Hour hour{start.value + h};
    const double load = daytime(hour) ? 1.0 : 0.6;
    x.sample(ded, hour, 200.0 + 100.0 * load);
    x.sample(s1, hour, 260.0 + 200.0 * load);
    x.sample(s2, hour, 250.0 + 150.0 * load);
    for (std::size_t k = 0; k < std::size(everyone); ++k) {
      const double share = 2.0 + static_cast<double>(k);
      x.alloc(everyone[k], c1, hour, {share, 16.0 * share, 0.2 * share, k == 2 ? 60.0 : 1.0});
      x.alloc(everyone[k], c2, hour, {share + 1.0, 8.0 * share, 0.1, k == 2 ? 90.0 : 0.0});
      x.gcu(everyone[k], s1, hour, load * share);
      x.gcu(everyone[k], s2, hour, load * (8.0 - share));
    }
    x.gcu(search, ded, hour, 5.0 * load);
    for (const ClusterId c : {c1, c2}) {
      x.service(ads, storage, c, hour, {0.5, 0, 2.0, 30.0}, true);
      x.service(search, storage, c, hour, {0.3, 0, 1.0, 50.0}, true);
      x.service(vm, storage, c, hour, {0.2, 0, 0.5, 10.0}, true);
      x.service(ads, bigtable, c, hour, {1.5 * load, 0, 0, 0}, false);
      x.service(vm, bigtable, c, hour, {0.5 * load, 0, 0, 0}, false);
    }
  }
  x.flat_feeds(start, 24, 1.1, {{"Z1", 280.0}, {"Z2", 520.0}});
  const Day d = day_of(start);
  x.net(network, "network", d, -3000.0);
  x.net(ads, "network", d, 1800.0);
  x.net(search, "network", d, 700.0);
  x.net(vm, "network", d, 500.0);
  x.non_service(network, d, 2500.0);
  const Month m = month_of(start);
  const SkuId core = x.sku("vm-core-hour", "compute-engine", vm, 0.03, "core-hour");
  const SkuId disk = x.sku("vm-disk-gib-month", "compute-engine", vm, 0.04, "gib-month");
  x.bill(core, "region-1", "acct-1", m, 900.0);
  x.bill(disk, "region-1", "acct-1", m, 500.0);
  x.bill(core, "region-2", "acct-2", m, 300.0);
  x.bill(core, "region-3", "acct-2", m, 100.0);
  return std::move(x.b);
}

// ---------------------------------------------------------------------------
// Random fleets

struct RandomRoles {
  std::vector<UserId> users;          // all, excluding the overhead user
  UserId storage_provider;            // storage-style major service
  UserId compute_provider;            // GCU-style major service
  std::vector<UserId> chain;          // net-cost providers, upstream first
  std::vector<UserId> leaves;
  std::vector<UserId> cloud_providers;
  std::optional<UserId> cloud_overhead;
};

RandomRoles assign_roles(Names& names, const ScenarioSpec& spec) {
  RandomRoles r;
  for (int i = 0; i < spec.user_count; ++i) r.users.push_back(names.users.intern(fmt::format("u{:03}", i)));
  r.storage_provider = r.users[0];
  r.compute_provider = r.users[1];
  const int depth = spec.economy.acyclic_depth;
  for (int i = 0; i < depth; ++i) r.chain.push_back(r.users[2 + i]);
  r.leaves.assign(r.users.begin() + 2 + depth, r.users.end());
  if (spec.with_billing) {
    r.cloud_providers.push_back(r.leaves.back());
    if (r.leaves.size() >= 3) r.cloud_providers.push_back(r.leaves[r.leaves.size() - 2]);
    if (r.leaves.size() >= 4) r.cloud_overhead = r.leaves[r.leaves.size() - 3];
  }
  return r;
}

std::vector<Day> days_covered(Hour start, int hours) {
  std::vector<Day> out;
  for (Day d = day_of(start); first_hour(d) < Hour{start.value + hours}; d = Day{d.value + 1}) out.push_back(d);
  return out;
}

std::vector<Month> months_covered(Hour start, int hours) {
  std::vector<Month> out;
  const Month last = month_of(Hour{start.value + hours - 1});
  for (Month m = month_of(start); m <= last; m = Month{m.value + 1}) out.push_back(m);
  return out;
}

InputBundle random_fleet(const ScenarioSpec& spec) {
  InputBundle b;
  Names& names = b.names;
  const RandomRoles roles = assign_roles(names, spec);
  const int clusters = spec.cluster_count > 0 ? spec.cluster_count : std::max(1, (spec.machine_count + 249) / 250);
  const int regions = std::max(1, clusters / 2);
  const Hour start = spec.start;
  const int hours = spec.hours;

  // Topology. With three or more clusters the last one has no zone and falls
  // back to the annual value of its region.
  std::vector<ClusterId> cluster_ids;
  std::vector<ZoneId> zones;
  std::optional<RegionId> zoneless_region;
  for (int i = 0; i < clusters; ++i) {
    const ClusterId c = names.clusters.intern(fmt::format("c{:03}", i));
    const RegionId r = names.regions.intern(fmt::format("r{:02}", i % regions));
    cluster_ids.push_back(c);
    if (clusters >= 3 && i == clusters - 1) {
      b.zone_map.push_back({c, std::nullopt, r});
      zoneless_region = r;
    } else {
      const ZoneId z = names.zones.intern(fmt::format("z{:03}", i));
      zones.push_back(z);
      b.zone_map.push_back({c, z, r});
    }
  }

  // Machines and power.
  Rng mrng(substream(spec.seed, 1));
  struct MachineShape {
    double peak;
    double base;
  };
  std::vector<MachineShape> shapes;
  b.machines.reserve(spec.machine_count);
  for (int i = 0; i < spec.machine_count; ++i) {
    const MachineId m = names.machines.intern(fmt::format("m{:05}", i));
    const ClusterId c = cluster_ids[static_cast<std::size_t>(i % clusters)];
    const double peak = mrng.uniform(300.0, 600.0);
    std::optional<UserId> owner;
    if (mrng.chance(0.2)) owner = roles.users[mrng.index(roles.users.size())];
    b.machines.push_back({m, c, owner ? Sharing::Dedicated : Sharing::Shared, owner, spec.idle_fraction * peak});
    shapes.push_back({peak, mrng.uniform(0.2, 0.7)});
  }

  Rng prng(substream(spec.seed, 2));
  b.power_samples.reserve(static_cast<std::size_t>(spec.machine_count) * hours);
  for (int h = 0; h < hours; ++h) {
    const Hour hour{start.value + h};
    const double phase = 2.0 * std::numbers::pi * static_cast<double>((hour.value % 24) - 9) / 24.0;
    const double diurnal = spec.diurnal_amplitude * std::sin(phase);
    for (std::size_t i = 0; i < b.machines.size(); ++i) {
      if (prng.chance(0.01)) continue;  // missing sample
      const auto& m = b.machines[i];
      double watts;
      if (prng.chance(0.03)) {
        watts = m.idle_rating_watts * prng.uniform(0.6, 1.0);  // below the rating
      } else {
        const double u = std::clamp(shapes[i].base * (1.0 + diurnal) + 0.05 * prng.normal(), 0.0, 1.0);
        watts = m.idle_rating_watts + (shapes[i].peak - m.idle_rating_watts) * u;
      }
      b.power_samples.push_back({m.machine, hour, watts});
    }
  }

  // Allocations: a random subset of users per cluster-hour; a few cluster-hours
  // have none at all.
  Rng arng(substream(spec.seed, 3));
  for (int h = 0; h < hours; ++h) {
    const Hour hour{start.value + h};
    for (const ClusterId c : cluster_ids) {
      if (arng.chance(0.02)) continue;
      for (const UserId u : roles.users) {
        if (!arng.chance(0.6)) continue;
        b.allocations.push_back({u, c, hour,
                                 {arng.uniform(1.0, 40.0), arng.uniform(0.0, 400.0), arng.uniform(0.0, 4.0),
                                  arng.uniform(0.0, 24.0)}});
      }
    }
  }

  // GCU usage per sampled machine-hour.
  Rng grng(substream(spec.seed, 4));
  const MachineDirectory directory(b.machines);
  b.gcu_usage.reserve(b.power_samples.size() * 2);
  std::vector<UserId> picked;
  for (const auto& s : b.power_samples) {
    if (grng.chance(0.03)) continue;
    const MachineRecord* m = directory.find(s.machine);
    picked.clear();
    if (m->owner) picked.push_back(*m->owner);
    const std::size_t want = m->owner ? grng.index(2) : 1 + grng.index(3);
    for (std::size_t k = 0; k < want; ++k) {
      const UserId u = roles.users[grng.index(roles.users.size())];
      if (std::find(picked.begin(), picked.end(), u) == picked.end()) picked.push_back(u);
    }
    for (const UserId u : picked) b.gcu_usage.push_back({u, s.machine, s.hour, grng.uniform(0.1, 8.0)});
  }

  // Major services.
  Rng srng(substream(spec.seed, 5));
  for (int h = 0; h < hours; ++h) {
    const Hour hour{start.value + h};
    for (const ClusterId c : cluster_ids) {
      for (const UserId provider : {roles.storage_provider, roles.compute_provider}) {
        const bool colossus = provider == roles.storage_provider;
        for (const UserId consumer : roles.users) {
          if (consumer == provider || !srng.chance(0.3)) continue;
          ResourceVector u{srng.uniform(0.0, 5.0), srng.uniform(0.0, 50.0), srng.uniform(0.0, 2.0),
                           srng.uniform(0.0, 30.0)};
          if (!colossus) u = {u.gcu, 0.0, 0.0, 0.0};
          b.service_usage.push_back({consumer, provider, c, hour, u, colossus});
        }
      }
    }
  }

  // Net-cost economy: chain[k] serves chain[k+1] plus a few leaves; every
  // service is balanced (consumers pay exactly the provider's revenue).
  Rng crng(substream(spec.seed, 6));
  struct MinorService {
    ServiceId id;
    UserId provider;
    std::vector<UserId> consumers;
  };
  std::vector<MinorService> services;
  for (std::size_t k = 0; k < roles.chain.size(); ++k) {
    MinorService s{names.services.intern(fmt::format("svc{}", k)), roles.chain[k], {}};
    if (k + 1 < roles.chain.size()) s.consumers.push_back(roles.chain[k + 1]);
    if (spec.economy.cyclic && k + 1 == roles.chain.size()) s.consumers.push_back(roles.chain.front());
    const std::size_t extra = 2 + crng.index(3);
    for (std::size_t j = 0; j < extra; ++j) {
      const UserId u = roles.leaves[crng.index(roles.leaves.size())];
      if (std::find(s.consumers.begin(), s.consumers.end(), u) == s.consumers.end()) s.consumers.push_back(u);
    }
    services.push_back(std::move(s));
  }
  for (const Day d : days_covered(start, hours)) {
    std::map<UserId, double> revenue;
    for (const auto& s : services) {
      const double r = crng.uniform(1000.0, 10000.0);
      revenue[s.provider] += r;
      std::vector<double> w;
      double total = 0.0;
      for (std::size_t j = 0; j < s.consumers.size(); ++j) {
        w.push_back(crng.uniform(0.2, 1.0));
        total += w.back();
      }
      b.net_costs.push_back({s.provider, s.id, d, -r});
      for (std::size_t j = 0; j < s.consumers.size(); ++j) {
        b.net_costs.push_back({s.consumers[j], s.id, d, r * w[j] / total});
      }
    }
    for (const auto& [provider, r] : revenue) {
      b.non_service_costs.push_back({provider, d, crng.uniform(0.0, spec.economy.non_service_scale) * r});
    }
    for (const UserId u : roles.leaves) b.non_service_costs.push_back({u, d, crng.uniform(100.0, 5000.0)});
  }

  // Facility feeds.
  Rng frng(substream(spec.seed, 7));
  for (int h = 0; h < hours; ++h) {
    for (const ClusterId c : cluster_ids) {
      if (frng.chance(0.02)) continue;
      b.pue.push_back({c, Hour{start.value + h}, frng.uniform(1.05, 1.2)});
    }
  }
  auto feed = intensity_feed(spec.intensity, substream(spec.seed, 8), zones, start, hours);
  b.carbon_intensity = std::move(feed.hourly);
  b.annual_intensity = std::move(feed.annual);
  if (zoneless_region) {
    // Country-level annual value: mean of the zone annuals of that year.
    std::map<int, std::pair<double, int>> by_year;
    for (const auto& a : b.annual_intensity) {
      by_year[a.year].first += a.g_per_kwh;
      by_year[a.year].second += 1;
    }
    const ZoneId country = names.zones.intern(names.regions.name(*zoneless_region));
    for (const auto& [year, s] : by_year) b.annual_intensity.push_back({country, year, s.first / s.second});
  }

  // Cloud catalog and billing.
  if (spec.with_billing) {
    Rng brng(substream(spec.seed, 9));
    std::vector<SkuId> skus;
    for (std::size_t p = 0; p < roles.cloud_providers.size(); ++p) {
      const ProductId product = names.products.intern(fmt::format("product{}", p));
      for (int k = 0; k < 3; ++k) {
        const SkuId s = names.skus.intern(fmt::format("sku{}-{}", p, k));
        b.skus.push_back({s, product, roles.cloud_providers[p], brng.uniform(0.5, 3.0), "unit", false});
        skus.push_back(s);
      }
      const SkuId commit = names.skus.intern(fmt::format("sku{}-commit", p));
      b.skus.push_back({commit, product, roles.cloud_providers[p], 0.25, "unit", true});
    }
    if (roles.cloud_overhead) b.cloud_overhead_users.push_back(*roles.cloud_overhead);
    std::vector<AccountId> accounts;
    for (int a = 0; a < 4; ++a) accounts.push_back(names.accounts.intern(fmt::format("acct{}", a)));
    for (const Month m : months_covered(start, hours)) {
      for (const SkuId s : skus) {
        for (int r = 0; r <= regions; ++r) {
          // One region past the fleet's: usage where the provider has no energy.
          const RegionId region = names.regions.intern(fmt::format("r{:02}", r));
          for (std::size_t a = 0; a < accounts.size(); ++a) {
            if ((r == 0 && a == 0) || brng.chance(0.6)) {
              b.billing_usage.push_back({s, region, accounts[a], m, brng.uniform(1.0, 1000.0)});
            }
          }
          if (brng.chance(0.5)) b.billing_usage.push_back({s, region, std::nullopt, m, brng.uniform(1.0, 500.0)});
        }
      }
    }
  }
  return b;
}

}  // namespace

Hour ScenarioSpec::default_start() { return parse_hour("2023-09-18T00:00Z"); }

std::string to_string(Preset p) {
  switch (p) {
    case Preset::Figure1:
      return "figure1";
    case Preset::SankeySmall:
      return "sankey-small";
    case Preset::OverheadPool:
      return "overhead-pool";
    case Preset::TwoAccounts:
      return "two-accounts";
    case Preset::BalancedService:
      return "balanced-service";
    case Preset::BlobstoreAds:
      return "blobstore-ads";
  }
  return "unknown";
}

const std::vector<Preset>& all_presets() {
  static const std::vector<Preset> presets = {Preset::Figure1,      Preset::SankeySmall,
                                              Preset::OverheadPool, Preset::TwoAccounts,
                                              Preset::BalancedService, Preset::BlobstoreAds};
  return presets;
}

Preset parse_preset(std::string_view name) {
  for (const Preset p : all_presets()) {
    if (to_string(p) == name) return p;
  }
  throw ConfigError(fmt::format("unknown preset '{}'", name));
}

void validate_spec(const ScenarioSpec& spec) {
  if (!(spec.idle_fraction > 0 && spec.idle_fraction < 1)) {
    throw ConfigError(fmt::format("idle fraction must be in (0,1), got {}", spec.idle_fraction));
  }
  if (!(spec.diurnal_amplitude >= 0 && spec.diurnal_amplitude < 1)) {
    throw ConfigError("diurnal amplitude must be in [0,1)");
  }
  if (spec.intensity.mean_g_per_kwh < 0 || spec.intensity.std_g_per_kwh < 0) {
    throw ConfigError("intensity mean and std must be non-negative");
  }
  if (spec.intensity.mean_g_per_kwh == 0 && spec.intensity.std_g_per_kwh > 0) {
    throw ConfigError("a zero-mean intensity series cannot have a positive std");
  }
  if (!(std::abs(spec.intensity.autocorrelation) < 1)) throw ConfigError("autocorrelation must be in (-1,1)");
  if (spec.figure1_machines < 1) throw ConfigError("figure1 machine count must be at least 1");
  if (spec.preset) return;
  if (spec.machine_count < 1 || spec.hours < 1) throw ConfigError("machine count and hours must be positive");
  if (spec.cluster_count < 0) throw ConfigError("cluster count must be non-negative");
  if (spec.economy.acyclic_depth < 1) throw ConfigError("economy depth must be at least 1");
  if (spec.economy.cyclic && spec.economy.acyclic_depth < 2) {
    throw ConfigError("a cyclic economy needs at least two providers");
  }
  if (spec.user_count < 4 + spec.economy.acyclic_depth) {
    throw ConfigError(fmt::format("{} users cannot host an economy of depth {} (need {})", spec.user_count,
                                  spec.economy.acyclic_depth, 4 + spec.economy.acyclic_depth));
  }
}

InputBundle generate(const ScenarioSpec& spec_in) {
  ScenarioSpec spec = spec_in;
  if (spec.start == Hour{}) spec.start = ScenarioSpec::default_start();
  validate_spec(spec);
  if (!spec.preset) return random_fleet(spec);
  switch (*spec.preset) {
    case Preset::Figure1:
      return figure1(spec);
    case Preset::SankeySmall:
      return sankey_small(spec);
    case Preset::OverheadPool:
      return overhead_pool(spec);
    case Preset::TwoAccounts:
      return two_accounts(spec);
    case Preset::BalancedService:
      return balanced_service(spec);
    case Preset::BlobstoreAds:
      return blobstore_ads(spec);
  }
  throw ConfigError("unknown preset");
}

IntensityTables intensity_feed(const IntensitySpec& spec, std::uint64_t seed, std::span<const ZoneId> zones,
                               Hour start, int hours) {
  if (spec.mean_g_per_kwh < 0 || spec.std_g_per_kwh < 0) {
    throw ConfigError("intensity mean and std must be non-negative");
  }
  IntensityTables out;
  const double m = spec.mean_g_per_kwh;
  const double cv2 = m > 0 ? (spec.std_g_per_kwh / m) * (spec.std_g_per_kwh / m) : 0.0;
  const double sigma = std::sqrt(std::log1p(cv2));
  const double mu = m > 0 ? std::log(m) - 0.5 * sigma * sigma : 0.0;
  const double rho = spec.autocorrelation;
  const double innovation = std::sqrt(1.0 - rho * rho);

  for (std::size_t zi = 0; zi < zones.size(); ++zi) {
    Rng rng(substream(seed, 100 + zi));
    std::map<int, std::pair<double, int>> yearly;
    double z = rng.normal();
    for (int h = 0; h < hours; ++h) {
      if (h > 0) z = rho * z + innovation * rng.normal();
      const Hour hour{start.value + h};
      const double g = spec.std_g_per_kwh == 0 || m == 0 ? m : std::max(0.0, std::exp(mu + sigma * z));
      auto& y = yearly[year_of(hour)];
      y.first += g;
      y.second += 1;
      if (rng.chance(spec.missing_rate)) continue;
      out.hourly.push_back({zones[zi], hour, g});
    }
    for (const auto& [year, s] : yearly) out.annual.push_back({zones[zi], year, s.first / s.second});
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot read {}", path.string()));
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

void write_scenario(const std::filesystem::path& dir, const ScenarioSpec& spec, const InputBundle& bundle) {
  io::write_bundle(dir, bundle);
  nlohmann::ordered_json manifest;
  manifest["schema_version"] = io::kSchemaVersion;
  manifest["generator"] = kGeneratorAlgorithm;
  manifest["seed"] = spec.seed;
  manifest["preset"] = spec.preset ? nlohmann::ordered_json(to_string(*spec.preset)) : nlohmann::ordered_json();
  if (!spec.preset) {
    manifest["machine_count"] = spec.machine_count;
    manifest["user_count"] = spec.user_count;
    manifest["hours"] = spec.hours;
    manifest["economy_depth"] = spec.economy.acyclic_depth;
    manifest["economy_cyclic"] = spec.economy.cyclic;
  }
  auto& files = manifest["files"];
  files = nlohmann::ordered_json::object();
  for (const auto& s : io::bundle_schemas()) {
    const auto path = dir / s.file;
    if (std::filesystem::exists(path)) files[std::string(s.file)] = sha256_file(path);
  }
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  if (!out) throw InputError(fmt::format("cannot write {}", (dir / "manifest.json").string()));
}

}  // namespace carbonalloc::sim
