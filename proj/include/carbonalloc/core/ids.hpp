#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace carbonalloc {

/// Interned identifier. The tag keeps user ids, cluster ids, machine ids etc.
/// from being mixed up; the value indexes into the matching SymbolTable.
template <class Tag>
struct Id {
  std::uint32_t value = 0;

  friend constexpr auto operator<=>(Id, Id) = default;
};

using UserId = Id<struct UserTag>;
using ClusterId = Id<struct ClusterTag>;
using MachineId = Id<struct MachineTag>;
using ZoneId = Id<struct ZoneTag>;
using RegionId = Id<struct RegionTag>;
using ServiceId = Id<struct ServiceTag>;
using SkuId = Id<struct SkuTag>;
using ProductId = Id<struct ProductTag>;
using AccountId = Id<struct AccountTag>;

/// Append-only string interner. Ids are dense and assigned in first-seen order.
class SymbolTable {
 public:
  std::uint32_t intern(std::string_view name);
  /// False when the name was never interned.
  bool find(std::string_view name, std::uint32_t& out) const;
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
      return std::hash<std::string_view>{}(s);
    }
  };
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t, Hash, std::equal_to<>> index_;
};

template <class Tag>
class TypedSymbols {
 public:
  using IdType = Id<Tag>;
  IdType intern(std::string_view name) { return IdType{table_.intern(name)}; }
  bool find(std::string_view name, IdType& out) const { return table_.find(name, out.value); }
  const std::string& name(IdType id) const { return table_.name(id.value); }
  std::size_t size() const { return table_.size(); }

 private:
  SymbolTable table_;
};

/// Reserved user that absorbs shared idle power in cluster-hours where no user
/// holds any weighted resource allocation.
inline constexpr std::string_view kUnallocatedOverheadUser = "__unallocated_overhead__";

/// All name tables of one input bundle. The reserved overhead user is always
/// user id 0.
struct Names {
  Names() { users.intern(kUnallocatedOverheadUser); }

  TypedSymbols<UserTag> users;
  TypedSymbols<ClusterTag> clusters;
  TypedSymbols<MachineTag> machines;
  TypedSymbols<ZoneTag> zones;
  TypedSymbols<RegionTag> regions;
  TypedSymbols<ServiceTag> services;
  TypedSymbols<SkuTag> skus;
  TypedSymbols<ProductTag> products;
  TypedSymbols<AccountTag> accounts;

  static constexpr UserId unallocated_overhead() { return UserId{0}; }
};

inline void hash_combine(std::size_t& seed, std::size_t v) noexcept {
  seed ^= v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
}

}  // namespace carbonalloc

template <class Tag>
struct std::hash<carbonalloc::Id<Tag>> {
  std::size_t operator()(carbonalloc::Id<Tag> id) const noexcept { return id.value; }
};
