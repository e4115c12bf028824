#include "carbonalloc/core/ids.hpp"

namespace carbonalloc {

std::uint32_t SymbolTable::intern(std::string_view name) {
  if (auto it = index_.find(name); it != index_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(names_.size());
  names_.emplace_back(name);
  index_.emplace(names_.back(), id);
  return id;
}

bool SymbolTable::find(std::string_view name, std::uint32_t& out) const {
  auto it = index_.find(name);
  if (it == index_.end()) return false;
  out = it->second;
  return true;
}

}  // namespace carbonalloc
