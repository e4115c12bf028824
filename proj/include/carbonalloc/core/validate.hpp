#pragma once

#include <compare>
#include <span>
#include <string>
#include <vector>

#include "carbonalloc/core/model.hpp"

namespace carbonalloc {

struct Violation {
  std::string kind;    // e.g. "missing_owner", "duplicate_sample"
  std::string entity;  // offending key, human readable
  std::string detail;

  friend auto operator<=>(const Violation&, const Violation&) = default;
};

/// Sorted, so the report does not depend on input record order.
using ValidationReport = std::vector<Violation>;

/// Structural checks on machines, their samples and cluster membership.
ValidationReport validate_fleet(std::span<const MachineRecord> machines,
                                std::span<const PowerSample> samples,
                                const ClusterTopology& topology, const Names& names);

/// validate_fleet plus every other table of the bundle (usage, costs, feeds, catalog).
ValidationReport validate_bundle(const InputBundle& bundle);

}  // namespace carbonalloc
