#pragma once

#include <filesystem>
#include <string_view>
#include <vector>

#include "carbonalloc/core/model.hpp"

namespace carbonalloc::io {

inline constexpr int kSchemaVersion = 1;

/// One CSV table of a bundle directory.
struct TableSchema {
  std::string_view file;
  std::vector<std::string_view> columns;
  bool required;
};

const std::vector<TableSchema>& bundle_schemas();

/// Reads every table of a bundle directory. Missing required files, header
/// mismatches and unparsable fields raise InputError. Optional tables that are
/// absent load as empty.
InputBundle load_bundle(const std::filesystem::path& dir);

/// Writes every table, rows in input order, numbers in shortest round-trip form.
void write_bundle(const std::filesystem::path& dir, const InputBundle& bundle);

}  // namespace carbonalloc::io
