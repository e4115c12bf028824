#pragma once

#include <stdexcept>
#include <string>

namespace carbonalloc {

/// Malformed or inconsistent input: unreadable files, bad headers, unparsable
/// fields, mismatched identifiers.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid run or scenario configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No user holds any weighted allocation in a cluster-hour.
class NoAllocationsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Neither an hourly nor an annual carbon intensity is available.
class MissingIntensityError : public std::runtime_error {
 public:
  explicit MissingIntensityError(std::string key)
      : std::runtime_error("no carbon intensity for " + key), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// A provider has SKUs but none of them carries billable usage.
class NoBillableUsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cloud emissions exist but no billed usage can absorb them.
class BetaUndefinedError : public std::runtime_error {
 public:
  explicit BetaUndefinedError(std::string key)
      : std::runtime_error("beta undefined for " + key), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

}  // namespace carbonalloc
