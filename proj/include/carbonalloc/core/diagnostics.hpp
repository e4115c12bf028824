#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace carbonalloc {

struct Diagnostic {
  std::string code;
  std::string message;
};

/// Non-fatal warnings collected while running a stage.
class Diagnostics {
 public:
  void warn(std::string code, std::string message) {
    entries_.push_back({std::move(code), std::move(message)});
  }
  const std::vector<Diagnostic>& entries() const { return entries_; }
  std::size_t count(std::string_view code) const {
    std::size_t n = 0;
    for (const auto& d : entries_) n += d.code == code ? 1 : 0;
    return n;
  }
  bool empty() const { return entries_.empty(); }

 private:
  std::vector<Diagnostic> entries_;
};

}  // namespace carbonalloc
