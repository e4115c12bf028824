#pragma once

#include <deque>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace carbonalloc::io {

/// Whole-file CSV reader. Fields may be double-quoted; embedded quotes are
/// doubled. Rows are returned as views into an internal buffer that stays
/// valid until the next call to next().
class CsvReader {
 public:
  explicit CsvReader(const std::filesystem::path& path);

  const std::vector<std::string>& header() const { return header_; }
  /// Throws InputError unless the header matches `expected` exactly.
  void require_header(std::span<const std::string_view> expected) const;
  /// Column position by name; throws InputError if absent.
  std::size_t column(std::string_view name) const;

  bool next(std::vector<std::string_view>& fields);
  std::size_t line() const { return line_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  bool read_row(std::vector<std::string_view>& fields);

  std::filesystem::path path_;
  std::string data_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
  std::vector<std::string> header_;
  std::deque<std::string> unquoted_;  // stable storage for unescaped quoted fields
};

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::span<const std::string_view> header);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  CsvWriter& field(std::string_view value);
  CsvWriter& field(double value);                 // shortest round-trip form
  CsvWriter& field(double value, int decimals);   // fixed decimals
  CsvWriter& field(long long value);
  void end_row();

 private:
  void separator();

  std::ofstream out_;
  std::string buffer_;
  bool row_started_ = false;
};

double parse_double(std::string_view text, const CsvReader& where);
long long parse_int(std::string_view text, const CsvReader& where);
bool parse_bool(std::string_view text, const CsvReader& where);

}  // namespace carbonalloc::io
