#include "carbonalloc/io/csv.hpp"

#include <charconv>
#include <sstream>

#include <fmt/format.h>

#include "carbonalloc/core/errors.hpp"

namespace carbonalloc::io {

CsvReader::CsvReader(const std::filesystem::path& path) : path_(path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  data_ = std::move(ss).str();
  std::vector<std::string_view> fields;
  if (!read_row(fields)) throw InputError(fmt::format("{}: missing header row", path.string()));
  header_.assign(fields.begin(), fields.end());
}

void CsvReader::require_header(std::span<const std::string_view> expected) const {
  bool ok = header_.size() == expected.size();
  for (std::size_t i = 0; ok && i < expected.size(); ++i) ok = header_[i] == expected[i];
  if (!ok) {
    std::string want;
    for (auto e : expected) want += (want.empty() ? "" : ",") + std::string(e);
    throw InputError(fmt::format("{}: header must be '{}'", path_.string(), want));
  }
}

std::size_t CsvReader::column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == name) return i;
  }
  throw InputError(fmt::format("{}: missing column '{}'", path_.string(), name));
}

bool CsvReader::next(std::vector<std::string_view>& fields) {
  while (read_row(fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != header_.size()) {
      throw InputError(fmt::format("{}:{}: expected {} fields, found {}", path_.string(), line_,
                                   header_.size(), fields.size()));
    }
    return true;
  }
  return false;
}

bool CsvReader::read_row(std::vector<std::string_view>& fields) {
  fields.clear();
  unquoted_.clear();
  if (pos_ >= data_.size()) return false;
  ++line_;
  const std::size_t n = data_.size();
  while (true) {
    if (pos_ < n && data_[pos_] == '"') {
      std::string value;
      ++pos_;
      while (true) {
        if (pos_ >= n) throw InputError(fmt::format("{}:{}: unterminated quote", path_.string(), line_));
        const char ch = data_[pos_++];
        if (ch == '"') {
          if (pos_ < n && data_[pos_] == '"') {
            value.push_back('"');
            ++pos_;
          } else {
            break;
          }
        } else {
          if (ch == '\n') ++line_;
          value.push_back(ch);
        }
      }
      unquoted_.push_back(std::move(value));
      fields.emplace_back(unquoted_.back());
    } else {
      const std::size_t start = pos_;
      while (pos_ < n && data_[pos_] != ',' && data_[pos_] != '\n' && data_[pos_] != '\r') ++pos_;
      fields.emplace_back(data_.data() + start, pos_ - start);
    }
    if (pos_ < n && data_[pos_] == ',') {
      ++pos_;
      continue;
    }
    if (pos_ < n && data_[pos_] == '\r') ++pos_;
    if (pos_ < n && data_[pos_] == '\n') ++pos_;
    break;
  }
  return true;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::span<const std::string_view> header)
    : out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw InputError(fmt::format("cannot write {}", path.string()));
  buffer_.reserve(1 << 16);
  for (auto h : header) field(h);
  end_row();
}

CsvWriter::~CsvWriter() {
  out_.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
}

void CsvWriter::separator() {
  if (row_started_) buffer_.push_back(',');
  row_started_ = true;
}

CsvWriter& CsvWriter::field(std::string_view value) {
  separator();
  if (value.find_first_of(",\"\n\r") == std::string_view::npos) {
    buffer_.append(value);
  } else {
    buffer_.push_back('"');
    for (char ch : value) {
      if (ch == '"') buffer_.push_back('"');
      buffer_.push_back(ch);
    }
    buffer_.push_back('"');
  }
  return *this;
}

CsvWriter& CsvWriter::field(double value) {
  separator();
  fmt::format_to(std::back_inserter(buffer_), "{}", value);
  return *this;
}

CsvWriter& CsvWriter::field(double value, int decimals) {
  separator();
  // Avoid "-0" in reports.
  if (value == 0.0) value = 0.0;
  auto text = fmt::format("{:.{}f}", value, decimals);
  if (text.starts_with('-') && text.find_first_not_of("-0.") == std::string::npos) text.erase(0, 1);
  buffer_.append(text);
  return *this;
}

CsvWriter& CsvWriter::field(long long value) {
  separator();
  fmt::format_to(std::back_inserter(buffer_), "{}", value);
  return *this;
}

void CsvWriter::end_row() {
  buffer_.push_back('\n');
  row_started_ = false;
  if (buffer_.size() > (1 << 20)) {
    out_.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
    buffer_.clear();
  }
}

double parse_double(std::string_view text, const CsvReader& where) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw InputError(fmt::format("{}:{}: not a number: '{}'", where.path().string(), where.line(), text));
  }
  return v;
}

long long parse_int(std::string_view text, const CsvReader& where) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw InputError(fmt::format("{}:{}: not an integer: '{}'", where.path().string(), where.line(), text));
  }
  return v;
}

bool parse_bool(std::string_view text, const CsvReader& where) {
  if (text == "true" || text == "1" || text == "TRUE" || text == "True") return true;
  if (text == "false" || text == "0" || text == "FALSE" || text == "False" || text.empty()) return false;
  throw InputError(fmt::format("{}:{}: not a boolean: '{}'", where.path().string(), where.line(), text));
}

}  // namespace carbonalloc::io
