#include "carbonalloc/core/time.hpp"

#include <charconv>
#include <chrono>

#include <fmt/format.h>

#include "carbonalloc/core/errors.hpp"

namespace carbonalloc {
namespace {

using namespace std::chrono;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

int read_int(std::string_view text, std::size_t pos, std::size_t len, std::string_view whole) {
  if (pos + len > text.size()) throw InputError(fmt::format("malformed timestamp '{}'", whole));
  int v = 0;
  auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, v);
  if (ec != std::errc{} || ptr != text.data() + pos + len) {
    throw InputError(fmt::format("malformed timestamp '{}'", whole));
  }
  return v;
}

void expect(std::string_view text, std::size_t pos, char c, std::string_view whole) {
  if (pos >= text.size() || text[pos] != c) {
    throw InputError(fmt::format("malformed timestamp '{}'", whole));
  }
}

year_month_day ymd_of(Day d) { return year_month_day{sys_days{days{d.value}}}; }

Day make_day(int y, int m, int d, std::string_view whole) {
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw InputError(fmt::format("invalid date '{}'", whole));
  return Day{sys_days{ymd}.time_since_epoch().count()};
}

}  // namespace

Day day_of(Hour h) { return Day{floor_div(h.value, 24)}; }

Month month_of(Day d) {
  const auto ymd = ymd_of(d);
  return Month{(static_cast<int>(ymd.year()) - 1970) * 12 +
               static_cast<int>(static_cast<unsigned>(ymd.month())) - 1};
}

Month month_of(Hour h) { return month_of(day_of(h)); }

int year_of(Hour h) { return static_cast<int>(ymd_of(day_of(h)).year()); }

Hour first_hour(Day d) { return Hour{d.value * 24}; }

Day first_day(Month m) {
  const auto y = 1970 + static_cast<int>(floor_div(m.value, 12));
  const auto mo = static_cast<unsigned>(m.value - (y - 1970) * 12 + 1);
  return Day{sys_days{year{y} / month{mo} / day{1}}.time_since_epoch().count()};
}

Day parse_day(std::string_view text) {
  if (text.size() != 10) throw InputError(fmt::format("malformed date '{}'", text));
  const int y = read_int(text, 0, 4, text);
  expect(text, 4, '-', text);
  const int m = read_int(text, 5, 2, text);
  expect(text, 7, '-', text);
  const int d = read_int(text, 8, 2, text);
  return make_day(y, m, d, text);
}

Hour parse_hour(std::string_view text) {
  if (text.size() < 17) throw InputError(fmt::format("malformed timestamp '{}'", text));
  const Day d = parse_day(text.substr(0, 10));
  expect(text, 10, 'T', text);
  const int hh = read_int(text, 11, 2, text);
  expect(text, 13, ':', text);
  const int mm = read_int(text, 14, 2, text);
  std::string_view rest = text.substr(16);
  if (rest.starts_with(":")) {
    if (read_int(rest, 1, 2, text) != 0) {
      throw InputError(fmt::format("timestamp '{}' is not on an hour boundary", text));
    }
    rest.remove_prefix(3);
  }
  if (rest != "Z" && rest != "+00:00") {
    throw InputError(fmt::format("timestamp '{}' is not UTC", text));
  }
  if (hh > 23) throw InputError(fmt::format("malformed timestamp '{}'", text));
  if (mm != 0) throw InputError(fmt::format("timestamp '{}' is not on an hour boundary", text));
  return Hour{d.value * 24 + hh};
}

Month parse_month(std::string_view text) {
  if (text.size() != 7) throw InputError(fmt::format("malformed month '{}'", text));
  const int y = read_int(text, 0, 4, text);
  expect(text, 4, '-', text);
  const int m = read_int(text, 5, 2, text);
  if (m < 1 || m > 12) throw InputError(fmt::format("malformed month '{}'", text));
  return Month{(y - 1970) * 12 + m - 1};
}

std::string format_day(Day d) {
  const auto ymd = ymd_of(d);
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

std::string format_hour(Hour h) {
  const Day d = day_of(h);
  return fmt::format("{}T{:02d}:00Z", format_day(d), h.value - d.value * 24);
}

std::string format_month(Month m) {
  const auto y = 1970 + static_cast<int>(floor_div(m.value, 12));
  const auto mo = m.value - (y - 1970) * 12 + 1;
  return fmt::format("{:04d}-{:02d}", y, mo);
}

}  // namespace carbonalloc
