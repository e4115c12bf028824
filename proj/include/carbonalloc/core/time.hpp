#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace carbonalloc {

/// UTC hour [start, start + 1h), identified by hours since the Unix epoch.
struct Hour {
  std::int64_t value = 0;
  friend constexpr auto operator<=>(Hour, Hour) = default;
};

/// UTC calendar day, days since the Unix epoch.
struct Day {
  std::int64_t value = 0;
  friend constexpr auto operator<=>(Day, Day) = default;
};

/// UTC calendar month, months since 1970-01.
struct Month {
  std::int32_t value = 0;
  friend constexpr auto operator<=>(Month, Month) = default;
};

Day day_of(Hour h);
Month month_of(Hour h);
Month month_of(Day d);
int year_of(Hour h);
Hour first_hour(Day d);
Day first_day(Month m);

// ISO-8601 parsing/formatting. Hours use "2023-09-18T14:00Z"; parse also
// accepts a trailing ":00" seconds field and "+00:00".
Hour parse_hour(std::string_view text);
Day parse_day(std::string_view text);
Month parse_month(std::string_view text);
std::string format_hour(Hour h);
std::string format_day(Day d);
std::string format_month(Month m);

}  // namespace carbonalloc

template <>
struct std::hash<carbonalloc::Hour> {
  std::size_t operator()(carbonalloc::Hour h) const noexcept {
    return std::hash<std::int64_t>{}(h.value);
  }
};
template <>
struct std::hash<carbonalloc::Day> {
  std::size_t operator()(carbonalloc::Day d) const noexcept {
    return std::hash<std::int64_t>{}(d.value);
  }
};
template <>
struct std::hash<carbonalloc::Month> {
  std::size_t operator()(carbonalloc::Month m) const noexcept {
    return std::hash<std::int32_t>{}(m.value);
  }
};
