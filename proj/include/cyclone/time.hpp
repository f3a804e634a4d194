#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace cyclone {

using TimePoint = std::chrono::sys_seconds;

inline constexpr std::chrono::hours kStep{6};

// "2020-07-01T06:00:00Z"
std::string format_iso8601(TimePoint t);
// Accepts "YYYY-MM-DDTHH:MM[:SS][Z]".
TimePoint parse_iso8601(std::string_view text);
// "20200701T0600", used in file names.
std::string format_compact(TimePoint t);

TimePoint make_time(int year, unsigned month, unsigned day, int hour = 0);

int hour_of_day(TimePoint t);
int year_of(TimePoint t);

// True when minutes/seconds are zero and the hour is one of 00, 06, 12, 18.
bool on_synoptic_hour(TimePoint t);

inline std::int64_t hours_between(TimePoint a, TimePoint b) {
  return std::chrono::duration_cast<std::chrono::hours>(b - a).count();
}

}  // namespace cyclone
