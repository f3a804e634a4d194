#include "cyclone/time.hpp"

#include <cstdio>

#include "cyclone/error.hpp"

namespace cyclone {

using namespace std::chrono;

namespace {

struct Civil {
  int year;
  unsigned month, day;
  int hour, minute, second;
};

Civil to_civil(TimePoint t) {
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{t - day_point};
  return {int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day()),
          int(hms.hours().count()), int(hms.minutes().count()),
          int(hms.seconds().count())};
}

}  // namespace

std::string format_iso8601(TimePoint t) {
  const Civil c = to_civil(t);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", c.year,
                c.month, c.day, c.hour, c.minute, c.second);
  return buf;
}

std::string format_compact(TimePoint t) {
  const Civil c = to_civil(t);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d%02u%02uT%02d%02d", c.year, c.month,
                c.day, c.hour, c.minute);
  return buf;
}

TimePoint parse_iso8601(std::string_view text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  const std::string str(text);
  const int fields = std::sscanf(str.c_str(), "%d-%d-%dT%d:%d:%d", &y, &mo, &d,
                                 &h, &mi, &s);
  if (fields < 5) fail(Errc::io, "malformed ISO-8601 time '" + str + "'");
  const year_month_day ymd{year{y}, month{unsigned(mo)}, day{unsigned(d)}};
  if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 59) {
    fail(Errc::io, "invalid ISO-8601 time '" + str + "'");
  }
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s};
}

TimePoint make_time(int y, unsigned mo, unsigned d, int h) {
  return sys_days{year{y} / month{mo} / day{d}} + hours{h};
}

int hour_of_day(TimePoint t) { return to_civil(t).hour; }

int year_of(TimePoint t) { return to_civil(t).year; }

bool on_synoptic_hour(TimePoint t) {
  const Civil c = to_civil(t);
  return c.minute == 0 && c.second == 0 && c.hour % 6 == 0;
}

}  // namespace cyclone
