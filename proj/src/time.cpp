#include "railpad/time.hpp"

#include <cstdio>

#include "railpad/error.hpp"
#include "railpad/text.hpp"

namespace railpad {

using namespace std::chrono;

Timestamp parse_iso8601(std::string_view text) {
  text = text::trim(text);
  if (!text.empty() && text.back() == 'Z') text.remove_suffix(1);
  // YYYY-MM-DDTHH:MM:SS
  if (text.size() != 19 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
      text[13] != ':' || text[16] != ':') {
    throw DataError("bad ISO-8601 timestamp: '" + std::string(text) + "'");
  }
  const auto y = static_cast<int>(text::parse_int(text.substr(0, 4)));
  const auto mo = static_cast<unsigned>(text::parse_int(text.substr(5, 2)));
  const auto d = static_cast<unsigned>(text::parse_int(text.substr(8, 2)));
  const auto hh = text::parse_int(text.substr(11, 2));
  const auto mm = text::parse_int(text.substr(14, 2));
  const auto ss = text::parse_int(text.substr(17, 2));
  const year_month_day ymd{year{y}, month{mo}, day{d}};
  if (!ymd.ok() || hh > 23 || mm > 59 || ss > 60) {
    throw DataError("invalid calendar timestamp: '" + std::string(text) + "'");
  }
  return sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss};
}

std::string format_iso8601(Timestamp t) {
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{t - day_point};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

std::string month_label(Timestamp t) {
  const year_month_day ymd{floor<days>(t)};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()));
  return buf;
}

Timestamp month_start(Timestamp t) {
  const year_month_day ymd{floor<days>(t)};
  return sys_days{ymd.year() / ymd.month() / 1};
}

Timestamp add_months(Timestamp month_begin, int n) {
  const year_month_day ymd{floor<days>(month_begin)};
  const year_month ym = ymd.year() / ymd.month();
  return sys_days{(ym + months{n}) / 1};
}

int months_between(Timestamp from, Timestamp to) {
  const year_month_day a{floor<days>(from)};
  const year_month_day b{floor<days>(to)};
  return (static_cast<int>(b.year()) - static_cast<int>(a.year())) * 12 +
         (static_cast<int>(static_cast<unsigned>(b.month())) - static_cast<int>(static_cast<unsigned>(a.month())));
}

}  // namespace railpad
