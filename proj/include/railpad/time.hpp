#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace railpad {

using Timestamp = std::chrono::sys_seconds;

/// Parses `YYYY-MM-DDTHH:MM:SSZ` (the trailing `Z` is optional).
Timestamp parse_iso8601(std::string_view text);
std::string format_iso8601(Timestamp t);

/// Calendar month label `YYYY-MM` in UTC.
std::string month_label(Timestamp t);

/// First instant of the calendar month containing `t`.
Timestamp month_start(Timestamp t);

/// Calendar-month arithmetic on month starts; `n` may be negative.
Timestamp add_months(Timestamp month_begin, int n);

/// Whole calendar months from the month of `from` to the month of `to`.
int months_between(Timestamp from, Timestamp to);

}  // namespace railpad
