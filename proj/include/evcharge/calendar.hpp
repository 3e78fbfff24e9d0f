// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>

namespace evc {

/// Wall-clock instants are minutes since 1970-01-01T00:00 (station local time, no zone handling).
using Minutes = std::int64_t;

struct CivilTime {
    int year;
    unsigned month;
    unsigned day;
    int hour;
    int minute;
};

Minutes to_minutes(const CivilTime& t);
CivilTime to_civil(Minutes m);
Minutes month_start(int year, unsigned month);
int days_in_month(int year, unsigned month);

/// 0 = Monday ... 6 = Sunday.
int weekday(Minutes m);
int day_of_year(Minutes m);  // 0-based
int days_in_year(int year);

/// Accepts "YYYY-MM-DDTHH:MM[:SS][Z]" or with a space separator. Seconds are truncated.
Minutes parse_iso8601(std::string_view text);
std::string format_iso8601(Minutes m);
std::chrono::year_month_day parse_date(std::string_view text);
std::string format_date(std::chrono::year_month_day d);

/// Weekends plus an explicit holiday list.
class WorkdayCalendar {
public:
    WorkdayCalendar() = default;
    explicit WorkdayCalendar(std::set<std::chrono::sys_days> holidays) : holidays_(std::move(holidays)) {}

    bool is_workday(Minutes m) const;
    const std::set<std::chrono::sys_days>& holidays() const { return holidays_; }

    bool operator==(const WorkdayCalendar&) const = default;

private:
    std::set<std::chrono::sys_days> holidays_;
};

} // namespace evc
