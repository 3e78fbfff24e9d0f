// SPDX-License-Identifier: Apache-2.0
#include "evcharge/calendar.hpp"

#include "evcharge/errors.hpp"

#include <charconv>
#include <cstdio>

namespace evc {

namespace {

using namespace std::chrono;

constexpr Minutes kMinutesPerDay = 24 * 60;

Minutes floor_div(Minutes a, Minutes b) {
    Minutes q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

int parse_int(std::string_view s, std::string_view whole) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw InvalidInput("malformed timestamp '" + std::string(whole) + "'");
    return v;
}

} // namespace

Minutes to_minutes(const CivilTime& t) {
    const year_month_day ymd{year{t.year}, month{t.month}, day{t.day}};
    if (!ymd.ok()) throw InvalidInput("invalid calendar date");
    const auto days = sys_days{ymd}.time_since_epoch().count();
    return static_cast<Minutes>(days) * kMinutesPerDay + t.hour * 60 + t.minute;
}

CivilTime to_civil(Minutes m) {
    const Minutes d = floor_div(m, kMinutesPerDay);
    const Minutes rem = m - d * kMinutesPerDay;
    const year_month_day ymd{sys_days{days{d}}};
    return CivilTime{int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day()),
                     int(rem / 60), int(rem % 60)};
}

Minutes month_start(int y, unsigned mo) { return to_minutes(CivilTime{y, mo, 1, 0, 0}); }

int days_in_month(int y, unsigned mo) {
    return int(unsigned(year_month_day_last{year{y} / month{mo} / last}.day()));
}

int weekday(Minutes m) {
    const Minutes d = floor_div(m, kMinutesPerDay);
    const std::chrono::weekday wd{sys_days{days{d}}};
    return int(wd.iso_encoding()) - 1;
}

int day_of_year(Minutes m) {
    const CivilTime c = to_civil(m);
    const auto jan1 = sys_days{year{c.year} / January / 1};
    const auto today = sys_days{year{c.year} / month{c.month} / day{c.day}};
    return int((today - jan1).count());
}

int days_in_year(int y) { return year{y}.is_leap() ? 366 : 365; }

Minutes parse_iso8601(std::string_view text) {
    std::string_view s = text;
    while (!s.empty() && (s.back() == 'Z' || s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    if (s.size() < 16 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':')
        throw InvalidInput("malformed timestamp '" + std::string(text) + "'");
    CivilTime t{};
    t.year = parse_int(s.substr(0, 4), text);
    t.month = unsigned(parse_int(s.substr(5, 2), text));
    t.day = unsigned(parse_int(s.substr(8, 2), text));
    t.hour = parse_int(s.substr(11, 2), text);
    t.minute = parse_int(s.substr(14, 2), text);
    if (s.size() > 16) {
        if (s[16] != ':' || s.size() < 19)
            throw InvalidInput("malformed timestamp '" + std::string(text) + "'");
        const int sec = parse_int(s.substr(17, 2), text);
        if (sec < 0 || sec > 60) throw InvalidInput("malformed timestamp '" + std::string(text) + "'");
    }
    if (t.hour < 0 || t.hour > 23 || t.minute < 0 || t.minute > 59)
        throw InvalidInput("malformed timestamp '" + std::string(text) + "'");
    return to_minutes(t);
}

std::string format_iso8601(Minutes m) {
    const CivilTime c = to_civil(m);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:00", c.year, c.month, c.day, c.hour, c.minute);
    return buf;
}

year_month_day parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-')
        throw InvalidInput("malformed date '" + std::string(text) + "'");
    const year_month_day ymd{year{parse_int(text.substr(0, 4), text)},
                             month{unsigned(parse_int(text.substr(5, 2), text))},
                             day{unsigned(parse_int(text.substr(8, 2), text))}};
    if (!ymd.ok()) throw InvalidInput("invalid date '" + std::string(text) + "'");
    return ymd;
}

std::string format_date(year_month_day d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(d.year()), unsigned(d.month()), unsigned(d.day()));
    return buf;
}

bool WorkdayCalendar::is_workday(Minutes m) const {
    if (weekday(m) >= 5) return false;
    const sys_days d{days{floor_div(m, kMinutesPerDay)}};
    return !holidays_.contains(d);
}

} // namespace evc
