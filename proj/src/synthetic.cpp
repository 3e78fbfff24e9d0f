// SPDX-License-Identifier: Apache-2.0
#include "evcharge/errors.hpp"
#include "evcharge/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace evc::sim {

namespace {

// Distribution sampling on raw engine bits so results do not depend on the standard library.
class Sampler {
public:
    explicit Sampler(std::uint64_t seed) : eng_(seed) {}

    double uniform() { return uniform01(eng_()); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal(double mean, double sd) {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
    int poisson(double mean) {
        if (mean <= 0.0) return 0;
        const double limit = std::exp(-mean);
        int k = 0;
        for (double prod = uniform(); prod > limit; prod *= uniform()) ++k;
        return k;
    }

private:
    std::mt19937_64 eng_;
};

} // namespace

void SyntheticParams::validate() const {
    if (workday_rate < 0.0 || weekend_rate < 0.0) throw DomainError("arrival rates must be non-negative");
    if (morning_share < 0.0 || morning_share > 1.0) throw DomainError("morning share must be in [0, 1]");
    if (scheduled_label_share < 0.0 || scheduled_label_share > 1.0)
        throw DomainError("scheduled label share must be in [0, 1]");
    if (!(stay_min_h > 0.0) || stay_max_h < stay_min_h || !(weekend_stay_min_h > 0.0) ||
        weekend_stay_max_h < weekend_stay_min_h)
        throw DomainError("stay bounds must be positive and ordered");
    if (midday_hi_h < midday_lo_h || weekend_arrival_hi_h < weekend_arrival_lo_h)
        throw DomainError("arrival windows must be ordered");
    if (morning_sd_h < 0.0 || stay_sd_h < 0.0 || weekend_stay_sd_h < 0.0 || energy_log_sd < 0.0)
        throw DomainError("spreads must be non-negative");
    if (!(energy_median_kwh > 0.0) || !(energy_min_kwh >= 0.0) || !(p_max_kw > 0.0))
        throw DomainError("energy parameters must be positive");
}

MonthWorkload generate_synthetic_month(const SyntheticParams& params, int year, unsigned month,
                                       const WorkdayCalendar& cal, std::uint64_t seed) {
    params.validate();
    Sampler rng(seed);
    MonthWorkload out;
    out.year = year;
    out.month = month;
    const Minutes start = month_start(year, month);
    const int days = days_in_month(year, month);
    for (int d = 0; d < days; ++d) {
        const Minutes day0 = start + Minutes(d) * 1440;
        const bool workday = cal.is_workday(day0);
        const int n = rng.poisson(workday ? params.workday_rate : params.weekend_rate);
        for (int i = 0; i < n; ++i) {
            double arrive_h, stay_h;
            if (workday) {
                arrive_h = rng.uniform() < params.morning_share
                               ? rng.normal(params.morning_mean_h, params.morning_sd_h)
                               : rng.uniform(params.midday_lo_h, params.midday_hi_h);
                stay_h = std::clamp(rng.normal(params.stay_mean_h, params.stay_sd_h), params.stay_min_h,
                                    params.stay_max_h);
            } else {
                arrive_h = rng.uniform(params.weekend_arrival_lo_h, params.weekend_arrival_hi_h);
                stay_h = std::clamp(rng.normal(params.weekend_stay_mean_h, params.weekend_stay_sd_h),
                                    params.weekend_stay_min_h, params.weekend_stay_max_h);
            }
            arrive_h = std::clamp(arrive_h, 0.0, 23.0);
            const double energy_raw = params.energy_median_kwh * std::exp(rng.normal(0.0, params.energy_log_sd));
            const bool scheduled = rng.uniform() < params.scheduled_label_share;

            SessionRecord r;
            r.arrival = day0 + Minutes(std::lround(arrive_h * 60.0));
            r.departure = r.arrival + std::max<Minutes>(1, std::lround(stay_h * 60.0));
            const double cap = 0.95 * params.p_max_kw * stay_h;
            r.energy_kwh = std::clamp(energy_raw, std::min(params.energy_min_kwh, cap), cap);
            r.label = scheduled ? Choice::Scheduled : Choice::Regular;
            out.sessions.push_back(std::move(r));
        }
    }
    std::stable_sort(out.sessions.begin(), out.sessions.end(),
                     [](const SessionRecord& a, const SessionRecord& b) { return a.arrival < b.arrival; });
    char buf[32];
    for (std::size_t i = 0; i < out.sessions.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%04d%02u-%04zu", year, month, i + 1);
        out.sessions[i].id = buf;
    }
    return out;
}

} // namespace evc::sim
