// SPDX-License-Identifier: Apache-2.0
#include "evcharge/errors.hpp"
#include "evcharge/forecasting.hpp"

#include <cmath>
#include <numbers>

namespace evc::fc {

void FeatureLayout::validate() const {
    if (lags < 1 || horizon < 1) throw DomainError("feature layout needs positive lag and horizon counts");
}

std::vector<std::string> FeatureLayout::names() const {
    std::vector<std::string> out;
    for (int i = lags; i >= 1; --i) out.push_back("lag_" + std::to_string(i));
    for (int i = 0; i < horizon; ++i) out.push_back("plan_" + std::to_string(i));
    for (const char* s : {"n_active", "n_chargers", "day_sin", "day_cos", "week_sin", "week_cos", "year_sin", "year_cos",
                          "workday_24h", "history_padded"})
        out.emplace_back(s);
    return out;
}

std::vector<double> FeatureVector::flatten() const {
    std::vector<double> out(recent_loads);
    out.insert(out.end(), planned.begin(), planned.end());
    out.push_back(n_active);
    out.push_back(n_chargers);
    out.insert(out.end(), positional.begin(), positional.end());
    out.push_back(workday_24h ? 1.0 : 0.0);
    out.push_back(history_padded ? 1.0 : 0.0);
    return out;
}

FeatureVector FeatureVector::unflatten(std::span<const double> x, const FeatureLayout& layout) {
    if (int(x.size()) != layout.size()) throw DomainError("feature row has the wrong width");
    const auto lags = std::size_t(layout.lags), h = std::size_t(layout.horizon);
    FeatureVector f;
    f.recent_loads.assign(x.begin(), x.begin() + std::ptrdiff_t(lags));
    f.planned.assign(x.begin() + std::ptrdiff_t(lags), x.begin() + std::ptrdiff_t(lags + h));
    std::size_t i = lags + h;
    f.n_active = int(std::lround(x[i++]));
    f.n_chargers = int(std::lround(x[i++]));
    for (auto& v : f.positional) v = x[i++];
    f.workday_24h = x[i++] != 0.0;
    f.history_padded = x[i++] != 0.0;
    return f;
}

std::vector<double> planned_profile(const StationState& state, const PowerProfile& new_user_regular,
                                    const StationParams& p, int horizon) {
    std::vector<double> out(std::size_t(horizon), 0.0);
    for (const auto& a : state.active) {
        if (a.departure <= state.now) continue;
        if (a.choice == Choice::Scheduled) {
            const PowerProfile* pr = state.schedule_for(a.id);
            if (!pr) throw InvariantError("SCHEDULED session " + std::to_string(a.id) + " has no committed profile");
            for (int k = 0; k < horizon; ++k) out[std::size_t(k)] += pr->at(state.now + k);
        } else if (a.choice == Choice::Regular) {
            const PowerProfile r = regular_profile(a, state.now, p);
            for (int k = 0; k < horizon; ++k) out[std::size_t(k)] += r.at(state.now + k);
        }
    }
    for (int k = 0; k < horizon; ++k) out[std::size_t(k)] += new_user_regular.at(state.now + k);
    return out;
}

FeatureVector build_features(const StationState& state, std::span<const double> history,
                             const PowerProfile& new_user_regular, Minutes clock, const WorkdayCalendar& cal,
                             const StationParams& p, const FeatureLayout& layout) {
    layout.validate();
    FeatureVector f;
    const std::size_t k = std::size_t(layout.lags);
    f.recent_loads.assign(k, 0.0);
    const std::size_t have = std::min(k, history.size());
    std::copy(history.end() - std::ptrdiff_t(have), history.end(), f.recent_loads.end() - std::ptrdiff_t(have));
    f.history_padded = have < k;
    f.planned = planned_profile(state, new_user_regular, p, layout.horizon);

    int active = 1;
    for (const auto& a : state.active)
        if (a.departure > state.now) ++active;
    f.n_active = active;
    f.n_chargers = state.n_chargers;

    constexpr double two_pi = 2.0 * std::numbers::pi;
    const Minutes minute_of_day = ((clock % 1440) + 1440) % 1440;
    const double day_phase = double(minute_of_day) / 1440.0;
    const double week_phase = (weekday(clock) * 1440.0 + double(minute_of_day)) / (7.0 * 1440.0);
    const int year = to_civil(clock).year;
    const double year_phase = (day_of_year(clock) + day_phase) / double(days_in_year(year));
    f.positional = {std::sin(two_pi * day_phase),  std::cos(two_pi * day_phase),  std::sin(two_pi * week_phase),
                    std::cos(two_pi * week_phase), std::sin(two_pi * year_phase), std::cos(two_pi * year_phase)};
    f.workday_24h = cal.is_workday(clock + 1440);
    return f;
}

} // namespace evc::fc
