// SPDX-License-Identifier: Apache-2.0
#include "evcharge/core.hpp"

#include "evcharge/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace evc {

namespace {

constexpr double kPowerTol = 1e-9;

Minutes floor_div(Minutes a, Minutes b) {
    Minutes q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

} // namespace

std::string_view to_string(Choice c) {
    switch (c) {
    case Choice::Regular: return "REGULAR";
    case Choice::Scheduled: return "SCHEDULED";
    case Choice::Leave: return "LEAVE";
    }
    return "?";
}

Choice parse_choice(std::string_view s) {
    if (s == "REGULAR" || s == "regular") return Choice::Regular;
    if (s == "SCHEDULED" || s == "scheduled") return Choice::Scheduled;
    if (s == "LEAVE" || s == "leave") return Choice::Leave;
    throw InvalidInput("unknown choice label '" + std::string(s) + "'");
}

void StationParams::validate() const {
    if (!(p_max_kw > 0.0) || !std::isfinite(p_max_kw)) throw DomainError("p_max must be positive");
    if (!(efficiency > 0.0) || efficiency > 1.0) throw DomainError("efficiency must be in (0, 1]");
    if (!(delta_t_h > 0.0) || !std::isfinite(delta_t_h)) throw DomainError("delta_t must be positive");
    if (n_chargers < 1) throw DomainError("station needs at least one charger");
}

TimeGrid TimeGrid::for_month(int year, unsigned month, double delta_t_h) {
    TimeGrid g;
    g.delta_t_h = delta_t_h;
    g.cycle_start = month_start(year, month);
    const double steps_per_day = 24.0 / delta_t_h;
    g.horizon_len = int(std::lround(days_in_month(year, month) * steps_per_day));
    g.validate();
    return g;
}

int TimeGrid::step_minutes() const { return int(std::lround(delta_t_h * 60.0)); }

int TimeGrid::snap_arrival(Minutes t) const {
    const Minutes step = step_minutes();
    return int(floor_div(t - cycle_start + step - 1, step));
}

int TimeGrid::snap_departure(Minutes t) const { return int(floor_div(t - cycle_start, step_minutes())); }

void TimeGrid::validate() const {
    if (!(delta_t_h > 0.0)) throw DomainError("delta_t must be positive");
    if (horizon_len < 1) throw DomainError("billing cycle must have at least one step");
    const double minutes = delta_t_h * 60.0;
    if (std::abs(minutes - std::round(minutes)) > 1e-9 || 1440 % int(std::lround(minutes)) != 0)
        throw DomainError("delta_t must divide the day into whole minutes");
}

void ChargingSession::validate(const StationParams& p) const {
    if (arrival >= departure) throw DomainError("session " + std::to_string(id) + ": arrival must precede departure");
    if (!(energy_req >= 0.0)) throw DomainError("session " + std::to_string(id) + ": negative energy requirement");
    const double cap = p.step_energy_kwh() * (departure - arrival);
    if (energy_req > cap + 1e-9) throw DomainError("session " + std::to_string(id) + ": energy requirement infeasible");
    if (!(locked_price >= 0.0)) throw DomainError("session " + std::to_string(id) + ": negative price");
}

void PowerProfile::validate(double p_max_kw, double tol) const {
    for (double v : values)
        if (!(v >= -tol && v <= p_max_kw + tol))
            throw DomainError("power profile of session " + std::to_string(owner) + " outside [0, p_max]");
}

void PriceMenu::validate() const {
    if (!std::isfinite(z_sch) || !std::isfinite(z_reg) || z_sch < 0.0 || z_reg < 0.0)
        throw DomainError("price menu entries must be finite and non-negative");
}

const PowerProfile* StationState::schedule_for(SessionId id) const {
    auto it = std::find_if(schedules.begin(), schedules.end(), [id](const PowerProfile& p) { return p.owner == id; });
    return it == schedules.end() ? nullptr : &*it;
}

const ChargingSession* StationState::find(SessionId id) const {
    auto it = std::find_if(active.begin(), active.end(), [id](const ChargingSession& s) { return s.id == id; });
    return it == active.end() ? nullptr : &*it;
}

void StationState::validate() const {
    if (!(running_peak >= 0.0)) throw InvariantError("running peak must be non-negative");
    if (int(active.size()) > n_chargers) throw InvariantError("more active sessions than chargers");
    for (const auto& s : active) {
        if (!(s.arrival <= now && now < s.departure))
            throw InvariantError("session " + std::to_string(s.id) + " is not active at the current step");
        if (s.choice == Choice::Scheduled && schedule_for(s.id) == nullptr)
            throw InvariantError("SCHEDULED session " + std::to_string(s.id) + " has no committed profile");
    }
}

double step_peak(double running_peak, double station_load) {
    if (!(running_peak >= 0.0) || !(station_load >= 0.0))
        throw DomainError("peak recursion needs non-negative inputs");
    return std::max(running_peak, station_load);
}

PowerProfile regular_profile(const ChargingSession& s, int from, const StationParams& p) {
    PowerProfile out;
    out.owner = s.id;
    out.start = from;
    double remaining = s.remaining();
    const double full_step = p.step_energy_kwh();
    for (int tau = from; tau < s.departure && remaining > 1e-12; ++tau) {
        const double e = std::min(full_step, remaining);
        out.values.push_back(e / (p.efficiency * p.delta_t_h));
        remaining -= e;
    }
    return out;
}

double station_load(const StationState& state, std::span<const PowerProfile> profiles, int tau,
                    const StationParams& p) {
    double load = 0.0;
    for (const auto& s : state.active) {
        if (tau >= s.departure) continue;
        if (s.choice == Choice::Scheduled) {
            auto it = std::find_if(profiles.begin(), profiles.end(),
                                   [&](const PowerProfile& pr) { return pr.owner == s.id; });
            if (it == profiles.end())
                throw InvariantError("no profile for SCHEDULED session " + std::to_string(s.id));
            load += it->at(tau);
        } else if (s.choice == Choice::Regular) {
            load += regular_profile(s, state.now, p).at(tau);
        }
    }
    return load;
}

double advance_energy(const ChargingSession& s, double power_kw, const StationParams& p) {
    if (!(power_kw >= -kPowerTol) || power_kw > p.p_max_kw + kPowerTol)
        throw DomainError("charging power outside [0, p_max]");
    return s.delivered + p.delta_t_h * p.efficiency * std::clamp(power_kw, 0.0, p.p_max_kw);
}

} // namespace evc
