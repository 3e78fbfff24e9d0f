// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "evcharge/calendar.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace evc {

using SessionId = std::int64_t;

enum class Choice { Regular, Scheduled, Leave };

std::string_view to_string(Choice c);
Choice parse_choice(std::string_view s);

/// Physical station constants. Defaults are the published simulation parameters.
struct StationParams {
    double p_max_kw = 6.6;
    double efficiency = 1.0;
    double delta_t_h = 0.25;
    int n_chargers = 8;

    /// Energy one charger can deliver in one step at full power.
    double step_energy_kwh() const { return p_max_kw * efficiency * delta_t_h; }
    void validate() const;

    bool operator==(const StationParams&) const = default;
};

/// Discrete grid for one billing cycle. Step tau covers [start + tau*dt, start + (tau+1)*dt).
struct TimeGrid {
    double delta_t_h = 0.25;
    Minutes cycle_start = 0;
    int horizon_len = 1;

    static TimeGrid for_month(int year, unsigned month, double delta_t_h);

    int step_minutes() const;
    Minutes time_of(int tau) const { return cycle_start + Minutes(tau) * step_minutes(); }

    /// Arrivals snap forward to the next grid point, departures back to the previous one.
    /// Results may fall outside [0, horizon_len); callers clip.
    int snap_arrival(Minutes t) const;
    int snap_departure(Minutes t) const;

    void validate() const;
};

struct ChargingSession {
    SessionId id = 0;
    int arrival = 0;
    int departure = 1;
    double energy_req = 0.0;
    Choice choice = Choice::Regular;
    double locked_price = 0.0;
    double delivered = 0.0;

    double remaining() const { return energy_req > delivered ? energy_req - delivered : 0.0; }
    void validate(const StationParams& p) const;
};

/// kW per step over [start, start + values.size()). Zero outside that window.
struct PowerProfile {
    SessionId owner = 0;
    int start = 0;
    std::vector<double> values;

    int end() const { return start + int(values.size()); }
    double at(int tau) const {
        return (tau >= start && tau < end()) ? values[std::size_t(tau - start)] : 0.0;
    }
    void validate(double p_max_kw, double tol = 1e-9) const;
};

struct PriceMenu {
    double z_sch = 0.0;
    double z_reg = 0.0;

    void validate() const;
    bool operator==(const PriceMenu&) const = default;
};

struct StationState {
    int now = 0;
    std::vector<ChargingSession> active;
    /// Committed plans for the SCHEDULED members of `active`.
    std::vector<PowerProfile> schedules;
    double running_peak = 0.0;
    int n_chargers = 8;

    const PowerProfile* schedule_for(SessionId id) const;
    const ChargingSession* find(SessionId id) const;
    void validate() const;
};

/// Peak recursion: D_{tau+1} = max(G_tau, D_tau).
double step_peak(double running_peak, double station_load);

/// Power a REGULAR session draws from step `from` on: p_max until the battery is full,
/// with a partial final step, and nothing after departure.
PowerProfile regular_profile(const ChargingSession& s, int from, const StationParams& p);

/// Aggregate station load at `tau`: scheduled powers plus the REGULAR full-power draws.
double station_load(const StationState& state, std::span<const PowerProfile> profiles, int tau,
                    const StationParams& p);

/// Energy after one step at `power_kw`.
double advance_energy(const ChargingSession& s, double power_kw, const StationParams& p);

} // namespace evc
