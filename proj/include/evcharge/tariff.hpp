// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "evcharge/core.hpp"

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace evc::billing {

/// One named time-of-use window. Minutes of day; `end <= start` wraps past midnight.
struct TouWindow {
    std::string name;
    int start_min = 0;
    int end_min = 0;
    double rate = 0.0;  // $/kWh

    bool operator==(const TouWindow&) const = default;
};

struct TariffSchedule {
    std::string name;
    std::vector<TouWindow> weekday;
    std::vector<TouWindow> weekend;  // empty: same as weekday
    double demand_rate = 20.0;       // $/kW per billing cycle

    /// Rates must be non-negative and each day variant must tile [0, 1440) exactly once.
    void validate() const;
    double energy_rate(int minute_of_day, bool weekend_day) const;

    bool operator==(const TariffSchedule&) const = default;
};

/// Approximation of the PG&E Business EV secondary-voltage TOU rates (June 2023) with a
/// $20/kW demand charge. Overridable from the tariff file.
TariffSchedule default_tariff();

/// A tariff evaluated on one billing cycle's grid.
struct CycleTariff {
    std::vector<double> energy_rate;  // c_tau, $/kWh
    double demand_rate = 0.0;
    double delta_t_h = 0.25;
};

CycleTariff resolve(const TariffSchedule& t, const TimeGrid& grid);

struct SessionLoad {
    SessionId id;
    double power_kw;
};

/// Frozen totals for one billing cycle.
struct ReportRow {
    double energy_cost = 0.0;
    double revenue = 0.0;
    double peak = 0.0;
    double demand_cost = 0.0;
    double cost = 0.0;
    double profit = 0.0;
    int steps = 0;
};

/// Running cost and revenue for the current billing cycle.
class CycleLedger {
public:
    explicit CycleLedger(double demand_rate = 20.0);

    /// Locks the price a session pays for every kWh it receives.
    void register_session(SessionId id, double price);

    /// energy_cost += c_tau * sum(load) * dt; revenue += sum(zeta_i * load_i) * dt; peak via step_peak.
    void accrue_step(const CycleTariff& tariff, std::span<const SessionLoad> loads, int tau,
                     double p_max_kw);

    /// Snapshot of the cycle; clears totals and the running peak for the next cycle.
    ReportRow close_cycle();

    double energy_cost() const { return energy_cost_; }
    double revenue() const { return revenue_; }
    double peak() const { return peak_; }
    double demand_cost() const { return demand_rate_ * peak_; }
    double profit() const { return revenue_ - energy_cost_ - demand_cost(); }
    double demand_rate() const { return demand_rate_; }
    int steps() const { return steps_; }

private:
    double demand_rate_;
    double energy_cost_ = 0.0;
    double revenue_ = 0.0;
    double peak_ = 0.0;
    int steps_ = 0;
    std::unordered_map<SessionId, double> prices_;
};

} // namespace evc::billing
