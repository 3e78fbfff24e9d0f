// SPDX-License-Identifier: Apache-2.0
#include "evcharge/tariff.hpp"

#include "evcharge/errors.hpp"

#include <array>
#include <cmath>

namespace evc::billing {

namespace {

constexpr int kDay = 1440;

bool covers(const TouWindow& w, int minute) {
    if (w.end_min > w.start_min) return minute >= w.start_min && minute < w.end_min;
    return minute >= w.start_min || minute < w.end_min;
}

void validate_day(const std::vector<TouWindow>& windows, const std::string& label) {
    if (windows.empty()) throw InvalidInput("tariff '" + label + "' has no TOU windows");
    std::array<int, kDay> hits{};
    for (const auto& w : windows) {
        if (w.start_min < 0 || w.start_min >= kDay || w.end_min < 0 || w.end_min > kDay)
            throw InvalidInput("TOU window '" + w.name + "' has out-of-range times");
        if (!(w.rate >= 0.0) || !std::isfinite(w.rate))
            throw InvalidInput("TOU window '" + w.name + "' has a negative or non-finite rate");
        const int end = w.end_min == kDay ? 0 : w.end_min;
        TouWindow norm = w;
        norm.end_min = end;
        if (norm.end_min == norm.start_min) {
            for (int m = 0; m < kDay; ++m) ++hits[std::size_t(m)];
            continue;
        }
        for (int m = 0; m < kDay; ++m)
            if (covers(norm, m)) ++hits[std::size_t(m)];
    }
    for (int m = 0; m < kDay; ++m) {
        if (hits[std::size_t(m)] == 0)
            throw InvalidInput("TOU windows of '" + label + "' leave a gap at minute " + std::to_string(m));
        if (hits[std::size_t(m)] > 1)
            throw InvalidInput("TOU windows of '" + label + "' overlap at minute " + std::to_string(m));
    }
}

double lookup(const std::vector<TouWindow>& windows, int minute) {
    for (const auto& w : windows) {
        const int end = w.end_min == kDay ? 0 : w.end_min;
        if (end == w.start_min) return w.rate;
        TouWindow norm = w;
        norm.end_min = end;
        if (covers(norm, minute)) return w.rate;
    }
    throw InvariantError("minute not covered by any TOU window");
}

} // namespace

void TariffSchedule::validate() const {
    if (!(demand_rate >= 0.0) || !std::isfinite(demand_rate))
        throw InvalidInput("demand rate must be non-negative");
    validate_day(weekday, name + " (weekday)");
    if (!weekend.empty()) validate_day(weekend, name + " (weekend)");
}

double TariffSchedule::energy_rate(int minute_of_day, bool weekend_day) const {
    const auto& windows = (weekend_day && !weekend.empty()) ? weekend : weekday;
    return lookup(windows, ((minute_of_day % kDay) + kDay) % kDay);
}

TariffSchedule default_tariff() {
    TariffSchedule t;
    t.name = "PG&E BEV-1 secondary, summer 2023 (approx.)";
    t.demand_rate = 20.0;
    t.weekday = {
        {"off_peak", 0, 9 * 60, 0.20},
        {"super_off_peak", 9 * 60, 14 * 60, 0.17},
        {"off_peak", 14 * 60, 16 * 60, 0.20},
        {"peak", 16 * 60, 21 * 60, 0.40},
        {"off_peak", 21 * 60, 24 * 60, 0.20},
    };
    return t;
}

CycleTariff resolve(const TariffSchedule& t, const TimeGrid& grid) {
    t.validate();
    CycleTariff out;
    out.demand_rate = t.demand_rate;
    out.delta_t_h = grid.delta_t_h;
    out.energy_rate.reserve(std::size_t(grid.horizon_len));
    for (int tau = 0; tau < grid.horizon_len; ++tau) {
        const Minutes m = grid.time_of(tau);
        const CivilTime c = to_civil(m);
        out.energy_rate.push_back(t.energy_rate(c.hour * 60 + c.minute, weekday(m) >= 5));
    }
    return out;
}

CycleLedger::CycleLedger(double demand_rate) : demand_rate_(demand_rate) {
    if (!(demand_rate >= 0.0)) throw DomainError("demand rate must be non-negative");
}

void CycleLedger::register_session(SessionId id, double price) {
    if (!(price >= 0.0)) throw DomainError("locked price must be non-negative");
    prices_[id] = price;
}

void CycleLedger::accrue_step(const CycleTariff& tariff, std::span<const SessionLoad> loads, int tau,
                              double p_max_kw) {
    if (tau < 0 || std::size_t(tau) >= tariff.energy_rate.size())
        throw DomainError("step outside the billing cycle");
    const double dt = tariff.delta_t_h;
    double total = 0.0;
    double revenue = 0.0;
    for (const auto& l : loads) {
        if (!(l.power_kw >= -1e-9) || l.power_kw > p_max_kw + 1e-9)
            throw DomainError("session load outside [0, p_max]");
        auto it = prices_.find(l.id);
        if (it == prices_.end()) throw InvariantError("ledger has no price for session " + std::to_string(l.id));
        total += l.power_kw;
        revenue += it->second * l.power_kw * dt;
    }
    energy_cost_ += tariff.energy_rate[std::size_t(tau)] * total * dt;
    revenue_ += revenue;
    peak_ = step_peak(peak_, std::max(total, 0.0));
    ++steps_;
}

ReportRow CycleLedger::close_cycle() {
    ReportRow r;
    r.energy_cost = energy_cost_;
    r.revenue = revenue_;
    r.peak = peak_;
    r.demand_cost = demand_cost();
    r.cost = r.energy_cost + r.demand_cost;
    r.profit = r.revenue - r.cost;
    r.steps = steps_;
    energy_cost_ = 0.0;
    revenue_ = 0.0;
    peak_ = 0.0;
    steps_ = 0;
    prices_.clear();
    return r;
}

} // namespace evc::billing
