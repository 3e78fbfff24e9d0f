// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "evcharge/calendar.hpp"
#include "evcharge/controllers.hpp"
#include "evcharge/forecasting.hpp"
#include "evcharge/tariff.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace evc::sim {

/// One historical (or synthetic) charging session, in wall-clock time.
struct SessionRecord {
    std::string id;
    Minutes arrival = 0;
    Minutes departure = 0;
    double energy_kwh = 0.0;        // delivered in the original session
    std::optional<Choice> label;    // historical REGULAR / SCHEDULED, if known

    void validate() const;
};

/// Sessions for one calendar month.
struct MonthWorkload {
    int year = 2023;
    unsigned month = 6;
    std::vector<SessionRecord> sessions;
};

// ---- synthetic workload ------------------------------------------------------------------------

/// Workplace-shaped demand: a morning arrival peak on workdays with all-day stays, sparse short
/// visits on weekends and holidays.
struct SyntheticParams {
    double workday_rate = 7.5;  // mean sessions per workday
    double weekend_rate = 3.0;  // mean sessions per weekend day or holiday
    double morning_share = 0.85;
    double morning_mean_h = 8.75;
    double morning_sd_h = 0.9;
    double midday_lo_h = 10.0;
    double midday_hi_h = 15.0;
    double stay_mean_h = 8.0;
    double stay_sd_h = 1.5;
    double stay_min_h = 1.0;
    double stay_max_h = 11.0;
    double weekend_arrival_lo_h = 9.0;
    double weekend_arrival_hi_h = 16.0;
    double weekend_stay_mean_h = 3.0;
    double weekend_stay_sd_h = 1.5;
    double weekend_stay_min_h = 0.75;
    double weekend_stay_max_h = 8.0;
    double energy_median_kwh = 10.0;
    double energy_log_sd = 0.5;
    double energy_min_kwh = 1.0;
    double scheduled_label_share = 0.5;
    double p_max_kw = 6.6;

    void validate() const;
    bool operator==(const SyntheticParams&) const = default;
};

MonthWorkload generate_synthetic_month(const SyntheticParams& params, int year, unsigned month,
                                       const WorkdayCalendar& cal, std::uint64_t seed);

// ---- simulation ----------------------------------------------------------------------------------

struct SimConfig {
    ctl::ControllerSettings controller;
    billing::TariffSchedule tariff = billing::default_tariff();
    WorkdayCalendar calendar;
    fc::FeatureLayout features;
    double scheduled_energy_fraction = 0.57;
    std::uint64_t seed = 7;
    int replications = 10;
    int threads = 0;  // 0: hardware concurrency
    /// Keep (features, realized load) pairs for forecaster training.
    bool record_training = false;

    void validate() const;
    bool operator==(const SimConfig&) const = default;
};

struct ArrivalAudit {
    std::string session;
    int step = 0;
    Minutes time = 0;
    bool rejected = false;
    PriceMenu menu;
    choice::Distribution probs;
    double expected_cost = 0.0;
    Choice choice = Choice::Regular;
    double energy_req = 0.0;
    double threshold = -1.0;  // threshold mode only
    double forecast_rmse = -1.0;  // MPC with a full realized window only
};

struct TrainingSample {
    std::vector<double> features;
    std::vector<double> target;
    bool workday = true;
};

/// One (month, replication) run.
struct MonthResult {
    int year = 0;
    unsigned month = 0;
    int replication = 0;
    std::uint64_t seed = 0;
    billing::ReportRow row;
    std::vector<double> load;  // realized station load per step
    std::vector<ArrivalAudit> audit;
    std::vector<TrainingSample> samples;
    int arrivals = 0;
    int rejected = 0;
    int energy_clipped = 0;
    int invariant_violations = 0;
    int forecasts = 0;
    int forecast_clip_violations = 0;  // emitted forecasts below the committed plan
    double forecast_rmse_sum = 0.0;
    int forecast_rmse_count = 0;
};

struct Summary {
    double demand_charge = 0.0;
    double tou = 0.0;
    double revenue = 0.0;
    double cost = 0.0;
    double profit = 0.0;
    double peak = 0.0;
    double simulation_rmse = -1.0;  // -1 when no forecasts were scored
    int cycles = 0;
    int arrivals = 0;
    int rejected = 0;
    int invariant_violations = 0;
    int forecast_clip_violations = 0;
};

struct RunResult {
    std::string label;
    std::string controller;
    std::string forecaster;  // empty unless MPC
    std::uint64_t seed = 0;
    int replications = 0;
    double training_rmse = -1.0;
    std::vector<MonthResult> months;  // ordered by month, then replication

    Summary summary() const;
};

/// Sub-seed for replication `rep` of month index `month_index`.
std::uint64_t replication_seed(std::uint64_t master, int month_index, int rep);

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
double uniform01(std::uint64_t bits);

/// REGULAR or SCHEDULED with LEAVE ruled out, from one engine draw.
Choice sample_choice(const choice::Distribution& d, std::uint64_t bits);

/// Runs one billing cycle. `forecaster` is required in MPC mode and when recording training
/// data; it may be null otherwise.
MonthResult simulate_month(const MonthWorkload& workload, const SimConfig& cfg, const ctl::Controller& controller,
                           const fc::Forecaster* forecaster, std::uint64_t seed);

/// Every month times `cfg.replications`, in parallel, with deterministic ordering.
RunResult monte_carlo(std::span<const MonthWorkload> months, const SimConfig& cfg, const fc::Forecaster* forecaster,
                      std::string label);

/// Display label for a controller/forecaster pair, e.g. "MPC (Naive)".
std::string run_label(ctl::Mode mode, const std::string& forecaster);

} // namespace evc::sim
