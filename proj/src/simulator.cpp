// SPDX-License-Identifier: Apache-2.0
#include "evcharge/simulator.hpp"

#include "evcharge/errors.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <random>
#include <thread>

namespace evc::sim {

namespace {

constexpr double kEnergyTol = 1e-6;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

struct Snapped {
    const SessionRecord* rec;
    std::size_t index;
    int arrival;
    int departure;
};

struct PendingForecast {
    int step;
    std::vector<double> psi;
    std::size_t audit_index;
};

struct PendingSample {
    int step;
    std::vector<double> features;
    bool workday;
};

} // namespace

std::uint64_t replication_seed(std::uint64_t master, int month_index, int rep) {
    const std::uint64_t key = (std::uint64_t(std::uint32_t(month_index)) << 32) | std::uint32_t(rep);
    return splitmix64(splitmix64(master) ^ splitmix64(key ^ 0x5851f42d4c957f2dULL));
}

double uniform01(std::uint64_t bits) { return double(bits >> 11) * 0x1.0p-53; }

Choice sample_choice(const choice::Distribution& d, std::uint64_t bits) {
    return uniform01(bits) < d.scheduled_share() ? Choice::Scheduled : Choice::Regular;
}

void SessionRecord::validate() const {
    if (!(arrival < departure)) throw InvalidInput("session " + id + ": departure must be after arrival");
    if (!(energy_kwh >= 0.0) || !std::isfinite(energy_kwh))
        throw InvalidInput("session " + id + ": energy must be a non-negative number");
    if (label && *label == Choice::Leave) throw InvalidInput("session " + id + ": LEAVE is not a session label");
}

void SimConfig::validate() const {
    controller.validate();
    tariff.validate();
    features.validate();
    if (!(scheduled_energy_fraction > 0.0) || scheduled_energy_fraction > 1.0)
        throw DomainError("scheduled energy fraction must be in (0, 1]");
    if (replications < 1) throw DomainError("need at least one replication");
    if (threads < 0) throw DomainError("thread count must be non-negative");
    if (controller.mpc_horizon != features.horizon)
        throw DomainError("MPC horizon and forecast horizon must match");
}

MonthResult simulate_month(const MonthWorkload& workload, const SimConfig& cfg, const ctl::Controller& controller,
                           const fc::Forecaster* forecaster, std::uint64_t seed) {
    const auto& settings = controller.settings();
    const StationParams& p = settings.station;
    const bool mpc = settings.mode == ctl::Mode::Mpc;
    if (mpc && !forecaster) throw DomainError("MPC needs a forecaster");
    const bool want_features = mpc || cfg.record_training;
    const int l = cfg.features.horizon;

    const TimeGrid grid = TimeGrid::for_month(workload.year, workload.month, p.delta_t_h);
    const int horizon = grid.horizon_len;
    const billing::CycleTariff tariff = billing::resolve(cfg.tariff, grid);

    MonthResult out;
    out.year = workload.year;
    out.month = workload.month;
    out.seed = seed;

    // snap to the grid: arrivals forward, departures back, at least one step, inside the cycle
    std::vector<Snapped> arrivals;
    for (std::size_t i = 0; i < workload.sessions.size(); ++i) {
        const auto& r = workload.sessions[i];
        r.validate();
        const int a = grid.snap_arrival(r.arrival);
        if (a < 0 || a >= horizon) continue;
        int d = std::min(grid.snap_departure(r.departure), horizon);
        d = std::max(d, a + 1);
        arrivals.push_back({&r, i, a, d});
    }
    std::stable_sort(arrivals.begin(), arrivals.end(), [](const Snapped& x, const Snapped& y) {
        if (x.arrival != y.arrival) return x.arrival < y.arrival;
        return x.rec->arrival < y.rec->arrival;
    });

    std::mt19937_64 eng(seed);
    StationState state;
    state.n_chargers = p.n_chargers;
    billing::CycleLedger ledger(tariff.demand_rate);
    std::vector<PendingForecast> pending;
    std::vector<PendingSample> samples;
    out.load.reserve(std::size_t(horizon));

    std::size_t next = 0;
    std::vector<billing::SessionLoad> loads;
    std::vector<double> powers;
    for (int tau = 0; tau < horizon; ++tau) {
        state.now = tau;
        state.running_peak = ledger.peak();

        for (; next < arrivals.size() && arrivals[next].arrival == tau; ++next) {
            const Snapped& sn = arrivals[next];
            const SessionRecord& rec = *sn.rec;
            ++out.arrivals;
            ArrivalAudit au;
            au.session = rec.id;
            au.step = tau;
            au.time = rec.arrival;
            if (int(state.active.size()) >= p.n_chargers) {
                au.rejected = true;
                ++out.rejected;
                spdlog::debug("session {} rejected: all {} chargers busy", rec.id, p.n_chargers);
                out.audit.push_back(au);
                continue;
            }
            const SessionId id = SessionId(sn.index) + 1;
            const Choice label = rec.label.value_or(Choice::Regular);
            double e_reg = rec.energy_kwh;
            double e_sch = label == Choice::Scheduled ? rec.energy_kwh : cfg.scheduled_energy_fraction * rec.energy_kwh;
            const double cap = p.step_energy_kwh() * (sn.departure - tau);
            if (e_sch > cap || e_reg > cap) {
                ++out.energy_clipped;
                spdlog::debug("session {}: energy clipped to the {:.3f} kWh that fits its stay", rec.id, cap);
                e_sch = std::min(e_sch, cap);
                e_reg = std::min(e_reg, cap);
            }
            const ctl::NewArrival n{id, sn.departure, e_sch, e_reg};
            ChargingSession as_regular{id, tau, sn.departure, e_reg, Choice::Regular, 0.0, 0.0};
            const PowerProfile r_n = regular_profile(as_regular, tau, p);

            std::vector<double> psi;
            fc::FeatureVector features;
            const Minutes clock = grid.time_of(tau);
            const bool workday = cfg.calendar.is_workday(clock);
            if (want_features)
                features = fc::build_features(state, out.load, r_n, clock, cfg.calendar, p, cfg.features);
            if (mpc) {
                auto fv = fc::clip_forecast(forecaster->predict(features, workday), features.planned, forecaster->id());
                ++out.forecasts;
                for (int k = 0; k < l; ++k)
                    if (fv.psi[std::size_t(k)] < features.planned[std::size_t(k)] - 1e-9) ++out.forecast_clip_violations;
                psi = std::move(fv.psi);
            }

            const ctl::ArrivalContext ctx{state, n, tariff, psi};
            ctl::ControllerDecision d;
            try {
                d = controller.decide(ctx);
            } catch (const std::exception& e) {
                char where[64];
                std::snprintf(where, sizeof where, "%04d-%02u step %d", workload.year, workload.month, tau);
                throw Error(std::string(where) + ", session " + rec.id + ": " + e.what());
            }

            const Choice choice = sample_choice(d.probs, eng());

            for (auto& plan : d.shared) {
                auto it = std::find_if(state.schedules.begin(), state.schedules.end(),
                                       [&](const PowerProfile& x) { return x.owner == plan.owner; });
                if (it == state.schedules.end()) throw InvariantError("plan for unknown session");
                *it = std::move(plan);
            }
            const double price = choice == Choice::Scheduled ? d.menu.z_sch : d.menu.z_reg;
            ChargingSession s{id, tau, sn.departure, choice == Choice::Scheduled ? e_sch : e_reg, choice, price, 0.0};
            state.active.push_back(s);
            if (choice == Choice::Scheduled) state.schedules.push_back(d.new_user);
            ledger.register_session(id, price);

            au.menu = d.menu;
            au.probs = d.probs;
            au.expected_cost = d.expected_cost;
            au.choice = choice;
            au.energy_req = s.energy_req;
            au.threshold = d.threshold.value_or(-1.0);
            out.audit.push_back(au);
            if (mpc) pending.push_back({tau, std::move(psi), out.audit.size() - 1});
            if (cfg.record_training) samples.push_back({tau, features.flatten(), workday});
        }

        // execute one step
        loads.clear();
        powers.clear();
        double g = 0.0;
        const double per_kw = p.efficiency * p.delta_t_h;
        for (const auto& s : state.active) {
            double pw = 0.0;
            if (s.choice == Choice::Scheduled) {
                const PowerProfile* plan = state.schedule_for(s.id);
                if (!plan) throw InvariantError("SCHEDULED session without a plan");
                pw = std::clamp(plan->at(tau), 0.0, p.p_max_kw);
            } else {
                pw = std::min(p.p_max_kw, s.remaining() / per_kw);
            }
            if (pw < 1e-12) pw = 0.0;
            powers.push_back(pw);
            loads.push_back({s.id, pw});
            g += pw;
        }
        if (std::count_if(powers.begin(), powers.end(), [](double v) { return v > 0.0; }) > p.n_chargers)
            ++out.invariant_violations;
        ledger.accrue_step(tariff, loads, tau, p.p_max_kw);
        out.load.push_back(g);
        for (std::size_t i = 0; i < state.active.size(); ++i)
            state.active[i].delivered = advance_energy(state.active[i], powers[i], p);

        // departures at the end of the step
        for (std::size_t i = 0; i < state.active.size();) {
            const auto& s = state.active[i];
            if (s.departure > tau + 1) {
                ++i;
                continue;
            }
            const double owed = std::min(s.energy_req, p.step_energy_kwh() * (s.departure - s.arrival));
            if (s.delivered < owed - kEnergyTol) {
                ++out.invariant_violations;
                spdlog::warn("session {} left with {:.6f} of {:.6f} kWh", s.id, s.delivered, owed);
            }
            const SessionId gone = s.id;
            std::erase_if(state.schedules, [&](const PowerProfile& x) { return x.owner == gone; });
            state.active.erase(state.active.begin() + std::ptrdiff_t(i));
        }
    }

    out.row = ledger.close_cycle();
    const double trace_peak = out.load.empty() ? 0.0 : *std::max_element(out.load.begin(), out.load.end());
    if (std::abs(trace_peak - out.row.peak) > 1e-9) ++out.invariant_violations;

    for (auto& f : pending) {
        if (f.step + l > horizon) continue;
        const double e = fc::rmse(f.psi, std::span(out.load).subspan(std::size_t(f.step), std::size_t(l)));
        out.audit[f.audit_index].forecast_rmse = e;
        out.forecast_rmse_sum += e;
        ++out.forecast_rmse_count;
    }
    for (auto& s : samples) {
        if (s.step + l > horizon) continue;
        TrainingSample t;
        t.features = std::move(s.features);
        t.target.assign(out.load.begin() + s.step, out.load.begin() + s.step + l);
        t.workday = s.workday;
        out.samples.push_back(std::move(t));
    }
    return out;
}

RunResult monte_carlo(std::span<const MonthWorkload> months, const SimConfig& cfg, const fc::Forecaster* forecaster,
                      std::string label) {
    cfg.validate();
    if (months.empty()) throw DomainError("need at least one month");
    const ctl::Controller controller(cfg.controller);
    const int reps = cfg.replications;
    const std::size_t jobs = months.size() * std::size_t(reps);
    std::vector<MonthResult> results(jobs);
    std::vector<std::exception_ptr> errors(jobs);

    std::atomic<std::size_t> cursor{0};
    auto worker = [&] {
        for (std::size_t j = cursor++; j < jobs; j = cursor++) {
            const int m = int(j / std::size_t(reps));
            const int r = int(j % std::size_t(reps));
            try {
                results[j] = simulate_month(months[std::size_t(m)], cfg, controller, forecaster,
                                            replication_seed(cfg.seed, m, r));
                results[j].replication = r;
            } catch (...) {
                errors[j] = std::current_exception();
            }
        }
    };
    unsigned n_threads = cfg.threads > 0 ? unsigned(cfg.threads) : std::max(1u, std::thread::hardware_concurrency());
    n_threads = unsigned(std::min<std::size_t>(n_threads, jobs));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    RunResult run;
    run.label = std::move(label);
    run.controller = std::string(ctl::to_string(cfg.controller.mode));
    if (cfg.controller.mode == ctl::Mode::Mpc && forecaster) run.forecaster = forecaster->id();
    run.seed = cfg.seed;
    run.replications = reps;
    run.months = std::move(results);
    return run;
}

Summary RunResult::summary() const {
    Summary s;
    double rmse_sum = 0.0;
    int rmse_n = 0;
    for (const auto& m : months) {
        s.demand_charge += m.row.demand_cost;
        s.tou += m.row.energy_cost;
        s.revenue += m.row.revenue;
        s.peak += m.row.peak;
        s.arrivals += m.arrivals;
        s.rejected += m.rejected;
        s.invariant_violations += m.invariant_violations;
        s.forecast_clip_violations += m.forecast_clip_violations;
        rmse_sum += m.forecast_rmse_sum;
        rmse_n += m.forecast_rmse_count;
    }
    s.cycles = int(months.size());
    if (s.cycles > 0) {
        const double n = s.cycles;
        s.demand_charge /= n;
        s.tou /= n;
        s.revenue /= n;
        s.peak /= n;
    }
    s.cost = s.tou + s.demand_charge;
    s.profit = s.revenue - s.cost;
    if (rmse_n > 0) s.simulation_rmse = rmse_sum / rmse_n;
    return s;
}

std::string run_label(ctl::Mode mode, const std::string& forecaster) {
    switch (mode) {
    case ctl::Mode::Baseline: return "Baseline";
    case ctl::Mode::Threshold: return "Threshold";
    case ctl::Mode::Softplus: return "Softplus";
    case ctl::Mode::Mpc: {
        std::string f = forecaster.empty() ? std::string("naive") : forecaster;
        f[0] = char(std::toupper(static_cast<unsigned char>(f[0])));
        return "MPC (" + f + ")";
    }
    }
    return "?";
}

} // namespace evc::sim
