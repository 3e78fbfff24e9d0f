// SPDX-License-Identifier: Apache-2.0
#include "evcharge/controllers.hpp"

#include "evcharge/errors.hpp"
#include "evcharge/forecasting.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace evc::ctl {

namespace {

constexpr double kTieTol = 1e-9;
constexpr double kEnergyTol = 1e-6;

bool canonical_less(const PriceMenu& a, const PriceMenu& b) {
    if (a.z_reg != b.z_reg) return a.z_reg < b.z_reg;
    return a.z_sch < b.z_sch;
}

// Menu-independent part of the arrival LP. Objective coefficients are rebuilt per menu from
// the cached per-variable rates.
struct Structure {
    ScenarioLp base;
    std::vector<double> shared_rate;  // (c - zeta) dt on shared variables
    std::vector<double> new_rate;     // c dt on user n's variables
    double const_shared = 0.0;        // existing REGULAR users, (c - zeta) r dt summed
    double reg_energy_cost = 0.0;     // user n as REGULAR: c r dt summed
    double reg_energy = 0.0;          // and r dt summed
    double dt = 0.25;
    double d_prev = 0.0;
    double demand_rate = 0.0;
    double kappa = 1.0;
    double lo_sch = 0.0;
    double lo_reg = 0.0;
    Mode mode = Mode::Baseline;
};

void check_arrival(const ArrivalContext& ctx, const StationParams& p) {
    const auto& n = ctx.arrival;
    const int now = ctx.state.now;
    if (n.departure <= now) throw DomainError("arrival " + std::to_string(n.id) + " departs before it arrives");
    if (!(n.energy_scheduled >= 0.0) || !(n.energy_regular >= 0.0))
        throw DomainError("arrival " + std::to_string(n.id) + " has a negative energy request");
    if (n.energy_scheduled > p.step_energy_kwh() * (n.departure - now) + 1e-9)
        throw DomainError("arrival " + std::to_string(n.id) + " requests more energy than fits before departure");
    if (std::size_t(n.departure) > ctx.tariff.energy_rate.size())
        throw DomainError("arrival " + std::to_string(n.id) + " departs after the billing cycle ends");
}

ProfileVars add_profile_block(lp::LinearProgram& prog, SessionId owner, int start, int count, double energy,
                              const StationParams& p, double dt, bool exact) {
    ProfileVars v{owner, start, prog.num_variables(), count};
    std::vector<lp::Term> row;
    for (int k = 0; k < count; ++k) row.push_back({prog.add_variable(0.0, 0.0, p.p_max_kw), p.efficiency * dt});
    if (count > 0) prog.add_constraint(std::move(row), exact ? lp::Relation::Equal : lp::Relation::GreaterEqual, energy);
    return v;
}

Structure build_structure(const ArrivalContext& ctx, const ControllerSettings& s, std::optional<double> cap) {
    const StationParams& p = s.station;
    const auto& st = ctx.state;
    const auto& tariff = ctx.tariff;
    const int now = st.now;
    const double dt = tariff.delta_t_h;
    check_arrival(ctx, p);
    if (cap && s.mode != Mode::Threshold) throw DomainError("load cap only applies in threshold mode");

    Structure out;
    out.mode = s.mode;
    out.dt = dt;
    out.d_prev = st.running_peak;
    out.demand_rate = tariff.demand_rate;
    out.kappa = s.softplus_scale;
    auto& prog = out.base.program;

    auto rate = [&](int tau) { return tariff.energy_rate.at(std::size_t(tau)); };

    // constant loads: existing REGULAR users and user n as REGULAR
    int t_end = ctx.arrival.departure;
    std::vector<double> fixed;  // indexed tau - now
    auto add_fixed = [&](const PowerProfile& pr) {
        if (pr.end() - now > int(fixed.size())) fixed.resize(std::size_t(pr.end() - now), 0.0);
        for (int tau = pr.start; tau < pr.end(); ++tau) fixed[std::size_t(tau - now)] += pr.at(tau);
    };
    std::vector<const ChargingSession*> scheduled;
    for (const auto& a : st.active) {
        if (a.departure <= now) continue;
        t_end = std::max(t_end, a.departure);
        if (a.choice == Choice::Regular) {
            const PowerProfile r = regular_profile(a, now, p);
            add_fixed(r);
            for (int tau = r.start; tau < r.end(); ++tau) out.const_shared += (rate(tau) - a.locked_price) * r.at(tau) * dt;
        } else if (a.choice == Choice::Scheduled) {
            scheduled.push_back(&a);
        }
    }
    ChargingSession n_reg;
    n_reg.id = ctx.arrival.id;
    n_reg.arrival = now;
    n_reg.departure = ctx.arrival.departure;
    n_reg.energy_req = ctx.arrival.energy_regular;
    const PowerProfile r_n = regular_profile(n_reg, now, p);
    for (int tau = r_n.start; tau < r_n.end(); ++tau) {
        out.reg_energy_cost += rate(tau) * r_n.at(tau) * dt;
        out.reg_energy += r_n.at(tau) * dt;
    }
    fixed.resize(std::size_t(std::max(int(fixed.size()), t_end - now)), 0.0);

    // decision variables
    for (const ChargingSession* a : scheduled) {
        const int count = a->departure - now;
        const double cap_e = p.step_energy_kwh() * count;
        double e = a->remaining();
        if (e > cap_e + kEnergyTol)
            throw InfeasibleError("session " + std::to_string(a->id) + " can no longer receive its energy");
        e = std::min(e, cap_e);
        if (e <= 1e-12 && s.exact_energy) continue;
        auto v = add_profile_block(prog, a->id, now, count, e, p, dt, s.exact_energy);
        for (int k = 0; k < count; ++k) out.shared_rate.push_back((rate(now + k) - a->locked_price) * dt);
        out.base.shared.push_back(v);
    }
    {
        const int count = ctx.arrival.departure - now;
        out.base.new_user = add_profile_block(prog, ctx.arrival.id, now, count, ctx.arrival.energy_scheduled, p, dt,
                                              s.exact_energy);
        for (int k = 0; k < count; ++k) out.new_rate.push_back(rate(now + k) * dt);
    }

    const bool softplus_mode = s.mode == Mode::Softplus;
    const double d_lo = softplus_mode ? 0.0 : out.d_prev;
    const double d_hi = cap ? *cap : lp::kInf;
    out.base.d_sch = prog.add_variable(0.0, d_lo, d_hi);
    out.base.d_reg = prog.add_variable(0.0, d_lo, d_hi);
    double lo_sch = d_lo, lo_reg = d_lo;

    auto vars_at = [&](int tau, bool with_new) {
        std::vector<lp::Term> terms;
        for (const auto& v : out.base.shared)
            if (tau >= v.start && tau < v.start + v.count) terms.push_back({v.first_var + (tau - v.start), -1.0});
        const auto& nv = out.base.new_user;
        if (with_new && tau >= nv.start && tau < nv.start + nv.count)
            terms.push_back({nv.first_var + (tau - nv.start), -1.0});
        return terms;
    };
    // d_m >= const + sum(vars). Constant-only rows tighten the bound unless a cap is in play.
    auto epigraph_row = [&](int d, double& lo, std::vector<lp::Term> terms, double c) {
        if (terms.empty() && !cap) {
            lo = std::max(lo, c);
            return;
        }
        terms.insert(terms.begin(), lp::Term{d, 1.0});
        prog.add_constraint(std::move(terms), lp::Relation::GreaterEqual, c);
    };

    if (s.mode == Mode::Mpc) {
        const int l = s.mpc_horizon;
        if (int(ctx.forecast.size()) < l) throw DomainError("forecast is shorter than the MPC horizon");
        std::vector<PowerProfile> committed;
        for (const ChargingSession* a : scheduled)
            if (const PowerProfile* pr = st.schedule_for(a->id)) committed.push_back(*pr);
        const auto upd = fc::update_forecast(ctx.forecast.first(std::size_t(l)), now, committed, r_n);
        for (int k = 0; k < l; ++k) {
            epigraph_row(out.base.d_sch, lo_sch, vars_at(now + k, true), upd.offset_sch[std::size_t(k)]);
            epigraph_row(out.base.d_reg, lo_reg, vars_at(now + k, false), upd.offset_reg[std::size_t(k)]);
        }
    } else {
        for (int tau = now; tau < t_end; ++tau) {
            const double f = fixed[std::size_t(tau - now)];
            epigraph_row(out.base.d_sch, lo_sch, vars_at(tau, true), f);
            epigraph_row(out.base.d_reg, lo_reg, vars_at(tau, false), f + r_n.at(tau));
        }
    }
    prog.set_bounds(out.base.d_sch, lo_sch, d_hi);
    prog.set_bounds(out.base.d_reg, lo_reg, d_hi);
    out.lo_sch = lo_sch;
    out.lo_reg = lo_reg;

    if (softplus_mode) {
        const double range = s.effective_softplus_range() * s.softplus_scale;
        const SoftplusPwl pwl = softplus_pwl(-range, range, s.softplus_segments);
        out.base.s_sch = prog.add_variable(0.0, 0.0, lp::kInf);
        out.base.s_reg = prog.add_variable(0.0, 0.0, lp::kInf);
        for (const auto& t : pwl.tangents) {
            // s >= a * kappa * (d - D_prev) + b
            const double a = t.slope * out.kappa;
            const double rhs = t.intercept - a * out.d_prev;
            prog.add_constraint({{out.base.s_sch, 1.0}, {out.base.d_sch, -a}}, lp::Relation::GreaterEqual, rhs);
            prog.add_constraint({{out.base.s_reg, 1.0}, {out.base.d_reg, -a}}, lp::Relation::GreaterEqual, rhs);
        }
    }
    return out;
}

// Objective and constant for one menu.
std::vector<double> objective_for(const Structure& st, const PriceMenu& menu, const ControllerSettings& s,
                                  choice::Distribution& probs, double& constant) {
    probs = choice::choice_probabilities(menu, s.choice, s.station.p_max_kw);
    const double w = probs.p_sch + probs.p_reg;
    const auto& b = st.base;
    std::vector<double> c(std::size_t(b.program.num_variables()), 0.0);
    std::size_t k = 0;
    for (const auto& v : b.shared)
        for (int j = 0; j < v.count; ++j, ++k) c[std::size_t(v.first_var + j)] = w * st.shared_rate[k];
    for (int j = 0; j < b.new_user.count; ++j)
        c[std::size_t(b.new_user.first_var + j)] = probs.p_sch * (st.new_rate[std::size_t(j)] - menu.z_sch * st.dt);
    constant = w * st.const_shared + probs.p_reg * (st.reg_energy_cost - menu.z_reg * st.reg_energy);
    if (st.mode == Mode::Softplus) {
        c[std::size_t(b.s_sch)] = probs.p_sch * st.demand_rate / st.kappa;
        c[std::size_t(b.s_reg)] = probs.p_reg * st.demand_rate / st.kappa;
    } else {
        c[std::size_t(b.d_sch)] = probs.p_sch * st.demand_rate;
        c[std::size_t(b.d_reg)] = probs.p_reg * st.demand_rate;
        constant -= (probs.p_sch + probs.p_reg) * st.demand_rate * st.d_prev;
    }
    return c;
}

} // namespace

namespace {

ControllerDecision decision_from(const Structure& st, const ArrivalContext& ctx, const PriceMenu& menu,
                                 const choice::Distribution& probs, double cost, std::span<const double> x,
                                 double p_max) {
    ControllerDecision d;
    d.menu = menu;
    d.probs = probs;
    d.expected_cost = cost;
    auto extract = [&](const ProfileVars& v) {
        PowerProfile pr;
        pr.owner = v.owner;
        pr.start = v.start;
        for (int j = 0; j < v.count; ++j) pr.values.push_back(std::clamp(x[std::size_t(v.first_var + j)], 0.0, p_max));
        return pr;
    };
    for (const auto& v : st.base.shared) d.shared.push_back(extract(v));
    // SCHEDULED users without variables keep an all-zero plan
    for (const auto& a : ctx.state.active) {
        if (a.choice != Choice::Scheduled || a.departure <= ctx.state.now) continue;
        const bool present = std::any_of(d.shared.begin(), d.shared.end(), [&](const PowerProfile& p) { return p.owner == a.id; });
        if (!present) d.shared.push_back(PowerProfile{a.id, ctx.state.now, std::vector<double>(std::size_t(a.departure - ctx.state.now), 0.0)});
    }
    d.new_user = extract(st.base.new_user);
    return d;
}

// Grid search on a loaded engine. Returns nullopt if the (menu-independent) constraints are infeasible.
std::optional<ControllerDecision> search(const Structure& st, lp::SimplexEngine& engine, const ArrivalContext& ctx,
                                         std::span<const PriceMenu> sorted, const ControllerSettings& s) {
    std::optional<ControllerDecision> best;
    int iterations = 0;
    for (const auto& menu : sorted) {
        choice::Distribution probs;
        double constant = 0.0;
        const auto c = objective_for(st, menu, s, probs, constant);
        engine.set_objective(c);
        auto sol = engine.solve(s.solver);
        if (sol.status == lp::Status::Failed) {
            // retry from scratch before giving up
            ScenarioLp fresh = st.base;
            for (int j = 0; j < fresh.program.num_variables(); ++j) fresh.program.set_cost(j, c[std::size_t(j)]);
            engine.load(fresh.program);
            sol = engine.solve(s.solver);
        }
        iterations += sol.iterations;
        if (sol.status == lp::Status::Infeasible) return std::nullopt;
        if (!sol.optimal())
            throw SolverError(std::string("arrival LP: ") + lp::to_string(sol.status) + " " + sol.message);
        const double cost = sol.objective_value + constant;
        if (!best || cost < best->expected_cost - kTieTol * std::max(1.0, std::abs(best->expected_cost)))
            best = decision_from(st, ctx, menu, probs, cost, sol.values, s.station.p_max_kw);
    }
    if (best) {
        best->lp_iterations = iterations;
        best->candidates = int(sorted.size());
    }
    return best;
}

std::vector<PriceMenu> sorted_menus(std::span<const PriceMenu> menus) {
    if (menus.empty()) throw DomainError("price grid is empty");
    std::vector<PriceMenu> out(menus.begin(), menus.end());
    for (const auto& m : out) m.validate();
    std::sort(out.begin(), out.end(), canonical_less);
    return out;
}

} // namespace

std::string_view to_string(Mode m) {
    switch (m) {
    case Mode::Baseline: return "baseline";
    case Mode::Threshold: return "threshold";
    case Mode::Softplus: return "softplus";
    case Mode::Mpc: return "mpc";
    }
    return "?";
}

Mode parse_mode(std::string_view s) {
    if (s == "baseline") return Mode::Baseline;
    if (s == "threshold") return Mode::Threshold;
    if (s == "softplus") return Mode::Softplus;
    if (s == "mpc") return Mode::Mpc;
    throw InvalidInput("unknown controller '" + std::string(s) + "' (baseline, threshold, softplus, mpc)");
}

void PriceGrid::validate() const {
    if (!(lo >= 0.0) || !(hi >= lo) || !std::isfinite(hi)) throw DomainError("price grid needs 0 <= lo <= hi");
    if (!(step > 0.0)) throw DomainError("price grid step must be positive");
    if ((hi - lo) / step > 10000.0) throw DomainError("price grid is too fine");
}

std::vector<PriceMenu> PriceGrid::points() const {
    validate();
    const int n = int(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<PriceMenu> out;
    // integer indices keep the grid values free of accumulated rounding
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            if (scheduled_not_above_regular && c > r) continue;
            out.push_back(PriceMenu{lo + c * step, lo + r * step});
        }
    std::sort(out.begin(), out.end(), canonical_less);
    return out;
}

double ControllerSettings::effective_softplus_range() const {
    return softplus_range_kw > 0.0 ? softplus_range_kw : 3.0 * station.p_max_kw * station.n_chargers;
}

void ControllerSettings::validate() const {
    station.validate();
    grid.validate();
    if (!(threshold_step_kw > 0.0)) throw DomainError("threshold increment must be positive");
    if (softplus_segments < 2) throw DomainError("softplus approximation needs at least 2 segments");
    if (!(softplus_scale > 0.0) || !std::isfinite(softplus_scale)) throw DomainError("softplus scale must be positive");
    if (softplus_range_kw < 0.0) throw DomainError("softplus range must be non-negative");
    if (mpc_horizon < 1) throw DomainError("MPC horizon must be at least one step");
}

ScenarioLp build_expected_cost_lp(const ArrivalContext& ctx, const PriceMenu& menu, const ControllerSettings& s,
                                  std::optional<double> threshold) {
    menu.validate();
    Structure st = build_structure(ctx, s, threshold);
    double constant = 0.0;
    choice::Distribution probs;
    const auto c = objective_for(st, menu, s, probs, constant);
    ScenarioLp out = std::move(st.base);
    for (int j = 0; j < out.program.num_variables(); ++j) out.program.set_cost(j, c[std::size_t(j)]);
    out.constant = constant;
    out.menu = menu;
    out.probs = probs;
    return out;
}

ControllerDecision optimize_menu(const ArrivalContext& ctx, std::span<const PriceMenu> menus,
                                 const ControllerSettings& s, std::optional<double> threshold) {
    const auto sorted = sorted_menus(menus);
    const Structure st = build_structure(ctx, s, threshold);
    lp::SimplexEngine engine;
    engine.load(st.base.program);
    auto best = search(st, engine, ctx, sorted, s);
    if (!best) throw InfeasibleError("arrival " + std::to_string(ctx.arrival.id) + ": no feasible price menu");
    best->threshold = threshold;
    return *best;
}

ControllerDecision threshold_loop(const ArrivalContext& ctx, std::span<const PriceMenu> menus,
                                  const ControllerSettings& s, double m0, double eps) {
    if (!(eps > 0.0)) throw DomainError("threshold increment must be positive");
    if (!(m0 >= 0.0)) throw DomainError("threshold start must be non-negative");
    ControllerSettings ts = s;
    ts.mode = Mode::Threshold;
    const auto sorted = sorted_menus(menus);
    const Structure st = build_structure(ctx, ts, m0);
    lp::SimplexEngine engine;
    engine.load(st.base.program);

    // every load is below this, so a cap at or above it cannot bind
    const double bound = double(ctx.state.active.size() + 1) * s.station.p_max_kw;
    for (int k = 0;; ++k) {
        const double m = m0 + k * eps;
        if (m >= st.lo_sch && m >= st.lo_reg) {
            engine.set_bounds(st.base.d_sch, st.lo_sch, m);
            engine.set_bounds(st.base.d_reg, st.lo_reg, m);
            // constraints do not depend on the menu, so one probe decides feasibility
            choice::Distribution probs;
            double constant = 0.0;
            engine.set_objective(objective_for(st, sorted.front(), ts, probs, constant));
            const auto probe = engine.solve(ts.solver);
            if (probe.optimal()) {
                auto best = search(st, engine, ctx, sorted, ts);
                if (best) {
                    best->threshold = m;
                    return *best;
                }
            } else if (probe.status != lp::Status::Infeasible) {
                throw SolverError(std::string("threshold probe: ") + lp::to_string(probe.status));
            }
        }
        if (m > bound + eps)
            throw InfeasibleError("arrival " + std::to_string(ctx.arrival.id) + ": infeasible at any load cap");
    }
}

double scenario_load(const ArrivalContext& ctx, const ControllerDecision& d, Choice scenario, int tau,
                     const StationParams& p) {
    const auto& st = ctx.state;
    double g = 0.0;
    for (const auto& a : st.active)
        if (a.choice == Choice::Regular) g += regular_profile(a, st.now, p).at(tau);
    for (const auto& pr : d.shared) g += pr.at(tau);
    if (scenario == Choice::Scheduled) {
        g += d.new_user.at(tau);
    } else if (scenario == Choice::Regular) {
        ChargingSession n;
        n.id = ctx.arrival.id;
        n.arrival = st.now;
        n.departure = ctx.arrival.departure;
        n.energy_req = ctx.arrival.energy_regular;
        g += regular_profile(n, st.now, p).at(tau);
    }
    return g;
}

Controller::Controller(ControllerSettings s) : settings_(std::move(s)) {
    settings_.validate();
    menus_ = settings_.grid.points();
}

ControllerDecision Controller::decide(const ArrivalContext& ctx) const {
    if (settings_.mode == Mode::Threshold)
        return threshold_loop(ctx, menus_, settings_, ctx.state.running_peak, settings_.threshold_step_kw);
    return optimize_menu(ctx, menus_, settings_);
}

} // namespace evc::ctl
