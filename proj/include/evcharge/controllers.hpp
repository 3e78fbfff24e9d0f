// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "evcharge/choice_model.hpp"
#include "evcharge/core.hpp"
#include "evcharge/lp.hpp"
#include "evcharge/tariff.hpp"

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace evc::ctl {

enum class Mode { Baseline, Threshold, Softplus, Mpc };

std::string_view to_string(Mode m);
Mode parse_mode(std::string_view s);

/// Candidate menus. Both prices run over [lo, hi] in `step` increments.
struct PriceGrid {
    double lo = 0.10;
    double hi = 1.00;
    double step = 0.05;
    bool scheduled_not_above_regular = true;

    void validate() const;
    /// Sorted by z_reg, then z_sch.
    std::vector<PriceMenu> points() const;

    bool operator==(const PriceGrid&) const = default;
};

// ---- softplus ------------------------------------------------------------------------------

/// log(1 + e^x) without overflow.
double softplus(double x);

struct Tangent {
    double slope;
    double intercept;
};

/// Tangent line of softplus at t.
Tangent softplus_tangent(double t);

/// Max of tangent lines to softplus. Lies below softplus everywhere.
struct SoftplusPwl {
    std::vector<double> knots;
    std::vector<Tangent> tangents;

    double operator()(double x) const;
};

/// Tangents at `n_segments` knots spanning [x_lo, x_hi] (both ends are knots), spaced so
/// the largest gap between softplus and the tangent max is as small as possible.
SoftplusPwl softplus_pwl(double x_lo, double x_hi, int n_segments);

// ---- arrival problem ------------------------------------------------------------------------

struct ControllerSettings {
    Mode mode = Mode::Baseline;
    StationParams station;
    choice::Coefficients choice;
    PriceGrid grid;
    double threshold_step_kw = 1.0;
    int softplus_segments = 16;
    double softplus_scale = 1.0;
    double softplus_range_kw = 0.0;  // 0: 3 * p_max * n_chargers
    int mpc_horizon = 32;
    /// Deliver exactly the requested energy. With `false` the energy rows are lower bounds.
    bool exact_energy = true;
    lp::SolveOptions solver;

    double effective_softplus_range() const;
    void validate() const;

    bool operator==(const ControllerSettings&) const = default;
};

/// The arriving user, already snapped to the grid. `energy_regular` fills the REGULAR
/// scenario profile; `energy_scheduled` is the requirement if they pick SCHEDULED.
struct NewArrival {
    SessionId id = 0;
    int departure = 1;
    double energy_scheduled = 0.0;
    double energy_regular = 0.0;
};

/// Everything an arrival-triggered solve reads. `state.now` is the arrival step.
/// `forecast` holds psi for steps now .. now + mpc_horizon - 1 (MPC only).
struct ArrivalContext {
    const StationState& state;
    NewArrival arrival;
    const billing::CycleTariff& tariff;
    std::span<const double> forecast = {};
};

/// Variable block for one user's scheduled profile: `count` steps from `start`.
struct ProfileVars {
    SessionId owner = 0;
    int start = 0;
    int first_var = 0;
    int count = 0;
};

/// One expected-cost LP for a fixed menu. Objective value plus `constant` is the expected cost.
struct ScenarioLp {
    lp::LinearProgram program;
    double constant = 0.0;
    PriceMenu menu;
    choice::Distribution probs;
    std::vector<ProfileVars> shared;  // existing SCHEDULED users, common to both scenarios
    ProfileVars new_user;             // user n, SCHEDULED scenario only
    int d_sch = -1;
    int d_reg = -1;
    int s_sch = -1;  // softplus epigraph, -1 unless softplus mode
    int s_reg = -1;
};

struct ControllerDecision {
    PriceMenu menu;
    choice::Distribution probs;
    double expected_cost = 0.0;
    /// Plans for existing SCHEDULED users (committed whatever user n picks).
    std::vector<PowerProfile> shared;
    /// User n's plan if they pick SCHEDULED.
    PowerProfile new_user;
    /// Cap used in threshold mode, otherwise unset.
    std::optional<double> threshold;
    int lp_iterations = 0;
    int candidates = 0;
};

/// Builds the LP for one menu. `threshold` caps the scenario loads (threshold mode).
/// Throws InfeasibleError if an existing user's remaining energy no longer fits.
ScenarioLp build_expected_cost_lp(const ArrivalContext& ctx, const PriceMenu& menu,
                                  const ControllerSettings& s,
                                  std::optional<double> threshold = std::nullopt);

/// Grid search over `menus`. Costs within 1e-9 count as ties; ties go to the lowest z_reg,
/// then the lowest z_sch, independent of input order. Throws InfeasibleError if no menu is
/// feasible.
ControllerDecision optimize_menu(const ArrivalContext& ctx, std::span<const PriceMenu> menus,
                                 const ControllerSettings& s,
                                 std::optional<double> threshold = std::nullopt);

/// Loosens M = M0, M0 + eps, ... until the capped problem is feasible.
ControllerDecision threshold_loop(const ArrivalContext& ctx, std::span<const PriceMenu> menus,
                                  const ControllerSettings& s, double m0, double eps);

/// Scenario load at `tau` for the decision's plans.
double scenario_load(const ArrivalContext& ctx, const ControllerDecision& d, Choice scenario, int tau,
                     const StationParams& p);

/// Mode dispatch around optimize_menu / threshold_loop with a cached grid.
class Controller {
public:
    explicit Controller(ControllerSettings s);

    ControllerDecision decide(const ArrivalContext& ctx) const;
    const ControllerSettings& settings() const { return settings_; }
    std::span<const PriceMenu> menus() const { return menus_; }

private:
    ControllerSettings settings_;
    std::vector<PriceMenu> menus_;
};

} // namespace evc::ctl
