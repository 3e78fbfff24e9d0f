// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "evcharge/core.hpp"

namespace evc::choice {

/// Utility coefficients of the two-step logit. Defaults are the published estimates;
/// prices enter in $/hr (per-kWh price times p_max).
struct Coefficients {
    double beta_price_gap = 0.0184;
    double alpha_reg = 0.341;
    double alpha_leave = -1.0;
    double beta_avg_price = 0.005;

    bool operator==(const Coefficients&) const = default;
};

struct HourlyPrices {
    double reg;
    double sch;
};

struct Utilities {
    double reg;
    double sch;
    double leave;
};

struct Distribution {
    double p_reg = 0.0;
    double p_sch = 0.0;
    double p_leave = 0.0;

    /// Split between the two charging options once LEAVE is ruled out.
    double scheduled_share() const { return p_sch / (p_sch + p_reg); }
};

HourlyPrices hourly_prices(const PriceMenu& menu, double p_max_kw);

Utilities utilities(const PriceMenu& menu, const Coefficients& c, double p_max_kw);

/// LEAVE from the three-way logit, then SCHEDULED/REGULAR from the binary logit scaled by
/// (1 - P(LEAVE)). Exponentials are evaluated after subtracting the largest utility.
Distribution choice_probabilities(const PriceMenu& menu, const Coefficients& c, double p_max_kw);

} // namespace evc::choice
