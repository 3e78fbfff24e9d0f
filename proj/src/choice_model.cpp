// SPDX-License-Identifier: Apache-2.0
#include "evcharge/choice_model.hpp"

#include "evcharge/errors.hpp"

#include <algorithm>
#include <cmath>

namespace evc::choice {

HourlyPrices hourly_prices(const PriceMenu& menu, double p_max_kw) {
    if (!(p_max_kw > 0.0)) throw DomainError("p_max must be positive");
    menu.validate();
    return {menu.z_reg * p_max_kw, menu.z_sch * p_max_kw};
}

Utilities utilities(const PriceMenu& menu, const Coefficients& c, double p_max_kw) {
    const HourlyPrices h = hourly_prices(menu, p_max_kw);
    const double half_gap = (h.reg - h.sch) / 2.0;
    const double half_sum = (h.reg + h.sch) / 2.0;
    return {c.alpha_reg - c.beta_price_gap * half_gap,
            c.beta_price_gap * half_gap,
            c.alpha_leave + c.beta_avg_price * half_sum};
}

Distribution choice_probabilities(const PriceMenu& menu, const Coefficients& c, double p_max_kw) {
    const Utilities u = utilities(menu, c, p_max_kw);
    if (!std::isfinite(u.reg) || !std::isfinite(u.sch) || std::isnan(u.leave) || u.leave == HUGE_VAL)
        throw SolverError("non-finite utility in choice model");

    const double top = std::max({u.reg, u.sch, u.leave});
    const double e_reg = std::exp(u.reg - top);
    const double e_sch = std::exp(u.sch - top);
    const double e_leave = std::exp(u.leave - top);
    const double p_leave = e_leave / (e_sch + e_reg + e_leave);

    const double pair_top = std::max(u.reg, u.sch);
    const double b_reg = std::exp(u.reg - pair_top);
    const double b_sch = std::exp(u.sch - pair_top);
    const double stay = 1.0 - p_leave;

    Distribution d;
    d.p_leave = p_leave;
    d.p_sch = b_sch / (b_sch + b_reg) * stay;
    d.p_reg = b_reg / (b_sch + b_reg) * stay;
    if (!std::isfinite(d.p_sch) || !std::isfinite(d.p_reg) || !std::isfinite(d.p_leave))
        throw SolverError("non-finite choice probability");
    return d;
}

} // namespace evc::choice
