// SPDX-License-Identifier: Apache-2.0
// Straight transcription of the two-step logit, kept apart from the library on purpose.
#pragma once

#include <cmath>

namespace evc::testing {

struct LogitProbs {
    double leave, sch, reg;
};

inline LogitProbs scalar_logit(double z_reg, double z_sch, double p_max, double b_gap, double a_reg, double a_leave,
                               double b_avg) {
    const double zr = z_reg * p_max, zs = z_sch * p_max;
    const double u_reg = a_reg - b_gap * (zr - zs) / 2.0;
    const double u_sch = b_gap * (zr - zs) / 2.0;
    const double u_leave = a_leave + b_avg * (zr + zs) / 2.0;
    const double leave = std::exp(u_leave) / (std::exp(u_reg) + std::exp(u_sch) + std::exp(u_leave));
    const double reg_given = std::exp(u_reg) / (std::exp(u_reg) + std::exp(u_sch));
    return {leave, (1.0 - leave) * (1.0 - reg_given), (1.0 - leave) * reg_given};
}

} // namespace evc::testing
