// SPDX-License-Identifier: Apache-2.0
#include "evcharge/controllers.hpp"
#include "evcharge/errors.hpp"

#include <algorithm>
#include <cmath>

namespace evc::ctl {

namespace {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Worst gap between softplus and max(tangent at a, tangent at b) on [a, b]. For a convex
// function it sits where the two lines cross.
double pair_gap(double a, double b) {
    const Tangent la = softplus_tangent(a);
    const Tangent lb = softplus_tangent(b);
    double x = 0.5 * (a + b);
    const double ds = la.slope - lb.slope;
    if (std::abs(ds) > 1e-15) x = std::clamp((lb.intercept - la.intercept) / ds, a, b);
    return softplus(x) - std::max(la.slope * x + la.intercept, lb.slope * x + lb.intercept);
}

// Furthest next knot whose gap with `from` stays within g.
double next_knot(double from, double x_hi, double g) {
    if (pair_gap(from, x_hi) <= g) return x_hi;
    double lo = from, hi = x_hi;
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (pair_gap(from, mid) <= g ? lo : hi) = mid;
    }
    return lo;
}

// Greedy placement; empty if more than `limit` knots would be needed.
std::vector<double> greedy_knots(double x_lo, double x_hi, double g, int limit) {
    std::vector<double> k{x_lo};
    while (k.back() < x_hi) {
        if (int(k.size()) >= limit) return {};
        const double nxt = next_knot(k.back(), x_hi, g);
        if (!(nxt > k.back())) return {};
        k.push_back(nxt);
    }
    return k;
}

} // namespace

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

Tangent softplus_tangent(double t) {
    const double a = sigmoid(t);
    return {a, softplus(t) - a * t};
}

double SoftplusPwl::operator()(double x) const {
    double best = -lp::kInf;
    for (const auto& t : tangents) best = std::max(best, t.slope * x + t.intercept);
    return best;
}

SoftplusPwl softplus_pwl(double x_lo, double x_hi, int n_segments) {
    if (!(x_lo < x_hi) || !std::isfinite(x_lo) || !std::isfinite(x_hi))
        throw DomainError("softplus range must be a finite interval with x_lo < x_hi");
    if (n_segments < 2) throw DomainError("softplus approximation needs at least 2 segments");

    double g_lo = 0.0, g_hi = pair_gap(x_lo, x_hi);
    std::vector<double> knots = greedy_knots(x_lo, x_hi, g_hi, n_segments);
    for (int it = 0; it < 200 && g_hi - g_lo > 1e-14; ++it) {
        const double g = 0.5 * (g_lo + g_hi);
        auto k = greedy_knots(x_lo, x_hi, g, n_segments);
        if (k.empty()) {
            g_lo = g;
        } else {
            g_hi = g;
            knots = std::move(k);
        }
    }
    // fill up to exactly n knots by splitting the widest-gap interval
    while (int(knots.size()) < n_segments) {
        std::size_t worst = 0;
        double worst_gap = -1.0;
        for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
            const double gap = pair_gap(knots[i], knots[i + 1]);
            if (gap > worst_gap) {
                worst_gap = gap;
                worst = i;
            }
        }
        knots.insert(knots.begin() + std::ptrdiff_t(worst) + 1, 0.5 * (knots[worst] + knots[worst + 1]));
    }

    SoftplusPwl out;
    out.knots = knots;
    for (double t : knots) out.tangents.push_back(softplus_tangent(t));
    return out;
}

} // namespace evc::ctl
