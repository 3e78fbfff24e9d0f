// SPDX-License-Identifier: Apache-2.0
#include "evcharge/lp.hpp"

#include "evcharge/errors.hpp"

#include <algorithm>
#include <cmath>

namespace evc::lp {

int LinearProgram::add_variable(double cost, double lo, double hi) {
    objective_.push_back(cost);
    bounds_.push_back({lo, hi});
    return int(objective_.size()) - 1;
}

int LinearProgram::add_constraint(std::vector<Term> terms, Relation rel, double rhs) {
    constraints_.push_back({std::move(terms), rel, rhs});
    return int(constraints_.size()) - 1;
}

void LinearProgram::validate() const {
    const int n = num_variables();
    for (int j = 0; j < n; ++j) {
        if (!std::isfinite(objective_[std::size_t(j)])) throw DomainError("non-finite objective coefficient");
        const Bounds& b = bounds_[std::size_t(j)];
        if (std::isnan(b.lo) || std::isnan(b.hi) || b.lo > b.hi || b.lo == kInf || b.hi == -kInf)
            throw DomainError("variable " + std::to_string(j) + " has invalid bounds");
    }
    for (const auto& c : constraints_) {
        if (!std::isfinite(c.rhs)) throw DomainError("non-finite constraint right-hand side");
        for (const auto& t : c.terms) {
            if (t.var < 0 || t.var >= n) throw DomainError("constraint references unknown variable");
            if (!std::isfinite(t.coef)) throw DomainError("non-finite constraint coefficient");
        }
    }
}

double LinearProgram::evaluate(std::span<const double> x) const {
    double v = 0.0;
    for (std::size_t j = 0; j < objective_.size(); ++j) v += objective_[j] * x[j];
    return v;
}

double LinearProgram::max_violation(std::span<const double> x) const {
    double worst = 0.0;
    for (std::size_t j = 0; j < bounds_.size(); ++j) {
        worst = std::max(worst, bounds_[j].lo - x[j]);
        worst = std::max(worst, x[j] - bounds_[j].hi);
    }
    for (const auto& c : constraints_) {
        double a = 0.0;
        for (const auto& t : c.terms) a += t.coef * x[std::size_t(t.var)];
        switch (c.rel) {
        case Relation::LessEqual: worst = std::max(worst, a - c.rhs); break;
        case Relation::GreaterEqual: worst = std::max(worst, c.rhs - a); break;
        case Relation::Equal: worst = std::max(worst, std::abs(a - c.rhs)); break;
        }
    }
    return worst;
}

const char* to_string(Status s) {
    switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::Failed: return "failed";
    }
    return "?";
}

} // namespace evc::lp
