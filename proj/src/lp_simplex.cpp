// SPDX-License-Identifier: Apache-2.0
#include "evcharge/errors.hpp"
#include "evcharge/lp.hpp"

#include <algorithm>
#include <cmath>

namespace evc::lp {

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kHarrisTol = 1e-9;
constexpr double kDegenerateStep = 1e-12;
constexpr int kDegenerateRunForBland = 50;
constexpr int kRefactorInterval = 100;
constexpr int kMaxCleanupRounds = 3;

} // namespace

struct SimplexEngine::Impl {
    int m = 0;  // rows
    int n = 0;  // structural variables
    std::vector<int> col_start;
    std::vector<int> row_idx;
    std::vector<double> col_val;
    std::vector<double> rhs;
    std::vector<double> lo, hi, cost;  // structural then slack, size n + m
    std::vector<VarState> state;
    std::vector<int> head;  // basis position -> variable
    std::vector<double> binv;  // m x m, row-major
    std::vector<double> x;
    std::vector<double> cb, y, alpha;
    bool loaded = false;
    bool has_basis = false;
    bool binv_valid = false;
    int pivots_since_refactor = 0;

    int total() const { return n + m; }

    double nonbasic_value(int j) const {
        switch (state[std::size_t(j)]) {
        case VarState::AtLower: return lo[std::size_t(j)];
        case VarState::AtUpper: return hi[std::size_t(j)];
        default: return 0.0;
        }
    }

    VarState resting_state(int j) const {
        if (std::isfinite(lo[std::size_t(j)])) return VarState::AtLower;
        if (std::isfinite(hi[std::size_t(j)])) return VarState::AtUpper;
        return VarState::Free;
    }

    double dot_column(int j, const std::vector<double>& v) const {
        if (j >= n) return v[std::size_t(j - n)];
        double s = 0.0;
        for (int k = col_start[std::size_t(j)]; k < col_start[std::size_t(j) + 1]; ++k)
            s += v[std::size_t(row_idx[std::size_t(k)])] * col_val[std::size_t(k)];
        return s;
    }

    void load(const LinearProgram& lp) {
        lp.validate();
        m = lp.num_constraints();
        n = lp.num_variables();
        const auto rows = lp.constraints();

        std::vector<int> count(std::size_t(n), 0);
        for (const auto& c : rows)
            for (const auto& t : c.terms) ++count[std::size_t(t.var)];
        col_start.assign(std::size_t(n) + 1, 0);
        for (int j = 0; j < n; ++j) col_start[std::size_t(j) + 1] = col_start[std::size_t(j)] + count[std::size_t(j)];
        row_idx.assign(std::size_t(col_start.back()), 0);
        col_val.assign(std::size_t(col_start.back()), 0.0);
        std::vector<int> fill(col_start.begin(), col_start.end() - 1);
        rhs.assign(std::size_t(m), 0.0);
        for (int i = 0; i < m; ++i) {
            const auto& c = rows[std::size_t(i)];
            rhs[std::size_t(i)] = c.rhs;
            for (const auto& t : c.terms) {
                // duplicate terms for one variable are merged into a single entry
                int& f = fill[std::size_t(t.var)];
                bool merged = false;
                for (int k = col_start[std::size_t(t.var)]; k < f; ++k) {
                    if (row_idx[std::size_t(k)] == i) {
                        col_val[std::size_t(k)] += t.coef;
                        merged = true;
                        break;
                    }
                }
                if (!merged) {
                    row_idx[std::size_t(f)] = i;
                    col_val[std::size_t(f)] = t.coef;
                    ++f;
                }
            }
        }
        // compact away slots freed by merging
        std::vector<int> new_start(std::size_t(n) + 1, 0);
        std::size_t w = 0;
        for (int j = 0; j < n; ++j) {
            new_start[std::size_t(j)] = int(w);
            for (int k = col_start[std::size_t(j)]; k < fill[std::size_t(j)]; ++k) {
                row_idx[w] = row_idx[std::size_t(k)];
                col_val[w] = col_val[std::size_t(k)];
                ++w;
            }
        }
        new_start[std::size_t(n)] = int(w);
        row_idx.resize(w);
        col_val.resize(w);
        col_start = std::move(new_start);

        const std::size_t N = std::size_t(n + m);
        lo.assign(N, 0.0);
        hi.assign(N, 0.0);
        cost.assign(N, 0.0);
        const auto obj = lp.objective();
        const auto bnd = lp.bounds();
        for (int j = 0; j < n; ++j) {
            lo[std::size_t(j)] = bnd[std::size_t(j)].lo;
            hi[std::size_t(j)] = bnd[std::size_t(j)].hi;
            cost[std::size_t(j)] = obj[std::size_t(j)];
        }
        for (int i = 0; i < m; ++i) {
            const std::size_t s = std::size_t(n + i);
            switch (rows[std::size_t(i)].rel) {
            case Relation::LessEqual: lo[s] = 0.0; hi[s] = kInf; break;
            case Relation::GreaterEqual: lo[s] = -kInf; hi[s] = 0.0; break;
            case Relation::Equal: lo[s] = 0.0; hi[s] = 0.0; break;
            }
        }
        state.assign(N, VarState::AtLower);
        x.assign(N, 0.0);
        head.assign(std::size_t(m), 0);
        binv.assign(std::size_t(m) * std::size_t(m), 0.0);
        cb.assign(std::size_t(m), 0.0);
        y.assign(std::size_t(m), 0.0);
        alpha.assign(std::size_t(m), 0.0);
        loaded = true;
        has_basis = false;
        binv_valid = false;
    }

    void slack_basis() {
        for (int j = 0; j < n; ++j) {
            state[std::size_t(j)] = resting_state(j);
            x[std::size_t(j)] = nonbasic_value(j);
        }
        for (int i = 0; i < m; ++i) {
            state[std::size_t(n + i)] = VarState::Basic;
            head[std::size_t(i)] = n + i;
        }
        has_basis = true;
        binv_valid = false;
    }

    bool refactor() {
        const std::size_t M = std::size_t(m);
        std::vector<double> a(M * M, 0.0);
        for (std::size_t p = 0; p < M; ++p) {
            const int j = head[p];
            if (j >= n) {
                a[std::size_t(j - n) * M + p] = 1.0;
            } else {
                for (int k = col_start[std::size_t(j)]; k < col_start[std::size_t(j) + 1]; ++k)
                    a[std::size_t(row_idx[std::size_t(k)]) * M + p] = col_val[std::size_t(k)];
            }
        }
        std::vector<double>& inv = binv;
        std::fill(inv.begin(), inv.end(), 0.0);
        for (std::size_t i = 0; i < M; ++i) inv[i * M + i] = 1.0;
        // Gauss-Jordan with partial pivoting on [B | I]
        for (std::size_t c = 0; c < M; ++c) {
            std::size_t piv = c;
            double best = std::abs(a[c * M + c]);
            for (std::size_t r = c + 1; r < M; ++r) {
                const double v = std::abs(a[r * M + c]);
                if (v > best) {
                    best = v;
                    piv = r;
                }
            }
            if (best < 1e-11) {
                binv_valid = false;
                return false;
            }
            if (piv != c) {
                for (std::size_t k = 0; k < M; ++k) {
                    std::swap(a[c * M + k], a[piv * M + k]);
                    std::swap(inv[c * M + k], inv[piv * M + k]);
                }
            }
            const double d = 1.0 / a[c * M + c];
            for (std::size_t k = 0; k < M; ++k) {
                a[c * M + k] *= d;
                inv[c * M + k] *= d;
            }
            for (std::size_t r = 0; r < M; ++r) {
                if (r == c) continue;
                const double f = a[r * M + c];
                if (f == 0.0) continue;
                for (std::size_t k = 0; k < M; ++k) {
                    a[r * M + k] -= f * a[c * M + k];
                    inv[r * M + k] -= f * inv[c * M + k];
                }
            }
        }
        binv_valid = true;
        pivots_since_refactor = 0;
        return true;
    }

    void ensure_factor() {
        if (!has_basis) slack_basis();
        if (!binv_valid && !refactor()) {
            slack_basis();
            refactor();
        }
    }

    void compute_basic_values() {
        const std::size_t M = std::size_t(m);
        std::vector<double> r(rhs);
        for (int j = 0; j < total(); ++j) {
            if (state[std::size_t(j)] == VarState::Basic) continue;
            const double v = nonbasic_value(j);
            x[std::size_t(j)] = v;
            if (v == 0.0) continue;
            if (j >= n) {
                r[std::size_t(j - n)] -= v;
            } else {
                for (int k = col_start[std::size_t(j)]; k < col_start[std::size_t(j) + 1]; ++k)
                    r[std::size_t(row_idx[std::size_t(k)])] -= col_val[std::size_t(k)] * v;
            }
        }
        for (std::size_t p = 0; p < M; ++p) {
            double s = 0.0;
            const double* row = &binv[p * M];
            for (std::size_t k = 0; k < M; ++k) s += row[k] * r[k];
            x[std::size_t(head[p])] = s;
        }
    }

    void ftran(int j) {
        const std::size_t M = std::size_t(m);
        if (j >= n) {
            const std::size_t c = std::size_t(j - n);
            for (std::size_t p = 0; p < M; ++p) alpha[p] = binv[p * M + c];
            return;
        }
        std::fill(alpha.begin(), alpha.end(), 0.0);
        for (int k = col_start[std::size_t(j)]; k < col_start[std::size_t(j) + 1]; ++k) {
            const std::size_t c = std::size_t(row_idx[std::size_t(k)]);
            const double v = col_val[std::size_t(k)];
            for (std::size_t p = 0; p < M; ++p) alpha[p] += binv[p * M + c] * v;
        }
    }

    void pivot_inverse(std::size_t r) {
        const std::size_t M = std::size_t(m);
        const double inv_piv = 1.0 / alpha[r];
        double* prow = &binv[r * M];
        for (std::size_t k = 0; k < M; ++k) prow[k] *= inv_piv;
        for (std::size_t p = 0; p < M; ++p) {
            if (p == r) continue;
            const double f = alpha[p];
            if (f == 0.0) continue;
            double* row = &binv[p * M];
            for (std::size_t k = 0; k < M; ++k) row[k] -= f * prow[k];
        }
        ++pivots_since_refactor;
    }

    bool below(int v, double tol) const { return x[std::size_t(v)] < lo[std::size_t(v)] - tol; }
    bool above(int v, double tol) const { return x[std::size_t(v)] > hi[std::size_t(v)] + tol; }

    bool primal_infeasible(double tol) const {
        for (int p = 0; p < m; ++p) {
            const int v = head[std::size_t(p)];
            if (below(v, tol) || above(v, tol)) return true;
        }
        return false;
    }

    LpSolution finish(Status st, int iters, std::string msg) const {
        LpSolution s;
        s.status = st;
        s.iterations = iters;
        s.message = std::move(msg);
        s.values.assign(x.begin(), x.begin() + n);
        double obj = 0.0;
        for (int j = 0; j < n; ++j) obj += cost[std::size_t(j)] * x[std::size_t(j)];
        s.objective_value = obj;
        s.basis.states = state;
        return s;
    }

    LpSolution run(const SolveOptions& opt) {
        if (!loaded) throw SolverError("no linear program loaded");
        ensure_factor();
        compute_basic_values();

        const std::size_t M = std::size_t(m);
        int iters = 0;
        int degenerate_run = 0;
        int cleanup_rounds = 0;

        while (true) {
            if (iters >= opt.max_iterations)
                return finish(Status::Failed, iters, "iteration limit reached");
            if (pivots_since_refactor >= kRefactorInterval) {
                if (!refactor()) return finish(Status::Failed, iters, "basis became singular");
                compute_basic_values();
            }

            const bool phase1 = primal_infeasible(opt.tol_feas);
            for (std::size_t p = 0; p < M; ++p) {
                const int v = head[p];
                if (phase1)
                    cb[p] = below(v, opt.tol_feas) ? -1.0 : (above(v, opt.tol_feas) ? 1.0 : 0.0);
                else
                    cb[p] = cost[std::size_t(v)];
            }
            std::fill(y.begin(), y.end(), 0.0);
            for (std::size_t p = 0; p < M; ++p) {
                const double c = cb[p];
                if (c == 0.0) continue;
                const double* row = &binv[p * M];
                for (std::size_t k = 0; k < M; ++k) y[k] += c * row[k];
            }

            const bool bland = degenerate_run > kDegenerateRunForBland;
            int enter = -1;
            double enter_d = 0.0;
            double best = 0.0;
            for (int j = 0; j < total(); ++j) {
                const VarState st = state[std::size_t(j)];
                if (st == VarState::Basic) continue;
                if (lo[std::size_t(j)] == hi[std::size_t(j)]) continue;
                const double cj = phase1 ? 0.0 : cost[std::size_t(j)];
                const double d = cj - dot_column(j, y);
                bool eligible = false;
                if (st == VarState::AtLower) eligible = d < -opt.tol_opt;
                else if (st == VarState::AtUpper) eligible = d > opt.tol_opt;
                else eligible = std::abs(d) > opt.tol_opt;
                if (!eligible) continue;
                if (bland) {
                    enter = j;
                    enter_d = d;
                    break;
                }
                if (std::abs(d) > best) {
                    best = std::abs(d);
                    enter = j;
                    enter_d = d;
                }
            }

            if (enter < 0) {
                if (phase1) return finish(Status::Infeasible, iters, "no feasible point");
                // re-derive basic values from the factorization before declaring optimality
                if (cleanup_rounds < kMaxCleanupRounds) {
                    if (pivots_since_refactor > 0 && !refactor())
                        return finish(Status::Failed, iters, "basis became singular");
                    compute_basic_values();
                    if (primal_infeasible(opt.tol_feas)) {
                        ++cleanup_rounds;
                        continue;
                    }
                    return finish(Status::Optimal, iters, {});
                }
                return finish(Status::Failed, iters, "could not restore primal feasibility");
            }

            const double dir = enter_d < 0.0 ? 1.0 : -1.0;
            ftran(enter);

            // Ratio test. Each basic variable p moves by -dir * alpha[p] per unit step.
            auto target_of = [&](std::size_t p, double delta, double& target) -> bool {
                const int v = head[p];
                const double l = lo[std::size_t(v)];
                const double h = hi[std::size_t(v)];
                if (phase1 && below(v, opt.tol_feas)) {
                    if (delta > 0.0) { target = l; return true; }
                    return false;
                }
                if (phase1 && above(v, opt.tol_feas)) {
                    if (delta < 0.0) { target = h; return true; }
                    return false;
                }
                if (delta > 0.0 && std::isfinite(h)) { target = h; return true; }
                if (delta < 0.0 && std::isfinite(l)) { target = l; return true; }
                return false;
            };

            double theta_relaxed = kInf;
            for (std::size_t p = 0; p < M; ++p) {
                const double delta = -dir * alpha[p];
                if (std::abs(delta) <= kPivotTol) continue;
                double target;
                if (!target_of(p, delta, target)) continue;
                const double xv = x[std::size_t(head[p])];
                const double r = delta > 0.0 ? (target + kHarrisTol - xv) / delta : (target - kHarrisTol - xv) / delta;
                theta_relaxed = std::min(theta_relaxed, std::max(r, 0.0));
            }

            int leave = -1;
            double leave_target = 0.0;
            double step = kInf;
            if (std::isfinite(theta_relaxed)) {
                double best_ratio = kInf;
                if (bland) {
                    for (std::size_t p = 0; p < M; ++p) {
                        const double delta = -dir * alpha[p];
                        double target;
                        if (std::abs(delta) <= kPivotTol || !target_of(p, delta, target)) continue;
                        best_ratio = std::min(best_ratio, std::max((target - x[std::size_t(head[p])]) / delta, 0.0));
                    }
                }
                double best_alpha = 0.0;
                for (std::size_t p = 0; p < M; ++p) {
                    const double delta = -dir * alpha[p];
                    double target;
                    if (std::abs(delta) <= kPivotTol || !target_of(p, delta, target)) continue;
                    const double r = std::max((target - x[std::size_t(head[p])]) / delta, 0.0);
                    if (bland) {
                        if (r > best_ratio + kDegenerateStep) continue;
                        if (leave < 0 || head[p] < head[std::size_t(leave)]) {
                            leave = int(p);
                            leave_target = target;
                        }
                        continue;
                    }
                    if (r > theta_relaxed) continue;
                    const double mag = std::abs(delta);
                    if (mag > best_alpha) {
                        best_alpha = mag;
                        leave = int(p);
                        leave_target = target;
                    }
                }
                if (leave >= 0) {
                    const double delta = -dir * alpha[std::size_t(leave)];
                    step = std::max((leave_target - x[std::size_t(head[std::size_t(leave)])]) / delta, 0.0);
                }
            }

            const double flip = hi[std::size_t(enter)] - lo[std::size_t(enter)];
            const bool do_flip = std::isfinite(flip) && flip <= step;
            if (do_flip) step = flip;

            if (!std::isfinite(step)) {
                if (phase1) return finish(Status::Failed, iters, "unbounded phase-one ray");
                return finish(Status::Unbounded, iters, "objective unbounded below");
            }

            ++iters;
            degenerate_run = step <= kDegenerateStep ? degenerate_run + 1 : 0;

            if (step != 0.0) {
                x[std::size_t(enter)] += dir * step;
                for (std::size_t p = 0; p < M; ++p) x[std::size_t(head[p])] -= dir * step * alpha[p];
            }

            if (do_flip) {
                state[std::size_t(enter)] = dir > 0.0 ? VarState::AtUpper : VarState::AtLower;
                x[std::size_t(enter)] = nonbasic_value(enter);
                continue;
            }

            const std::size_t r = std::size_t(leave);
            const int out = head[r];
            if (leave_target == lo[std::size_t(out)]) state[std::size_t(out)] = VarState::AtLower;
            else state[std::size_t(out)] = VarState::AtUpper;
            x[std::size_t(out)] = leave_target;
            head[r] = enter;
            state[std::size_t(enter)] = VarState::Basic;
            pivot_inverse(r);
        }
    }
};

SimplexEngine::SimplexEngine() : impl_(std::make_unique<Impl>()) {}
SimplexEngine::~SimplexEngine() = default;
SimplexEngine::SimplexEngine(SimplexEngine&&) noexcept = default;
SimplexEngine& SimplexEngine::operator=(SimplexEngine&&) noexcept = default;

void SimplexEngine::load(const LinearProgram& lp) { impl_->load(lp); }

void SimplexEngine::set_objective(std::span<const double> c) {
    if (int(c.size()) != impl_->n) throw DomainError("objective length does not match the program");
    for (std::size_t j = 0; j < c.size(); ++j) {
        if (!std::isfinite(c[j])) throw DomainError("non-finite objective coefficient");
        impl_->cost[j] = c[j];
    }
}

void SimplexEngine::set_bounds(int var, double lo, double hi) {
    Impl& s = *impl_;
    if (var < 0 || var >= s.n) throw DomainError("bound update for unknown variable");
    if (std::isnan(lo) || std::isnan(hi) || lo > hi) throw DomainError("invalid bounds");
    const std::size_t j = std::size_t(var);
    s.lo[j] = lo;
    s.hi[j] = hi;
    if (s.state[j] == VarState::Basic) return;
    if (s.state[j] == VarState::AtLower && !std::isfinite(lo)) s.state[j] = s.resting_state(var);
    else if (s.state[j] == VarState::AtUpper && !std::isfinite(hi)) s.state[j] = s.resting_state(var);
    else if (s.state[j] == VarState::Free) s.state[j] = s.resting_state(var);
}

void SimplexEngine::set_basis(const Basis& b) {
    Impl& s = *impl_;
    if (int(b.states.size()) != s.total()) return;
    if (std::count(b.states.begin(), b.states.end(), VarState::Basic) != s.m) return;
    s.state = b.states;
    int p = 0;
    for (int j = 0; j < s.total(); ++j) {
        if (s.state[std::size_t(j)] == VarState::Basic) {
            s.head[std::size_t(p++)] = j;
        } else {
            // a stored bound state must still be meaningful for the current bounds
            const VarState st = s.state[std::size_t(j)];
            if ((st == VarState::AtLower && !std::isfinite(s.lo[std::size_t(j)])) ||
                (st == VarState::AtUpper && !std::isfinite(s.hi[std::size_t(j)])))
                s.state[std::size_t(j)] = s.resting_state(j);
        }
    }
    s.has_basis = true;
    s.binv_valid = false;
}

LpSolution SimplexEngine::solve(const SolveOptions& opts) { return impl_->run(opts); }

std::unique_ptr<Engine> make_default_engine() { return std::make_unique<SimplexEngine>(); }

LpSolution solve(const LinearProgram& lp, const SolveOptions& opts) {
    SimplexEngine engine;
    engine.load(lp);
    LpSolution s = engine.solve(opts);
    if (s.status == Status::Optimal && lp.max_violation(s.values) > opts.tol_feas * 10.0) {
        s.status = Status::Failed;
        s.message = "solution failed the feasibility audit";
    }
    return s;
}

} // namespace evc::lp
