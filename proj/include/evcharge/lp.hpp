// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace evc::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Relation { LessEqual, Equal, GreaterEqual };

struct Term {
    int var;
    double coef;
};

struct Constraint {
    std::vector<Term> terms;
    Relation rel;
    double rhs;
};

struct Bounds {
    double lo;
    double hi;
};

/// min c'x subject to row constraints and per-variable bounds.
class LinearProgram {
public:
    int add_variable(double cost, double lo, double hi);
    int add_constraint(std::vector<Term> terms, Relation rel, double rhs);

    void set_cost(int var, double cost) { objective_.at(std::size_t(var)) = cost; }
    void set_bounds(int var, double lo, double hi) { bounds_.at(std::size_t(var)) = {lo, hi}; }
    void set_rhs(int row, double rhs) { constraints_.at(std::size_t(row)).rhs = rhs; }

    int num_variables() const { return int(objective_.size()); }
    int num_constraints() const { return int(constraints_.size()); }
    std::span<const double> objective() const { return objective_; }
    std::span<const Bounds> bounds() const { return bounds_; }
    std::span<const Constraint> constraints() const { return constraints_; }

    /// Throws DomainError on non-finite coefficients, lo > hi, or bad variable indices.
    void validate() const;

    double evaluate(std::span<const double> x) const;
    /// Largest bound or row violation of `x` (0 when feasible).
    double max_violation(std::span<const double> x) const;

private:
    std::vector<double> objective_;
    std::vector<Bounds> bounds_;
    std::vector<Constraint> constraints_;
};

enum class Status { Optimal, Infeasible, Unbounded, Failed };

const char* to_string(Status s);

enum class VarState : std::uint8_t { Basic, AtLower, AtUpper, Free };

/// Statuses of structural variables followed by one slack per row.
struct Basis {
    std::vector<VarState> states;
};

struct SolveOptions {
    double tol_feas = 1e-7;
    double tol_opt = 1e-7;
    int max_iterations = 100000;

    bool operator==(const SolveOptions&) const = default;
};

struct LpSolution {
    Status status = Status::Failed;
    std::vector<double> values;
    double objective_value = 0.0;
    int iterations = 0;
    Basis basis;
    std::string message;

    bool optimal() const { return status == Status::Optimal; }
};

/// Cold solve with the bundled simplex.
LpSolution solve(const LinearProgram& lp, const SolveOptions& opts = {});

/// Incremental solver seam. A loaded problem keeps its factorization so that objective and
/// bound edits re-optimize from the previous basis.
class Engine {
public:
    virtual ~Engine() = default;

    virtual void load(const LinearProgram& lp) = 0;
    virtual void set_objective(std::span<const double> cost) = 0;
    virtual void set_bounds(int var, double lo, double hi) = 0;
    virtual LpSolution solve(const SolveOptions& opts) = 0;
};

/// Bounded-variable primal simplex on an explicit basis inverse. Dantzig pricing with a
/// switch to Bland's rule after a run of degenerate pivots; ties go to the lowest index.
class SimplexEngine final : public Engine {
public:
    SimplexEngine();
    ~SimplexEngine() override;
    SimplexEngine(SimplexEngine&&) noexcept;
    SimplexEngine& operator=(SimplexEngine&&) noexcept;

    void load(const LinearProgram& lp) override;
    void set_objective(std::span<const double> cost) override;
    void set_bounds(int var, double lo, double hi) override;
    LpSolution solve(const SolveOptions& opts) override;

    /// Starts the next solve from `b` instead of the current basis (ignored if singular).
    void set_basis(const Basis& b);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::unique_ptr<Engine> make_default_engine();

} // namespace evc::lp
