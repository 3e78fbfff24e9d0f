// SPDX-License-Identifier: Apache-2.0
#include "evcharge/lp.hpp"
#include "support/lp_oracle.hpp"

#include <doctest.h>

using namespace evc;
using lp::Relation;

TEST_CASE("single active lower constraint") {
    lp::LinearProgram p;
    const int x = p.add_variable(1.0, 0.0, 10.0);
    p.add_constraint({{x, 1.0}}, Relation::GreaterEqual, 3.0);
    const auto s = lp::solve(p);
    REQUIRE(s.optimal());
    CHECK(s.values[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(s.objective_value == doctest::Approx(3.0));
}

TEST_CASE("textbook two-variable maximization") {
    lp::LinearProgram p;
    const int x = p.add_variable(-1.0, 0.0, 1.0);
    const int y = p.add_variable(-1.0, 0.0, 1.0);
    p.add_constraint({{x, 1.0}, {y, 1.0}}, Relation::LessEqual, 1.0);
    const auto s = lp::solve(p);
    REQUIRE(s.optimal());
    CHECK(s.objective_value == doctest::Approx(-1.0));
    CHECK(p.max_violation(s.values) <= 1e-9);
}

TEST_CASE("infeasible and unbounded programs are reported") {
    lp::LinearProgram p;
    const int x = p.add_variable(1.0, 0.0, 10.0);
    p.add_constraint({{x, 1.0}}, Relation::GreaterEqual, 11.0);
    CHECK(lp::solve(p).status == lp::Status::Infeasible);

    lp::LinearProgram q;
    const int a = q.add_variable(-1.0, 0.0, lp::kInf);
    const int b = q.add_variable(0.0, 0.0, 1.0);
    q.add_constraint({{a, 1.0}, {b, -1.0}}, Relation::GreaterEqual, 0.0);
    CHECK(lp::solve(q).status == lp::Status::Unbounded);
}

TEST_CASE("equality rows and free variables") {
    lp::LinearProgram p;
    const int x = p.add_variable(1.0, -lp::kInf, lp::kInf);
    const int y = p.add_variable(2.0, 0.0, 4.0);
    p.add_constraint({{x, 1.0}, {y, 1.0}}, Relation::Equal, 3.0);
    p.add_constraint({{x, 1.0}}, Relation::LessEqual, 2.0);
    const auto s = lp::solve(p);
    REQUIRE(s.optimal());
    CHECK(s.values[0] == doctest::Approx(2.0));
    CHECK(s.values[1] == doctest::Approx(1.0));
}

TEST_CASE("invalid programs are rejected") {
    lp::LinearProgram p;
    p.add_variable(1.0, 2.0, 1.0);
    CHECK_THROWS(lp::solve(p));
}

TEST_CASE("random 5-variable programs match vertex enumeration") {
    std::mt19937_64 rng(20231);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x0;
        const auto p = testing::random_feasible_lp(rng, 5, 8, &x0);
        const auto oracle = testing::vertex_enumeration_minimum(p);
        REQUIRE(oracle.has_value());
        const auto s = lp::solve(p);
        REQUIRE_MESSAGE(s.optimal(), "trial " << trial << ": " << s.message);
        CHECK(std::abs(s.objective_value - *oracle) <= 1e-6);
        CHECK(p.max_violation(s.values) <= 1e-7);
        // weak duality spot-check against the generating point
        CHECK(s.objective_value <= p.evaluate(x0) + 1e-9);
    }
}

TEST_CASE("random infeasible programs agree with the oracle") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 30; ++trial) {
        auto p = testing::random_feasible_lp(rng, 4, 5);
        // contradictory pair on variable 0
        p.add_constraint({{0, 1.0}}, Relation::GreaterEqual, p.bounds()[0].hi + 1.0);
        CHECK_FALSE(testing::vertex_enumeration_minimum(p).has_value());
        CHECK(lp::solve(p).status == lp::Status::Infeasible);
    }
}

TEST_CASE("solves are deterministic") {
    std::mt19937_64 rng(5);
    const auto p = testing::random_feasible_lp(rng, 6, 9);
    const auto a = lp::solve(p);
    const auto b = lp::solve(p);
    REQUIRE(a.status == b.status);
    CHECK(a.objective_value == b.objective_value);
    CHECK(a.values == b.values);
}

TEST_CASE("warm objective and bound changes re-optimize correctly") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int trial = 0; trial < 20; ++trial) {
        auto p = testing::random_feasible_lp(rng, 8, 10);
        lp::SimplexEngine engine;
        engine.load(p);
        REQUIRE(engine.solve({}).optimal());
        for (int k = 0; k < 5; ++k) {
            std::vector<double> c;
            for (int j = 0; j < p.num_variables(); ++j) c.push_back(u(rng));
            for (int j = 0; j < p.num_variables(); ++j) p.set_cost(j, c[std::size_t(j)]);
            engine.set_objective(c);
            const auto warm = engine.solve({});
            const auto cold = lp::solve(p);
            REQUIRE(warm.status == cold.status);
            CHECK(std::abs(warm.objective_value - cold.objective_value) <= 1e-7);
        }
        // tighten a bound and re-solve
        const auto b = p.bounds()[0];
        const double mid = 0.5 * (b.lo + b.hi);
        p.set_bounds(0, b.lo, mid);
        engine.set_bounds(0, b.lo, mid);
        const auto warm = engine.solve({});
        const auto cold = lp::solve(p);
        REQUIRE(warm.status == cold.status);
        if (cold.optimal()) CHECK(std::abs(warm.objective_value - cold.objective_value) <= 1e-7);
    }
}

TEST_CASE("degenerate epigraph program terminates") {
    // min d s.t. d >= x_t for 30 steps, sum x = 30, x in [0, 2]; many ties at the optimum.
    lp::LinearProgram p;
    std::vector<lp::Term> energy;
    std::vector<int> xs;
    for (int t = 0; t < 30; ++t) {
        xs.push_back(p.add_variable(0.0, 0.0, 2.0));
        energy.push_back({xs.back(), 1.0});
    }
    const int d = p.add_variable(1.0, 0.0, 100.0);
    p.add_constraint(energy, Relation::Equal, 30.0);
    for (int t = 0; t < 30; ++t) p.add_constraint({{xs[std::size_t(t)], 1.0}, {d, -1.0}}, Relation::LessEqual, 0.0);
    const auto s = lp::solve(p);
    REQUIRE(s.optimal());
    CHECK(s.objective_value == doctest::Approx(1.0));
}
