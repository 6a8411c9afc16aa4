#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "support.hpp"
#include "varexp/solvers.hpp"

using namespace varexp;

TEST_CASE("auxiliary solver reproduces the torsion functions") {
    const SolverParams params;
    SUBCASE("Laplacian: P1 with lumped load is nodally exact") {
        for (int n : {101, 201}) {
            const GridPtr g = Grid::homogeneous({0.0, 1.0}, n, 2.0, 1.5, false);
            const double sup = solve_auxiliary(constant_field(g, 1.0), params).sup_norm();
            CHECK(std::abs(sup - oracle::torsion_sup(2.0, 1.0)) < 1e-12);
        }
    }
    SUBCASE("p = 3 converges at better than first order") {
        double errors[2];
        int idx = 0;
        for (int n : {201, 401}) {
            const GridPtr g = Grid::homogeneous({0.0, 1.0}, n, 3.0, 1.5, true);
            errors[idx++] = std::abs(solve_auxiliary(constant_field(g, 1.0), params).sup_norm() -
                                     oracle::torsion_sup(3.0, 1.0));
        }
        CHECK(errors[0] < 1e-3);
        CHECK(errors[0] / errors[1] >= 1.8);
    }
}

TEST_CASE("auxiliary minimiser does not depend on the starting guess") {
    const GridPtr g = testing::default_grid();
    const SolverParams params;
    std::mt19937_64 rng(21);
    const Field load = testing::random_field(g, rng, 0.0, 2.0);
    const Field a = solve_auxiliary(load, params);
    const Field start = testing::random_field(g, rng, -1.0, 1.0);
    const Field b = solve_auxiliary(load, params, &start);
    CHECK(sup_distance(a, b) <= 1e-9 * a.sup_norm());
}

TEST_CASE("D2 problem matches the shooting oracle and the scaling law") {
    const SolverParams params;
    const GridPtr g = testing::default_grid();
    const GridPtr d2 = d2_grid_of(*g);
    const Field v1 = solve_plaplacian_sublinear(d2, 1.0, params);
    const Field v2 = solve_plaplacian_sublinear(d2, 2.0, params);

    const double ref = oracle::sublinear_peak(3.0, 1.5, 1.0, 0.2);
    CHECK(std::abs(v1.sup_norm() - ref) / ref < 5e-3);

    const double gamma = 1.0 / (g->p() - 1.0 - g->q());
    CHECK(gamma == doctest::Approx(2.0));
    const double defect = sup_distance(v2, std::pow(2.0, gamma) * v1) / v2.sup_norm();
    CHECK(defect < 1e-6);
}

TEST_CASE("sublinear D2 problem rejects a superlinear exponent") {
    const GridPtr d2 = Grid::homogeneous({0.0, 1.0}, 21, 2.0, 1.5, true);
    CHECK_THROWS_AS(solve_plaplacian_sublinear(d2, 1.0, SolverParams{}), std::invalid_argument);
}

TEST_CASE("sub- and supersolution signs") {
    const GridPtr g = testing::default_grid();
    const SolverParams params;
    const Supersolution super = build_supersolution_small_lambda(g, params);
    CHECK(super.lambda_tilde == doctest::Approx(1.0 / std::pow(super.sup, g->q())));
    CHECK(super.min_residual >= -1e-12);
    const Subsolution sub = build_subsolution(super.lambda_tilde / 2.0, g, params);
    CHECK(sub.max_residual <= 1e-12);
    CHECK(sub.field.min_interior() >= 0.0);
}

TEST_CASE("monotone iteration from the subsolution below the small-lambda threshold") {
    const GridPtr g = testing::default_grid();
    const SolverParams params;
    const Supersolution super = build_supersolution_small_lambda(g, params);
    const IterationOutcome out = monotone_iteration(super.lambda_tilde / 2.0, g, params);
    REQUIRE(out.status == IterationStatus::Converged);
    REQUIRE(out.solution);
    CHECK(out.min_increment >= -1e-12);
    for (std::size_t k = 0; k < g->node_count(); ++k) {
        CHECK((*out.solution)[k] <= super.field[k] + 1e-10);
    }
    CHECK(out.solution->min_interior() > 0.0);
    CHECK(std::is_sorted(out.iterates_sup_norms.begin(), out.iterates_sup_norms.end()));
    CHECK(out.residual_sup < 1e-9);
}

TEST_CASE("monotone iteration diverges far above the threshold, deterministically") {
    const GridPtr g = testing::default_grid(101);
    const SolverParams params;
    const IterationOutcome a = monotone_iteration(400.0, g, params);
    const IterationOutcome b = monotone_iteration(400.0, g, params);
    CHECK(a.status == IterationStatus::Diverged);
    CHECK_FALSE(a.solution);
    CHECK(a.iterates_sup_norms == b.iterates_sup_norms);
}

TEST_CASE("ordered-interval minimiser") {
    const GridPtr g = testing::default_grid();
    const SolverParams params;
    const double lambda = 50.0;
    const IterationOutcome o1 = monotone_iteration(0.9 * lambda, g, params);
    const IterationOutcome o2 = monotone_iteration(1.1 * lambda, g, params);
    REQUIRE(o1.solution);
    REQUIRE(o2.solution);
    const Field& u1 = *o1.solution;
    const Field& u2 = *o2.solution;
    const Field ut = minimize_truncated(lambda, u1, u2, params);
    for (std::size_t k = 0; k < g->node_count(); ++k) {
        CHECK(ut[k] >= u1[k] - 1e-10);
        CHECK(ut[k] <= u2[k] + 1e-10);
    }
    CHECK(residual_sup(residual(ut, EnergyVariant::F(lambda))) <= 1e-9);

    const EnergyVariant gt = EnergyVariant::Gtilde(lambda, u1, u2);
    const double best = energy(ut, gt);
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> theta(0.0, 1.0);
    for (int s = 0; s < 100; ++s) {
        Field v = u1;
        for (std::size_t k = 0; k < v.size(); ++k) {
            v[k] += theta(rng) * (u2[k] - u1[k]);
        }
        CHECK(best <= energy(v, gt));
    }
}

TEST_CASE("p = 2 reduction") {
    const SolverParams params;
    const GridPtr base = testing::default_grid();

    SUBCASE("q = 1.5: the minimal solution is the trivial one") {
        const GridPtr g = base->with_exponents(2.0, 1.5);
        const IterationOutcome out = monotone_iteration(10.0, zero_field(g), params);
        REQUIRE(out.status == IterationStatus::Converged);
        CHECK(out.solution->sup_norm() == 0.0);
    }
    SUBCASE("q = 0.5: monotone limit matches a finite-difference Newton solve") {
        const GridPtr g = base->with_exponents(2.0, 0.5);
        const IterationOutcome out = monotone_iteration(1.0, g, params);
        REQUIRE(out.status == IterationStatus::Converged);
        const std::vector<double> ref = oracle::fd_sublinear_solution(g->nx(), 0.0, 1.0, 1.0, 0.5);
        double diff = 0.0;
        for (std::size_t k = 0; k < ref.size(); ++k) {
            diff = std::max(diff, std::abs(ref[k] - (*out.solution)[k]));
        }
        CHECK(diff < 1e-8);
    }
}

TEST_CASE("parameter validation") {
    SolverParams p;
    CHECK_NOTHROW(p.validate());
    p.newton_tol = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = SolverParams{};
    p.backtrack = 1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = SolverParams{};
    p.divergence_cap = p.monotone_tol / 2.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
