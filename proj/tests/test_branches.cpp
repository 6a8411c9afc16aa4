#include <doctest.h>

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "support.hpp"
#include "varexp/branches.hpp"

using namespace varexp;

namespace {

LambdaStarEstimate estimate(int n, const SolverParams& params) {
    const GridPtr g = testing::default_grid(n);
    const Supersolution s = build_supersolution_small_lambda(g, params);
    return estimate_lambda_star(g, s.lambda_tilde, 2.0 * s.lambda_tilde, 1e-2, params);
}

} // namespace

TEST_CASE("threshold bracket") {
    const SolverParams params;
    const LambdaStarEstimate e201 = estimate(201, params);
    CHECK(e201.lo > 0.0);
    CHECK(e201.lo < e201.hi);
    CHECK(e201.width() <= 1e-2 * e201.lo);
    CHECK_FALSE(e201.refinement_stalled);

    // the first probe sits at the small-lambda threshold, where existence is guaranteed
    REQUIRE_FALSE(e201.trace.empty());
    CHECK(e201.trace.front().status == IterationStatus::Converged);

    for (const Probe& a : e201.trace) {
        for (const Probe& b : e201.trace) {
            if (a.status == IterationStatus::Converged && b.status == IterationStatus::Diverged) {
                CHECK(a.lambda < b.lambda);
            }
        }
    }

    const GridPtr g = testing::default_grid(201);
    CHECK(monotone_iteration(e201.lo, g, params).status == IterationStatus::Converged);
    CHECK(monotone_iteration(e201.hi, g, params).status == IterationStatus::Diverged);

    const LambdaStarEstimate e101 = estimate(101, params);
    CHECK(std::abs(e101.lo - e201.lo) / e201.lo < 0.05);
}

TEST_CASE("unexpandable bracket is reported") {
    SolverParams params;
    params.monotone_max_iter = 1;  // every probe stalls
    const GridPtr g = testing::default_grid(51);
    CHECK_THROWS_AS(estimate_lambda_star(g, 1.0, 2.0, 1e-2, params), BracketError);
}

TEST_CASE("minimal branch grows with lambda") {
    const SolverParams params;
    const GridPtr g = testing::default_grid();
    const double lo = estimate(201, params).lo;
    ScanOptions opt;
    opt.lambda_star_lo = lo;
    opt.threads = 2;
    const BranchTable t = bifurcation_scan(g, {0.2 * lo, 0.4 * lo, 0.6 * lo, 0.8 * lo}, opt, params);
    REQUIRE(t.rows.size() == 4);
    for (std::size_t k = 0; k < t.rows.size(); ++k) {
        CHECK(t.rows[k].min_status == IterationStatus::Converged);
        CHECK(std::isfinite(t.rows[k].min_energy));
        CHECK_FALSE(t.rows[k].sec_sup);
        CHECK(t.rows[k].sec_status.empty());
        if (k > 0) {
            CHECK(t.rows[k].min_sup > t.rows[k - 1].min_sup);
        }
    }

    std::ostringstream csv;
    write_csv(csv, t);
    CHECK(csv.str().rfind("lambda,min_sup,min_energy,sec_sup,sec_level,sec_status\n", 0) == 0);
    const auto doc = nlohmann::json::parse(to_json_text(t));
    CHECK(doc["rows"].size() == 4);
}

TEST_CASE("second branch row is distinct from the minimal one") {
    const SolverParams params;
    const GridPtr g = testing::default_grid();
    const double lo = estimate(201, params).lo;
    ScanOptions opt;
    opt.with_second = true;
    opt.lambda_star_lo = lo;
    const BranchTable t = bifurcation_scan(g, {0.5 * lo}, opt, params);
    REQUIRE(t.rows.size() == 1);
    const BranchRow& r = t.rows.front();
    CHECK(r.error.empty());
    REQUIRE(r.sec_status == "Found");
    REQUIRE(r.sec_sup);
    CHECK(std::abs(*r.sec_sup - r.min_sup) > 1e-2 * r.min_sup);

    CHECK_THROWS_AS(bifurcation_scan(g, {1.5 * lo}, opt, params), std::invalid_argument);
}

TEST_CASE("verification battery") {
    const GridPtr g = testing::default_grid();
    const VerifyReport ok = verify_suite(g, SolverParams{});
    for (const VerifyCheck& c : ok.checks) {
        CAPTURE(c.name);
        CAPTURE(c.detail);
        CHECK(c.passed);
    }
    CHECK(ok.all_passed());
    CHECK(ok.checks.size() >= 13);

    VerifyOptions fault;
    fault.jacobian_fault = 1.5;
    const VerifyReport bad = verify_suite(g, SolverParams{}, fault);
    CHECK_FALSE(bad.all_passed());
    for (const VerifyCheck& c : bad.checks) {
        if (c.name == "jacobian_consistency") {
            CHECK_FALSE(c.passed);
            CHECK(c.measured > 1e-2);
        }
    }
    const auto doc = nlohmann::json::parse(to_json_text(ok));
    CHECK(doc.is_object());
}
