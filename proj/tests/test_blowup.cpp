#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "support.hpp"
#include "varexp/solvers.hpp"

using namespace varexp;

namespace {

Field box_constant(const GridPtr& g, const IndexBox& b, double value) {
    Field z(g);
    for (int i = b.i0 + 1; i < b.i1; ++i) {
        z[static_cast<std::size_t>(g->node(i))] = value;
    }
    return z;
}

} // namespace

TEST_CASE("principal eigenvalue of the lumped Laplacian on a box") {
    const GridPtr g = testing::default_grid();
    const IndexBox b = interior_d1_box(*g);
    const double len = g->x(b.i1) - g->x(b.i0);
    CHECK(principal_eigenvalue(*g, b) == doctest::Approx(oracle::fd_dirichlet_eigenvalue(b.i1 - b.i0, len)).epsilon(1e-9));
}

TEST_CASE("blow-up happens before the averaged ODE reaches the threshold") {
    const GridPtr g = testing::default_grid();
    const IndexBox b = interior_d1_box(*g);
    const double lambda = 50.0;
    const double q = g->q();
    const BlowupReport rep = parabolic_blowup(lambda, box_constant(g, b, 10.0), b, BlowupParams{});
    REQUIRE(rep.blew_up);
    CHECK_FALSE(rep.inconclusive);
    CHECK(rep.supnorm_trace.back() > 1e6);
    CHECK(rep.t_event < 10.0);

    // the eigenfunction-weighted mean obeys a' >= lambda a^q - mu a and never exceeds the sup
    const double mu = oracle::fd_dirichlet_eigenvalue(b.i1 - b.i0, g->x(b.i1) - g->x(b.i0));
    const double bound = oracle::ode_time_to_level(lambda, q, mu, 10.0, 1e6);
    CHECK(rep.t_event < bound);
}

TEST_CASE("without a source the solution decays monotonically") {
    const GridPtr g = testing::default_grid();
    const IndexBox b = interior_d1_box(*g);
    BlowupParams p;
    p.t_max = 1.0;
    const BlowupReport rep = parabolic_blowup(0.0, box_constant(g, b, 10.0), b, p);
    CHECK_FALSE(rep.blew_up);
    CHECK_FALSE(rep.inconclusive);
    CHECK(rep.final_time == doctest::Approx(1.0));
    for (std::size_t k = 1; k < rep.supnorm_trace.size(); ++k) {
        CHECK(rep.supnorm_trace[k] <= rep.supnorm_trace[k - 1]);
    }
    CHECK(rep.supnorm_trace.back() < 1e-3);
}

TEST_CASE("blow-up box must avoid the p-region") {
    const GridPtr g = testing::default_grid(101);
    IndexBox b = g->d2_box();
    b.i0 -= 5;
    CHECK_THROWS(parabolic_blowup(1.0, zero_field(g), b, BlowupParams{}));
}
