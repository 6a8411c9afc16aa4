#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/SparseCholesky>

#include "newton.hpp"
#include "varexp/solvers.hpp"

namespace varexp {

void SolverParams::validate() const {
    if (!(newton_tol > 0.0) || !(monotone_tol > 0.0) || !(regularization > 0.0)) {
        throw std::invalid_argument("solver tolerances must be positive");
    }
    if (newton_max_iter < 1 || monotone_max_iter < 1) {
        throw std::invalid_argument("iteration budgets must be at least 1");
    }
    if (!(backtrack > 0.0 && backtrack < 1.0) || !(armijo > 0.0 && armijo < 0.5)) {
        throw std::invalid_argument("line-search constants out of range");
    }
    if (!(divergence_cap > monotone_tol)) {
        throw std::invalid_argument("divergence cap must exceed the monotone tolerance");
    }
}

namespace {

// Starting guess for the auxiliary problem: the Laplacian solution with the
// same load, rescaled by the scalar t minimising I(t * u_lin). The rescale
// matters in p-regions, where the true solution scales like load^{1/(p-1)}.
Field linear_guess(const Field& load) {
    const GridPtr& grid = load.grid_ptr();
    const Grid& g = *grid;
    Vector rhs(g.dof_count());
    for (int d = 0; d < g.dof_count(); ++d) {
        const int node = g.dof_node(d);
        rhs[d] = g.node_measure(node) * load[static_cast<std::size_t>(node)];
    }
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(laplacian_stiffness(g));
    if (ldlt.info() != Eigen::Success) {
        throw SolverError("Laplacian stiffness factorisation failed");
    }
    Field u = from_dofs(grid, ldlt.solve(rhs));

    const double work = rhs.dot(to_dofs(u));
    if (!(work > 0.0)) {
        return u;
    }
    // phi(t) = sum_e m_e |g_e|^pe t^{pe-1} - work, increasing in t
    const auto values = u.values();
    std::vector<std::pair<double, double>> terms;  // (coefficient, exponent - 1)
    for (const Element& e : g.elements()) {
        double gx = 0.0;
        double gy = 0.0;
        for (int k = 0; k < e.size; ++k) {
            const double v = values[static_cast<std::size_t>(e.nodes[static_cast<std::size_t>(k)])];
            gx += e.dx[static_cast<std::size_t>(k)] * v;
            gy += e.dy[static_cast<std::size_t>(k)] * v;
        }
        const double n2 = gx * gx + gy * gy;
        if (n2 > 0.0) {
            terms.emplace_back(e.measure * std::pow(n2, 0.5 * e.exponent), e.exponent - 1.0);
        }
    }
    auto phi = [&](double t) {
        double s = -work;
        for (const auto& [c, e] : terms) {
            s += c * std::pow(t, e);
        }
        return s;
    };
    double lo = 1e-30;
    double hi = 1e30;
    for (int it = 0; it < 200 && hi / lo > 1.0 + 1e-12; ++it) {
        const double mid = std::sqrt(lo * hi);
        (phi(mid) > 0.0 ? hi : lo) = mid;
    }
    u *= std::sqrt(lo * hi);
    return u;
}

detail::Objective auxiliary_objective(const Field& load, double reg) {
    detail::Objective obj;
    obj.energy = [&load](const Field& u) { return auxiliary_energy(u, load); };
    obj.gradient = [&load](const Field& u) { return auxiliary_residual(u, load); };
    obj.hessian = [reg](const Field& u) { return gradient_jacobian(u, reg); };
    obj.scale = [&load](const Field& u) { return auxiliary_residual_scale(u, load); };
    return obj;
}

bool all_zero(const Field& f) {
    const Grid& g = f.grid();
    for (int d = 0; d < g.dof_count(); ++d) {
        if (f[static_cast<std::size_t>(g.dof_node(d))] != 0.0) {
            return false;
        }
    }
    return true;
}

} // namespace

Field solve_auxiliary(const Field& load, const SolverParams& params, const Field* init) {
    Field start = (init == nullptr || all_zero(*init)) ? linear_guess(load) : *init;
    require_same_grid(start, load);
    const detail::NewtonResult res = detail::minimize(std::move(start), auxiliary_objective(load, params.regularization), params);
    if (!res.converged) {
        throw SolverError("auxiliary Newton solve did not converge", res.iterations, res.residual);
    }
    return res.u;
}

GridPtr d2_grid_of(const Grid& grid) {
    if (!grid.has_d2()) {
        throw GridError("grid has no D2 region");
    }
    return grid.subgrid(grid.d2_box(), grid.p(), true);
}

Field solve_plaplacian_sublinear(const GridPtr& grid, double lambda, const SolverParams& params) {
    const Grid& g = *grid;
    const double p = g.p();
    const double q = g.q();
    if (!(q < p - 1.0)) {
        throw std::invalid_argument("sublinear D2 problem needs q < p - 1");
    }
    if (!(lambda > 0.0)) {
        throw std::invalid_argument("sublinear D2 problem needs lambda > 0");
    }
    for (const Element& e : g.elements()) {
        if (e.exponent != p) {
            throw std::invalid_argument("sublinear D2 problem needs a homogeneous exponent-p grid");
        }
    }

    // v_{k+1} = A(lambda v_k^q) contracts in the log-sup metric with factor q/(p-1)
    Field v = constant_field(grid, 1.0);
    for (int it = 0; it < 2000; ++it) {
        Field load(grid);
        for (int d = 0; d < g.dof_count(); ++d) {
            const auto k = static_cast<std::size_t>(g.dof_node(d));
            load[k] = lambda * std::pow(std::max(v[k], 0.0), q);
        }
        Field next = solve_auxiliary(load, params, &v);
        const double change = sup_distance(next, v);
        v = std::move(next);
        if (change <= 1e-10 * v.sup_norm()) {
            break;
        }
    }

    const EnergyVariant f = EnergyVariant::F(lambda);
    detail::Objective obj;
    obj.energy = [&f](const Field& u) { return energy(u, f); };
    obj.gradient = [&f](const Field& u) { return residual(u, f); };
    obj.hessian = [&f, &params](const Field& u) { return jacobian(u, f, params.regularization); };
    obj.scale = [&f](const Field& u) { return residual_scale(u, f); };
    const double before = residual_sup(residual(v, f));
    detail::NewtonResult polished = detail::find_root(v, obj, params);
    if (polished.residual < before && polished.u.min_interior() > 0.0) {
        v = std::move(polished.u);
    }
    if (!(v.min_interior() > 0.0)) {
        throw SolverError("sublinear D2 solution is not positive");
    }
    return v;
}

Subsolution build_subsolution(double lambda, const GridPtr& grid, const SolverParams& params) {
    const GridPtr d2 = d2_grid_of(*grid);
    const Field v = solve_plaplacian_sublinear(d2, lambda, params);
    Subsolution out{extend_by_zero(v, grid, grid->d2_box())};
    const Field r = residual(out.field, EnergyVariant::F(lambda));
    double worst = -std::numeric_limits<double>::infinity();
    for (int d = 0; d < grid->dof_count(); ++d) {
        worst = std::max(worst, r[static_cast<std::size_t>(grid->dof_node(d))]);
    }
    out.max_residual = worst;
    return out;
}

Supersolution build_supersolution_small_lambda(const GridPtr& grid, const SolverParams& params) {
    SolverParams tight = params;
    tight.newton_tol = std::min(params.newton_tol, 1e-13);
    Field bar = solve_auxiliary(constant_field(grid, 1.0), tight);
    Supersolution out{bar};
    out.sup = bar.sup_norm();
    out.lambda_tilde = 1.0 / std::pow(out.sup, grid->q());
    const Field r = residual(bar, EnergyVariant::F(out.lambda_tilde));
    double worst = std::numeric_limits<double>::infinity();
    for (int d = 0; d < grid->dof_count(); ++d) {
        worst = std::min(worst, r[static_cast<std::size_t>(grid->dof_node(d))]);
    }
    out.min_residual = worst;
    return out;
}

} // namespace varexp
