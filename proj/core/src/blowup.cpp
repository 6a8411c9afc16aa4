#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/SparseCholesky>

#include "varexp/solvers.hpp"

namespace varexp {

namespace {

GridPtr laplacian_box(const Grid& grid, const IndexBox& box) {
    for (const Element& e : grid.elements()) {
        bool inside = true;
        for (int k = 0; k < e.size; ++k) {
            const int node = e.nodes[static_cast<std::size_t>(k)];
            const int i = grid.index_x(node);
            const int j = grid.index_y(node);
            inside = inside && i >= box.i0 && i <= box.i1 && j >= box.j0 && j <= box.j1;
        }
        if (inside && e.exponent != 2.0) {
            throw std::invalid_argument("blow-up box must lie in the exponent-2 region");
        }
    }
    return grid.subgrid(box, 2.0, false);
}

Vector lumped_mass(const Grid& g) {
    Vector m(g.dof_count());
    for (int d = 0; d < g.dof_count(); ++d) {
        m[d] = g.node_measure(g.dof_node(d));
    }
    return m;
}

} // namespace

double principal_eigenvalue(const Grid& grid, const IndexBox& box) {
    const GridPtr sub = laplacian_box(grid, box);
    const SparseMatrix k = laplacian_stiffness(*sub);
    const Vector m = lumped_mass(*sub);
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(k);
    if (ldlt.info() != Eigen::Success) {
        throw SolverError("stiffness factorisation failed");
    }
    // inverse iteration for K x = mu M x
    Vector x = Vector::Ones(k.rows());
    double mu = 0.0;
    for (int it = 0; it < 1000; ++it) {
        Vector y = ldlt.solve(m.cwiseProduct(x));
        y /= std::sqrt(y.dot(m.cwiseProduct(y)));
        const double next = y.dot(k * y);
        x = std::move(y);
        if (std::abs(next - mu) <= 1e-14 * next) {
            mu = next;
            break;
        }
        mu = next;
    }
    return mu;
}

BlowupReport parabolic_blowup(double lambda, const Field& z0, const IndexBox& b2, const BlowupParams& params) {
    if (!(params.dt0 > 0.0) || !(params.t_max > 0.0) || !(params.threshold > 0.0)) {
        throw std::invalid_argument("blow-up parameters must be positive");
    }
    const GridPtr sub = laplacian_box(z0.grid(), b2);
    const Grid& g = *sub;
    const double q = g.q();
    const SparseMatrix k = laplacian_stiffness(g);
    const Vector m = lumped_mass(g);
    Vector w = to_dofs(restrict_to(z0, sub, b2));

    BlowupReport out;
    auto sup = [](const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); };
    double t = 0.0;
    double s = sup(w);
    out.times.push_back(t);
    out.supnorm_trace.push_back(s);

    double dt = params.dt0;
    double factored_dt = -1.0;
    Eigen::SimplicialLDLT<SparseMatrix> ldlt;
    while (t < params.t_max) {
        if (dt < params.dt_min) {
            out.inconclusive = true;
            out.t_event = t;
            break;
        }
        const double step = std::min(dt, params.t_max - t);
        if (step != factored_dt) {
            SparseMatrix a = k * step;
            for (int d = 0; d < a.rows(); ++d) {
                a.coeffRef(d, d) += m[d];
            }
            ldlt.compute(a);
            if (ldlt.info() != Eigen::Success) {
                throw SolverError("parabolic step factorisation failed");
            }
            factored_dt = step;
        }
        Vector rhs(w.size());
        for (Eigen::Index d = 0; d < w.size(); ++d) {
            rhs[d] = m[d] * (w[d] + step * lambda * std::pow(std::max(w[d], 0.0), q));
        }
        Vector next = ldlt.solve(rhs);
        const double s_next = sup(next);
        if (!std::isfinite(s_next) || (s > 0.0 && s_next > (1.0 + params.growth_limit) * s)) {
            dt *= 0.5;
            continue;
        }
        t += step;
        w = std::move(next);
        s = s_next;
        out.times.push_back(t);
        out.supnorm_trace.push_back(s);
        if (s > params.threshold) {
            out.blew_up = true;
            out.t_event = t;
            break;
        }
        if (s_next <= (1.0 + 0.25 * params.growth_limit) * out.supnorm_trace[out.supnorm_trace.size() - 2]) {
            dt = std::min(params.dt0, 2.0 * dt);
        }
    }
    out.final_time = t;
    return out;
}

} // namespace varexp
