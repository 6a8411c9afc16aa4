#include "newton.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

namespace varexp::detail {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double norm2_dofs(const Field& r) {
    const Vector v = to_dofs(r);
    return v.norm();
}

} // namespace

double effective_tol(double newton_tol, double scale) {
    const double floor = 64.0 * kEps * scale;
    return std::max(std::min(newton_tol, 1e-12 * scale), floor);
}

void axpy_dofs(Field& u, double alpha, const Vector& d) {
    const Grid& g = u.grid();
    for (int k = 0; k < g.dof_count(); ++k) {
        u[static_cast<std::size_t>(g.dof_node(k))] += alpha * d[k];
    }
}

NewtonResult minimize(Field u, const Objective& obj, const SolverParams& params) {
    NewtonResult out{u};
    const GridPtr grid = u.grid_ptr();
    if (grid->dof_count() == 0) {
        out.u = std::move(u);
        out.converged = true;
        return out;
    }
    double e0 = obj.energy(u);
    for (int it = 0; it <= params.newton_max_iter; ++it) {
        const Field r = obj.gradient(u);
        const double rs = residual_sup(r);
        out.iterations = it;
        out.residual = rs;
        if (rs <= effective_tol(params.newton_tol, obj.scale(u))) {
            out.converged = true;
            break;
        }
        if (it == params.newton_max_iter) {
            break;
        }

        const Vector rv = to_dofs(r);
        Vector d;
        bool have_direction = false;
        {
            Eigen::SimplicialLDLT<SparseMatrix> ldlt(obj.hessian(u));
            if (ldlt.info() == Eigen::Success) {
                const bool definite = (ldlt.vectorD().array() > 0.0).all();
                if (definite || !obj.metric) {
                    d = ldlt.solve(-rv);
                    have_direction = ldlt.info() == Eigen::Success && d.allFinite() && d.dot(rv) < 0.0;
                }
            }
        }
        if (!have_direction && obj.metric) {
            Eigen::SimplicialLDLT<SparseMatrix> ldlt(obj.metric(u));
            if (ldlt.info() == Eigen::Success) {
                d = ldlt.solve(-rv);
                have_direction = d.allFinite() && d.dot(rv) < 0.0;
            }
        }
        if (!have_direction) {
            d = -rv;
        }
        const double slope = d.dot(rv);

        double alpha = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            Field trial = u;
            axpy_dofs(trial, alpha, d);
            const double e1 = obj.energy(trial);
            bool ok = std::isfinite(e1) && e1 <= e0 + params.armijo * alpha * slope;
            if (!ok && std::isfinite(e1) && e1 - e0 <= 1e-13 * std::max(1.0, std::abs(e0))) {
                // energy differences are below round-off: judge the step by the residual
                ok = residual_sup(obj.gradient(trial)) < rs;
            }
            if (ok) {
                u = std::move(trial);
                e0 = e1;
                accepted = true;
                break;
            }
            alpha *= params.backtrack;
        }
        if (!accepted) {
            break;
        }
    }
    out.u = std::move(u);
    return out;
}

NewtonResult find_root(Field u, const Objective& obj, const SolverParams& params) {
    NewtonResult out{u};
    if (u.grid().dof_count() == 0) {
        out.converged = true;
        return out;
    }
    for (int it = 0; it <= params.newton_max_iter; ++it) {
        const Field r = obj.gradient(u);
        const double rs = residual_sup(r);
        out.iterations = it;
        out.residual = rs;
        if (rs <= effective_tol(params.newton_tol, obj.scale(u))) {
            out.converged = true;
            break;
        }
        if (it == params.newton_max_iter) {
            break;
        }
        SparseMatrix jac = obj.hessian(u);
        jac.makeCompressed();
        Eigen::SparseLU<SparseMatrix> lu;
        lu.compute(jac);
        if (lu.info() != Eigen::Success) {
            break;
        }
        const Vector d = lu.solve(-to_dofs(r));
        if (lu.info() != Eigen::Success || !d.allFinite()) {
            break;
        }
        const double r0 = norm2_dofs(r);
        double alpha = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            Field trial = u;
            axpy_dofs(trial, alpha, d);
            const double r1 = norm2_dofs(obj.gradient(trial));
            if (std::isfinite(r1) && r1 <= (1.0 - params.armijo * alpha) * r0) {
                u = std::move(trial);
                accepted = true;
                break;
            }
            alpha *= params.backtrack;
        }
        if (!accepted) {
            break;
        }
    }
    out.u = std::move(u);
    return out;
}

} // namespace varexp::detail
