#pragma once

// Private Newton machinery shared by the solver translation units.

#include <functional>

#include "varexp/energy.hpp"
#include "varexp/solvers.hpp"

namespace varexp::detail {

struct Objective {
    std::function<double(const Field&)> energy;
    std::function<Field(const Field&)> gradient;
    std::function<SparseMatrix(const Field&)> hessian;
    std::function<double(const Field&)> scale;
    /// SPD fallback metric for non-convex objectives; unused when empty.
    std::function<SparseMatrix(const Field&)> metric;
};

struct NewtonResult {
    Field u;
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;
};

/// Residual tolerance actually enforced: newton_tol, tightened to 1e-12
/// relative for small problems, but never below the round-off floor.
double effective_tol(double newton_tol, double scale);

/// Damped Newton descent with Armijo backtracking on the energy.
NewtonResult minimize(Field u, const Objective& objective, const SolverParams& params);

/// Newton on gradient == 0 with backtracking on the residual norm; used to
/// polish saddle points, where descent on the energy is not an option.
NewtonResult find_root(Field u, const Objective& objective, const SolverParams& params);

/// Adds `alpha * d` (interior dofs) to u.
void axpy_dofs(Field& u, double alpha, const Vector& d);

} // namespace varexp::detail
