#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "newton.hpp"
#include "varexp/solvers.hpp"

namespace varexp {

const char* to_string(IterationStatus s) {
    switch (s) {
    case IterationStatus::Converged:
        return "Converged";
    case IterationStatus::Diverged:
        return "Diverged";
    case IterationStatus::Stalled:
        return "Stalled";
    }
    return "?";
}

namespace {

bool finite_field(const Field& f) {
    return std::all_of(f.values().begin(), f.values().end(), [](double v) { return std::isfinite(v); });
}

// Runaway growth: past the cap and each of the last five sup norms at least
// 5% above its predecessor.
bool runaway(const std::vector<double>& sups, double cap) {
    if (sups.empty() || !(sups.back() > cap) || sups.size() < 5) {
        return false;
    }
    for (std::size_t k = sups.size() - 4; k < sups.size(); ++k) {
        if (!(sups[k] >= 1.05 * sups[k - 1])) {
            return false;
        }
    }
    return true;
}

} // namespace

IterationOutcome monotone_iteration(double lambda, const Field& w0, const SolverParams& params) {
    params.validate();
    const GridPtr& grid = w0.grid_ptr();
    const Grid& g = *grid;
    const double q = g.q();
    const EnergyVariant f = EnergyVariant::F(lambda);

    IterationOutcome out{IterationStatus::Stalled, std::nullopt, w0};
    out.iterates_sup_norms.push_back(w0.sup_norm());
    out.energy_trace.push_back(energy(w0, f));
    out.min_increment = std::numeric_limits<double>::infinity();

    Field w = w0;
    for (int it = 1; it <= params.monotone_max_iter; ++it) {
        Field load(grid);
        for (int d = 0; d < g.dof_count(); ++d) {
            const auto k = static_cast<std::size_t>(g.dof_node(d));
            load[k] = lambda * std::pow(std::max(w[k], 0.0), q);
        }
        Field next(grid);
        try {
            next = solve_auxiliary(load, params, &w);
        } catch (const SolverError&) {
            // a failed solve far above the cap is the blow-up itself
            if (w.sup_norm() > params.divergence_cap || !finite_field(load)) {
                out.status = IterationStatus::Diverged;
                out.iterations = it - 1;
                out.last_iterate = w;
                return out;
            }
            throw;
        }
        out.iterations = it;

        double change = 0.0;
        for (int d = 0; d < g.dof_count(); ++d) {
            const auto k = static_cast<std::size_t>(g.dof_node(d));
            const double inc = next[k] - w[k];
            change = std::max(change, std::abs(inc));
            out.min_increment = std::min(out.min_increment, inc);
        }
        w = std::move(next);
        const double sup = w.sup_norm();
        out.iterates_sup_norms.push_back(sup);
        out.energy_trace.push_back(finite_field(w) ? energy(w, f) : std::numeric_limits<double>::quiet_NaN());

        if (!finite_field(w) || runaway(out.iterates_sup_norms, params.divergence_cap)) {
            out.status = IterationStatus::Diverged;
            out.last_iterate = w;
            return out;
        }
        if (change <= params.monotone_tol * sup) {
            out.status = IterationStatus::Converged;
            out.residual_sup = residual_sup(residual(w, f));
            out.solution = w;
            out.last_iterate = std::move(w);
            return out;
        }
    }
    out.residual_sup = residual_sup(residual(w, f));
    out.last_iterate = std::move(w);
    return out;
}

IterationOutcome monotone_iteration(double lambda, const GridPtr& grid, const SolverParams& params) {
    return monotone_iteration(lambda, build_subsolution(lambda, grid, params).field, params);
}

Field minimize_truncated(double lambda, const Field& lower, const Field& upper, const SolverParams& params) {
    require_same_grid(lower, upper);
    const EnergyVariant gt = EnergyVariant::Gtilde(lambda, lower, upper);
    const double reg = params.regularization;

    detail::Objective obj;
    obj.energy = [&gt](const Field& u) { return energy(u, gt); };
    obj.gradient = [&gt](const Field& u) { return residual(u, gt); };
    obj.hessian = [&gt, reg](const Field& u) { return jacobian(u, gt, reg); };
    obj.scale = [&gt](const Field& u) { return residual_scale(u, gt); };
    obj.metric = [reg](const Field& u) { return gradient_jacobian(u, reg); };

    Field start = 0.5 * (lower + upper);
    const detail::NewtonResult res = detail::minimize(std::move(start), obj, params);
    if (!res.converged) {
        throw SolverError("truncated minimisation did not converge", res.iterations, res.residual);
    }
    const Grid& g = lower.grid();
    for (int d = 0; d < g.dof_count(); ++d) {
        const auto k = static_cast<std::size_t>(g.dof_node(d));
        if (res.u[k] < lower[k] - 1e-10 || res.u[k] > upper[k] + 1e-10) {
            throw SolverError("truncated minimiser left the ordered interval at node " + std::to_string(k),
                              res.iterations, res.residual);
        }
    }
    return res.u;
}

} // namespace varexp
