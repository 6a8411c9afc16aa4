#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "varexp/energy.hpp"
#include "varexp/mesh.hpp"

namespace varexp {

class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, int iteration = -1, double residual = -1.0)
        : std::runtime_error(what), iteration_(iteration), residual_(residual) {}

    int iteration() const { return iteration_; }
    double residual() const { return residual_; }

private:
    int iteration_;
    double residual_;
};

struct SolverParams {
    double newton_tol = 1e-10;
    int newton_max_iter = 200;
    double backtrack = 0.5;
    double armijo = 1e-4;
    double regularization = 1e-8;
    double monotone_tol = 1e-9;
    int monotone_max_iter = 500;
    double divergence_cap = 1e6;

    /// Throws std::invalid_argument on non-positive tolerances or caps below them.
    void validate() const;
};

// --- auxiliary problem ----------------------------------------------------

/// Unique minimiser of I(u) = gradient part - sum f u m. `init` is only a
/// starting guess; the result does not depend on it.
Field solve_auxiliary(const Field& load, const SolverParams& params, const Field* init = nullptr);

/// Positive solution of -Delta_p v = lambda v^q on a homogeneous D2 grid
/// with zero Dirichlet data.
Field solve_plaplacian_sublinear(const GridPtr& d2_grid, double lambda, const SolverParams& params);

/// D2 restricted grid (exponent p everywhere, Dirichlet on the D2 outline).
GridPtr d2_grid_of(const Grid& grid);

struct Subsolution {
    Field field;
    double max_residual = 0.0;  // max over interior nodes of residual(field, F); <= 0 for a subsolution
};

/// Canonical subsolution: the D2 solution extended by zero.
Subsolution build_subsolution(double lambda, const GridPtr& grid, const SolverParams& params);

struct Supersolution {
    Field field;
    double sup = 0.0;
    double lambda_tilde = 0.0;
    double min_residual = 0.0;  // min over interior nodes of residual(field, F at lambda_tilde)
};

/// Solves the auxiliary problem with load 1; the result is a supersolution
/// for every lambda <= lambda_tilde = 1 / sup^q.
Supersolution build_supersolution_small_lambda(const GridPtr& grid, const SolverParams& params);

// --- monotone iteration ---------------------------------------------------

enum class IterationStatus { Converged, Diverged, Stalled };
const char* to_string(IterationStatus s);

struct IterationOutcome {
    IterationStatus status = IterationStatus::Stalled;
    std::optional<Field> solution;  // set when Converged
    Field last_iterate;
    std::vector<double> iterates_sup_norms{};  // includes w0
    std::vector<double> energy_trace{};        // F_lambda of each iterate
    int iterations = 0;
    double residual_sup = 0.0;  // residual(last_iterate, F)
    /// Smallest w_{n+1} - w_n over all steps and nodes (>= -slack for a monotone chain).
    double min_increment = 0.0;
};

IterationOutcome monotone_iteration(double lambda, const Field& w0, const SolverParams& params);
/// Convenience overload starting from build_subsolution(lambda).
IterationOutcome monotone_iteration(double lambda, const GridPtr& grid, const SolverParams& params);

// --- ordered-interval minimiser ------------------------------------------

/// Global minimiser of Gtilde on [lower, upper]; throws SolverError if the
/// result leaves the interval.
Field minimize_truncated(double lambda, const Field& lower, const Field& upper, const SolverParams& params);

// --- mountain pass --------------------------------------------------------

struct MountainPassParams {
    int path_nodes = 41;
    double tol = 1e-6;
    int max_outer = 5000;
    double collapse_tol = 1e-6;
    /// Distinctness threshold relative to sup |utilde|.
    double distinct_rel = 1e-2;
    bool keep_snapshots = false;
    int snapshot_every = 100;
    SolverParams newton{};
};

enum class MPStatus { Found, PathCollapsed, MaxIter };
const char* to_string(MPStatus s);

struct MPOutcome {
    MPStatus status = MPStatus::MaxIter;
    Field critical_point;
    double level = 0.0;          // Ghat at critical_point
    double path_max = 0.0;       // largest Ghat along the final path
    double base_level = 0.0;     // Ghat(utilde)
    double residual_norm = 0.0;  // sup of residual(critical_point, Ghat)
    double distance = 0.0;       // sup |critical_point - utilde|
    int outer_iterations = 0;
    bool endpoints_fixed = true;
    std::vector<Field> path_snapshots{};
};

/// Default far endpoint: T * bump, the bump a product of sines on an
/// interior D1 box, with T doubled until Ghat(T bump) < Ghat(utilde) - 1.
Field default_peak(double lambda, const Field& utilde, const Field& lower);

/// Path-deformation search for a critical point of Ghat (truncated below at
/// `lower`) at the mountain-pass level between `utilde` and `peak`.
MPOutcome mountain_pass(double lambda, const Field& utilde, const Field& lower, const Field& peak,
                        const MountainPassParams& params);

// --- parabolic blow-up ----------------------------------------------------

struct BlowupParams {
    double dt0 = 1e-3;
    double t_max = 10.0;
    double threshold = 1e6;
    double growth_limit = 0.02;  // halve dt when sup grows by more than this per step
    double dt_min = 1e-14;
};

struct BlowupReport {
    bool blew_up = false;
    bool inconclusive = false;  // dt underflow before a verdict
    double t_event = 0.0;
    double final_time = 0.0;
    std::vector<double> times;
    std::vector<double> supnorm_trace;
};

/// w_t - Delta w = lambda w^q on the box `b2` (exponent 2 throughout), zero
/// Dirichlet data on its outline, initial data `z0` restricted to the box.
BlowupReport parabolic_blowup(double lambda, const Field& z0, const IndexBox& b2, const BlowupParams& params);

/// Smallest eigenvalue of the discrete Dirichlet Laplacian on the box, with
/// the lumped mass (so it approximates the continuous one).
double principal_eigenvalue(const Grid& grid, const IndexBox& box);

} // namespace varexp
