#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "varexp/mesh.hpp"
#include "varexp/solvers.hpp"

namespace varexp {

// --- threshold search -----------------------------------------------------

struct Probe {
    double lambda = 0.0;
    IterationStatus status = IterationStatus::Stalled;
    int iterations = 0;
    double sup = 0.0;
    bool retried = false;  // Stalled once, re-run with a larger budget
};

struct LambdaStarEstimate {
    double lo = 0.0;  // largest lambda with a Converged probe
    double hi = 0.0;  // smallest lambda with a Diverged probe
    double width() const { return hi - lo; }
    std::vector<Probe> trace;
    /// Set when a probe stayed Stalled after the retry; refinement stopped there.
    bool refinement_stalled = false;
};

/// Raised when no Converged/Diverged pair can be found by expanding the bracket.
class BracketError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bisection on monotone-iteration outcomes until (hi - lo) <= tol * lo.
LambdaStarEstimate estimate_lambda_star(const GridPtr& grid, double lambda_lo, double lambda_hi, double tol,
                                        const SolverParams& params);

// --- bifurcation table ----------------------------------------------------

struct BranchRow {
    double lambda = 0.0;
    IterationStatus min_status = IterationStatus::Stalled;
    double min_sup = 0.0;
    double min_energy = 0.0;
    std::optional<double> sec_sup;
    std::optional<double> sec_level;
    std::string sec_status;  // empty when the second branch was not requested
    std::string error;       // per-row failure message, if any
};

struct BranchTable {
    std::vector<BranchRow> rows;
};

struct ScanOptions {
    bool with_second = false;
    /// Current threshold estimate; bounds the upper truncation parameter.
    double lambda_star_lo = 0.0;
    MountainPassParams mountain_pass{};
    unsigned threads = 1;
};

/// One row per lambda (order preserved). Failures are recorded in the row.
BranchTable bifurcation_scan(const GridPtr& grid, const std::vector<double>& lambdas, const ScanOptions& options,
                             const SolverParams& params);

void write_csv(std::ostream& os, const BranchTable& table);
std::string to_json_text(const BranchTable& table);
std::string to_json_text(const LambdaStarEstimate& estimate);

// --- verification battery --------------------------------------------------

struct VerifyCheck {
    std::string name;
    bool passed = false;
    double measured = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct VerifyReport {
    std::vector<VerifyCheck> checks;
    bool all_passed() const;
};

struct VerifyOptions {
    std::uint64_t seed = 42;
    /// Multiplier on the p-element Jacobian weights; anything but 1 injects
    /// a fault that the Jacobian check must catch.
    double jacobian_fault = 1.0;
};

VerifyReport verify_suite(const GridPtr& grid, const SolverParams& params, const VerifyOptions& options = {});

std::string to_json_text(const VerifyReport& report);

} // namespace varexp
