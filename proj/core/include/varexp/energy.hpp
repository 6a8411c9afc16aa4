#pragma once

#include <optional>
#include <span>

#include <Eigen/SparseCore>

#include "varexp/mesh.hpp"

namespace varexp {

/// Operator on interior unknowns (Grid::dof numbering).
using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

enum class EnergyKind { F, G, Gtilde, Ghat };

const char* to_string(EnergyKind kind);

/// Which functional to evaluate, and the data its zero-order term needs.
///
///   F       source |u|^{q-1} u
///   G       source u_+^q
///   Gtilde  source frozen outside [lower, upper]
///   Ghat    source frozen below lower
class EnergyVariant {
public:
    static EnergyVariant F(double lambda);
    static EnergyVariant G(double lambda);
    static EnergyVariant Gtilde(double lambda, Field lower, Field upper);
    static EnergyVariant Ghat(double lambda, Field lower);

    EnergyKind kind() const { return kind_; }
    double lambda() const { return lambda_; }
    const Field& lower() const { return *lower_; }
    const Field& upper() const { return *upper_; }

    /// Source term n(x, s) at `node` (the integrand of the weak form).
    double source(int node, double s, double q) const;
    /// Antiderivative N(x, s) = int_0^s n(x, t) dt.
    double primitive(int node, double s, double q) const;
    /// d n / ds, taking the middle-branch value at truncation knots.
    double source_slope(int node, double s, double q) const;

private:
    EnergyVariant(EnergyKind kind, double lambda) : kind_(kind), lambda_(lambda) {}

    EnergyKind kind_;
    double lambda_;
    std::optional<Field> lower_;
    std::optional<Field> upper_;
};

/// Truncated source h(x, s) of the Gtilde / Ghat variants.
double truncation_h(const EnergyVariant& variant, int node, double s);

struct NormReport {
    double grad_l2_d1 = 0.0;
    double grad_lp_d2 = 0.0;
    double bracket_norm = 0.0;
    double sup_norm = 0.0;
    double l2_norm = 0.0;
};

// --- gradient part: sum_e m_e |g_e|^{p_e} / p_e ---------------------------

double gradient_energy(const Field& u);
/// Nodal gradient of gradient_energy (conservative flux divergence, scaled by
/// the node measure). Boundary entries are zero.
Field gradient_residual(const Field& u);
/// Hessian of the gradient part. The p-weights use |g|^2 + (reg * G)^2 in
/// place of |g|^2, G being the largest p-element gradient (1 if all vanish).
/// `p_weight_scale` multiplies the contribution of elements with exponent
/// other than 2; anything but 1 gives a deliberately wrong operator (used
/// by the fault-injection fixture of the verify suite).
SparseMatrix gradient_jacobian(const Field& u, double reg, double p_weight_scale = 1.0);
/// Stiffness matrix of the plain Laplacian (every element treated as
/// exponent 2) on the interior unknowns. Symmetric positive definite.
SparseMatrix laplacian_stiffness(const Grid& grid);
/// Largest sum of absolute flux contributions at any node; the round-off
/// scale of gradient_residual.
double gradient_flux_scale(const Field& u);

// --- full functionals ---------------------------------------------------

double energy(const Field& u, const EnergyVariant& variant);
Field residual(const Field& u, const EnergyVariant& variant);
SparseMatrix jacobian(const Field& u, const EnergyVariant& variant, double reg = 1e-8);
SparseMatrix jacobian_with_fault(const Field& u, const EnergyVariant& variant, double reg, double p_weight_scale);
double residual_scale(const Field& u, const EnergyVariant& variant);

/// Auxiliary functional I(u) = gradient part - sum_i f_i u_i m_i for a given
/// load f.
double auxiliary_energy(const Field& u, const Field& load);
Field auxiliary_residual(const Field& u, const Field& load);
double auxiliary_residual_scale(const Field& u, const Field& load);

NormReport norms(const Field& u);

/// Sup norm over interior nodes of a residual field.
double residual_sup(const Field& r);

// --- dof <-> field helpers ----------------------------------------------

Vector to_dofs(const Field& u);
Field from_dofs(const GridPtr& grid, const Vector& v);
double dot_dofs(const Field& a, const Field& b);

} // namespace varexp
