#include "varexp/energy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace varexp {

namespace {

struct Gradient {
    double gx = 0.0;
    double gy = 0.0;
    double norm2() const { return gx * gx + gy * gy; }
};

Gradient element_gradient(const Element& e, std::span<const double> u) {
    Gradient g;
    for (int k = 0; k < e.size; ++k) {
        const double v = u[static_cast<std::size_t>(e.nodes[static_cast<std::size_t>(k)])];
        g.gx += e.dx[static_cast<std::size_t>(k)] * v;
        g.gy += e.dy[static_cast<std::size_t>(k)] * v;
    }
    return g;
}

// |g|^{pe-2}, exactly 1 for pe == 2 and 0 at g == 0 otherwise
double flux_weight(double norm2, double pe) {
    if (pe == 2.0) {
        return 1.0;
    }
    if (norm2 == 0.0) {
        return 0.0;
    }
    return std::pow(norm2, 0.5 * (pe - 2.0));
}

double pos_pow(double s, double q) { return s > 0.0 ? std::pow(s, q) : 0.0; }

void check_variant_grid(const Field& u, const EnergyVariant& v) {
    if (v.kind() == EnergyKind::Gtilde || v.kind() == EnergyKind::Ghat) {
        require_same_grid(u, v.lower());
    }
    if (v.kind() == EnergyKind::Gtilde) {
        require_same_grid(u, v.upper());
    }
}

SparseMatrix assemble_gradient_jacobian(const Field& u, double reg, double p_weight_scale,
                                        std::vector<Eigen::Triplet<double>>& triplets) {
    const Grid& g = u.grid();
    const auto values = u.values();
    // The regularisation is relative to the largest p-element gradient so
    // that it stays negligible however small the solution is.
    double gmax2 = 0.0;
    for (const Element& e : g.elements()) {
        if (e.exponent != 2.0) {
            gmax2 = std::max(gmax2, element_gradient(e, values).norm2());
        }
    }
    const double eps2 = reg * reg * (gmax2 > 0.0 ? gmax2 : 1.0);
    for (const Element& e : g.elements()) {
        const Gradient grad = element_gradient(e, values);
        double a11 = 0.0;
        double a12 = 0.0;
        double a22 = 0.0;
        if (e.exponent == 2.0) {
            a11 = a22 = 1.0;
        } else {
            const double pe = e.exponent;
            const double n2 = grad.norm2();
            const double base = std::pow(n2 + eps2, 0.5 * (pe - 2.0)) * p_weight_scale;
            // base * (I + (pe-2) ghat ghat^T); in 1D ghat ghat^T == 1 even at g == 0
            double t11 = 1.0;
            double t12 = 0.0;
            double t22 = 0.0;
            if (g.dimension() == 2) {
                if (n2 > 0.0) {
                    t11 = grad.gx * grad.gx / n2;
                    t12 = grad.gx * grad.gy / n2;
                    t22 = grad.gy * grad.gy / n2;
                } else {
                    t11 = t22 = 0.5;
                }
            }
            a11 = base * (1.0 + (pe - 2.0) * t11);
            a12 = base * (pe - 2.0) * t12;
            a22 = base * ((g.dimension() == 2 ? 1.0 : 0.0) + (pe - 2.0) * t22);
        }
        for (int k = 0; k < e.size; ++k) {
            const int rk = g.dof(e.nodes[static_cast<std::size_t>(k)]);
            if (rk < 0) {
                continue;
            }
            const double xk = e.dx[static_cast<std::size_t>(k)];
            const double yk = e.dy[static_cast<std::size_t>(k)];
            for (int l = 0; l < e.size; ++l) {
                const int cl = g.dof(e.nodes[static_cast<std::size_t>(l)]);
                if (cl < 0) {
                    continue;
                }
                const double xl = e.dx[static_cast<std::size_t>(l)];
                const double yl = e.dy[static_cast<std::size_t>(l)];
                const double val = e.measure * (xk * (a11 * xl + a12 * yl) + yk * (a12 * xl + a22 * yl));
                if (val != 0.0) {
                    triplets.emplace_back(rk, cl, val);
                }
            }
        }
    }
    SparseMatrix m(g.dof_count(), g.dof_count());
    m.setFromTriplets(triplets.begin(), triplets.end());
    return m;
}

SparseMatrix assemble_full_jacobian(const Field& u, const EnergyVariant& v, double reg, double p_weight_scale) {
    check_variant_grid(u, v);
    const Grid& g = u.grid();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(g.elements().size() * 9 + static_cast<std::size_t>(g.dof_count()));
    const double q = g.q();
    for (int d = 0; d < g.dof_count(); ++d) {
        const int node = g.dof_node(d);
        const double slope = v.source_slope(node, u[static_cast<std::size_t>(node)], q);
        triplets.emplace_back(d, d, -v.lambda() * slope * g.node_measure(node));
    }
    return assemble_gradient_jacobian(u, reg, p_weight_scale, triplets);
}

} // namespace

const char* to_string(EnergyKind kind) {
    switch (kind) {
    case EnergyKind::F:
        return "F";
    case EnergyKind::G:
        return "G";
    case EnergyKind::Gtilde:
        return "Gtilde";
    case EnergyKind::Ghat:
        return "Ghat";
    }
    return "?";
}

EnergyVariant EnergyVariant::F(double lambda) { return EnergyVariant(EnergyKind::F, lambda); }

EnergyVariant EnergyVariant::G(double lambda) { return EnergyVariant(EnergyKind::G, lambda); }

EnergyVariant EnergyVariant::Gtilde(double lambda, Field lower, Field upper) {
    require_same_grid(lower, upper);
    const Grid& g = lower.grid();
    for (int d = 0; d < g.dof_count(); ++d) {
        const auto k = static_cast<std::size_t>(g.dof_node(d));
        if (!(lower[k] > 0.0) || !(lower[k] <= upper[k])) {
            throw std::invalid_argument("Gtilde requires 0 < lower <= upper at every interior node");
        }
    }
    EnergyVariant v(EnergyKind::Gtilde, lambda);
    v.lower_ = std::move(lower);
    v.upper_ = std::move(upper);
    return v;
}

EnergyVariant EnergyVariant::Ghat(double lambda, Field lower) {
    const Grid& g = lower.grid();
    for (int d = 0; d < g.dof_count(); ++d) {
        if (!(lower[static_cast<std::size_t>(g.dof_node(d))] > 0.0)) {
            throw std::invalid_argument("Ghat requires lower > 0 at every interior node");
        }
    }
    EnergyVariant v(EnergyKind::Ghat, lambda);
    v.lower_ = std::move(lower);
    return v;
}

double EnergyVariant::source(int node, double s, double q) const {
    switch (kind_) {
    case EnergyKind::F:
        return s >= 0.0 ? std::pow(s, q) : -std::pow(-s, q);
    case EnergyKind::G:
        return pos_pow(s, q);
    case EnergyKind::Gtilde:
    case EnergyKind::Ghat:
        return truncation_h(*this, node, s);
    }
    return 0.0;
}

double EnergyVariant::primitive(int node, double s, double q) const {
    const double q1 = q + 1.0;
    switch (kind_) {
    case EnergyKind::F:
        return std::pow(std::abs(s), q1) / q1;
    case EnergyKind::G:
        return pos_pow(s, q1) / q1;
    case EnergyKind::Gtilde: {
        const double a = (*lower_)[static_cast<std::size_t>(node)];
        const double b = (*upper_)[static_cast<std::size_t>(node)];
        const double aq = std::pow(a, q);
        if (s <= a) {
            return aq * s;
        }
        const double at_a = aq * a;
        if (s < b) {
            return at_a + (std::pow(s, q1) - aq * a) / q1;
        }
        const double bq = std::pow(b, q);
        return at_a + (bq * b - aq * a) / q1 + bq * (s - b);
    }
    case EnergyKind::Ghat: {
        const double a = (*lower_)[static_cast<std::size_t>(node)];
        const double aq = std::pow(a, q);
        if (s <= a) {
            return aq * s;
        }
        return aq * a + (std::pow(s, q1) - aq * a) / q1;
    }
    }
    return 0.0;
}

double EnergyVariant::source_slope(int node, double s, double q) const {
    switch (kind_) {
    case EnergyKind::F:
        return s == 0.0 ? 0.0 : q * std::pow(std::abs(s), q - 1.0);
    case EnergyKind::G:
        return s > 0.0 ? q * std::pow(s, q - 1.0) : 0.0;
    case EnergyKind::Gtilde: {
        const double a = (*lower_)[static_cast<std::size_t>(node)];
        const double b = (*upper_)[static_cast<std::size_t>(node)];
        return (s >= a && s <= b) ? q * std::pow(s, q - 1.0) : 0.0;
    }
    case EnergyKind::Ghat: {
        const double a = (*lower_)[static_cast<std::size_t>(node)];
        return s >= a ? q * std::pow(s, q - 1.0) : 0.0;
    }
    }
    return 0.0;
}

double truncation_h(const EnergyVariant& v, int node, double s) {
    if (v.kind() != EnergyKind::Gtilde && v.kind() != EnergyKind::Ghat) {
        throw std::invalid_argument("truncation_h needs a Gtilde or Ghat variant");
    }
    const double q = v.lower().grid().q();
    const double a = v.lower()[static_cast<std::size_t>(node)];
    if (v.kind() == EnergyKind::Gtilde) {
        const double b = v.upper()[static_cast<std::size_t>(node)];
        if (s >= b) {
            return std::pow(b, q);
        }
        if (s > a) {
            return std::pow(s, q);
        }
        return std::pow(a, q);
    }
    return s > a ? std::pow(s, q) : std::pow(a, q);
}

double gradient_energy(const Field& u) {
    const auto values = u.values();
    double total = 0.0;
    for (const Element& e : u.grid().elements()) {
        const double n2 = element_gradient(e, values).norm2();
        total += e.measure * (e.exponent == 2.0 ? 0.5 * n2 : std::pow(n2, 0.5 * e.exponent) / e.exponent);
    }
    return total;
}

Field gradient_residual(const Field& u) {
    const Grid& g = u.grid();
    Field r(u.grid_ptr());
    const auto values = u.values();
    for (const Element& e : g.elements()) {
        const Gradient grad = element_gradient(e, values);
        const double w = e.measure * flux_weight(grad.norm2(), e.exponent);
        if (w == 0.0) {
            continue;
        }
        for (int k = 0; k < e.size; ++k) {
            const int node = e.nodes[static_cast<std::size_t>(k)];
            r[static_cast<std::size_t>(node)] +=
                w * (grad.gx * e.dx[static_cast<std::size_t>(k)] + grad.gy * e.dy[static_cast<std::size_t>(k)]);
        }
    }
    for (std::size_t k = 0; k < r.size(); ++k) {
        if (g.is_boundary(static_cast<int>(k))) {
            r[k] = 0.0;
        }
    }
    return r;
}

double gradient_flux_scale(const Field& u) {
    const Grid& g = u.grid();
    std::vector<double> acc(g.node_count(), 0.0);
    const auto values = u.values();
    for (const Element& e : g.elements()) {
        const Gradient grad = element_gradient(e, values);
        // bound on the round-off in grad: the nodal terms before cancellation
        double sx = 0.0;
        double sy = 0.0;
        for (int k = 0; k < e.size; ++k) {
            const double v = std::abs(values[static_cast<std::size_t>(e.nodes[static_cast<std::size_t>(k)])]);
            sx += std::abs(e.dx[static_cast<std::size_t>(k)]) * v;
            sy += std::abs(e.dy[static_cast<std::size_t>(k)]) * v;
        }
        const double gnorm = std::sqrt(grad.norm2());
        const double spread = gnorm + (e.exponent - 1.0) * std::hypot(sx, sy);
        const double w = e.measure * flux_weight(grad.norm2(), e.exponent) * spread;
        for (int k = 0; k < e.size; ++k) {
            acc[static_cast<std::size_t>(e.nodes[static_cast<std::size_t>(k)])] +=
                w * std::hypot(e.dx[static_cast<std::size_t>(k)], e.dy[static_cast<std::size_t>(k)]);
        }
    }
    double s = 0.0;
    for (int d = 0; d < g.dof_count(); ++d) {
        s = std::max(s, acc[static_cast<std::size_t>(g.dof_node(d))]);
    }
    return s;
}

SparseMatrix gradient_jacobian(const Field& u, double reg, double p_weight_scale) {
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(u.grid().elements().size() * 9);
    return assemble_gradient_jacobian(u, reg, p_weight_scale, triplets);
}

SparseMatrix laplacian_stiffness(const Grid& g) {
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(g.elements().size() * 9);
    for (const Element& e : g.elements()) {
        for (int k = 0; k < e.size; ++k) {
            const int rk = g.dof(e.nodes[static_cast<std::size_t>(k)]);
            if (rk < 0) {
                continue;
            }
            for (int l = 0; l < e.size; ++l) {
                const int cl = g.dof(e.nodes[static_cast<std::size_t>(l)]);
                if (cl < 0) {
                    continue;
                }
                const double val = e.measure * (e.dx[static_cast<std::size_t>(k)] * e.dx[static_cast<std::size_t>(l)] +
                                                 e.dy[static_cast<std::size_t>(k)] * e.dy[static_cast<std::size_t>(l)]);
                if (val != 0.0) {
                    triplets.emplace_back(rk, cl, val);
                }
            }
        }
    }
    SparseMatrix m(g.dof_count(), g.dof_count());
    m.setFromTriplets(triplets.begin(), triplets.end());
    return m;
}

double energy(const Field& u, const EnergyVariant& v) {
    check_variant_grid(u, v);
    const Grid& g = u.grid();
    double zero_order = 0.0;
    for (int d = 0; d < g.dof_count(); ++d) {
        const int node = g.dof_node(d);
        zero_order += g.node_measure(node) * v.primitive(node, u[static_cast<std::size_t>(node)], g.q());
    }
    return gradient_energy(u) - v.lambda() * zero_order;
}

Field residual(const Field& u, const EnergyVariant& v) {
    check_variant_grid(u, v);
    const Grid& g = u.grid();
    Field r = gradient_residual(u);
    if (v.lambda() != 0.0) {
        for (int d = 0; d < g.dof_count(); ++d) {
            const int node = g.dof_node(d);
            r[static_cast<std::size_t>(node)] -=
                v.lambda() * g.node_measure(node) * v.source(node, u[static_cast<std::size_t>(node)], g.q());
        }
    }
    return r;
}

SparseMatrix jacobian(const Field& u, const EnergyVariant& v, double reg) {
    return assemble_full_jacobian(u, v, reg, 1.0);
}

SparseMatrix jacobian_with_fault(const Field& u, const EnergyVariant& v, double reg, double p_weight_scale) {
    return assemble_full_jacobian(u, v, reg, p_weight_scale);
}

double residual_scale(const Field& u, const EnergyVariant& v) {
    const Grid& g = u.grid();
    double load = 0.0;
    for (int d = 0; d < g.dof_count(); ++d) {
        const int node = g.dof_node(d);
        load = std::max(load, std::abs(v.lambda() * g.node_measure(node) *
                                       v.source(node, u[static_cast<std::size_t>(node)], g.q())));
    }
    return gradient_flux_scale(u) + load;
}

double auxiliary_energy(const Field& u, const Field& load) {
    require_same_grid(u, load);
    const Grid& g = u.grid();
    double work = 0.0;
    for (int d = 0; d < g.dof_count(); ++d) {
        const auto node = static_cast<std::size_t>(g.dof_node(d));
        work += g.node_measure(static_cast<int>(node)) * load[node] * u[node];
    }
    return gradient_energy(u) - work;
}

Field auxiliary_residual(const Field& u, const Field& load) {
    require_same_grid(u, load);
    const Grid& g = u.grid();
    Field r = gradient_residual(u);
    for (int d = 0; d < g.dof_count(); ++d) {
        const auto node = static_cast<std::size_t>(g.dof_node(d));
        r[node] -= g.node_measure(static_cast<int>(node)) * load[node];
    }
    return r;
}

double auxiliary_residual_scale(const Field& u, const Field& load) {
    const Grid& g = u.grid();
    double l = 0.0;
    for (int d = 0; d < g.dof_count(); ++d) {
        const auto node = static_cast<std::size_t>(g.dof_node(d));
        l = std::max(l, std::abs(g.node_measure(static_cast<int>(node)) * load[node]));
    }
    return gradient_flux_scale(u) + l;
}

NormReport norms(const Field& u) {
    const Grid& g = u.grid();
    const auto values = u.values();
    double d1 = 0.0;
    double d2 = 0.0;
    double p = g.p();
    for (const Element& e : g.elements()) {
        const double n2 = element_gradient(e, values).norm2();
        if (e.in_d2) {
            p = e.exponent;
            d2 += e.measure * std::pow(n2, 0.5 * e.exponent);
        } else {
            d1 += e.measure * n2;
        }
    }
    NormReport r;
    r.grad_l2_d1 = std::sqrt(d1);
    r.grad_lp_d2 = std::pow(d2, 1.0 / p);
    r.bracket_norm = r.grad_l2_d1 + r.grad_lp_d2;
    r.sup_norm = u.sup_norm();
    double l2 = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        l2 += g.node_measure(static_cast<int>(k)) * u[k] * u[k];
    }
    r.l2_norm = std::sqrt(l2);
    return r;
}

double residual_sup(const Field& r) {
    const Grid& g = r.grid();
    double s = 0.0;
    for (int d = 0; d < g.dof_count(); ++d) {
        s = std::max(s, std::abs(r[static_cast<std::size_t>(g.dof_node(d))]));
    }
    return s;
}

Vector to_dofs(const Field& u) {
    const Grid& g = u.grid();
    Vector v(g.dof_count());
    for (int d = 0; d < g.dof_count(); ++d) {
        v[d] = u[static_cast<std::size_t>(g.dof_node(d))];
    }
    return v;
}

Field from_dofs(const GridPtr& grid, const Vector& v) {
    Field u(grid);
    for (int d = 0; d < grid->dof_count(); ++d) {
        u[static_cast<std::size_t>(grid->dof_node(d))] = v[d];
    }
    return u;
}

double dot_dofs(const Field& a, const Field& b) {
    require_same_grid(a, b);
    const Grid& g = a.grid();
    double s = 0.0;
    for (int d = 0; d < g.dof_count(); ++d) {
        const auto k = static_cast<std::size_t>(g.dof_node(d));
        s += a[k] * b[k];
    }
    return s;
}

} // namespace varexp
