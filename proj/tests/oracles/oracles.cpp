#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace oracle {

double torsion_sup(double p, double len) { return (p - 1.0) / p * std::pow(0.5 * len, p / (p - 1.0)); }

namespace {

struct State {
    double v;  // profile value
    double w;  // flux |v'|^{p-2} v'
};

State rhs(const State& s, double p, double q) {
    const double dv = -std::pow(std::max(-s.w, 0.0), 1.0 / (p - 1.0));
    return {dv, -std::pow(std::max(s.v, 0.0), q)};
}

State rk4(const State& s, double h, double p, double q) {
    const State k1 = rhs(s, p, q);
    const State k2 = rhs({s.v + 0.5 * h * k1.v, s.w + 0.5 * h * k1.w}, p, q);
    const State k3 = rhs({s.v + 0.5 * h * k2.v, s.w + 0.5 * h * k2.w}, p, q);
    const State k4 = rhs({s.v + h * k3.v, s.w + h * k3.w}, p, q);
    return {s.v + h / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v),
            s.w + h / 6.0 * (k1.w + 2.0 * k2.w + 2.0 * k3.w + k4.w)};
}

// Half-width at which the unit-peak profile (lambda = 1) reaches zero.
double unit_half_width(double p, double q) {
    const double h = 1e-5;
    State s{1.0, 0.0};
    double t = 0.0;
    for (long k = 0; k < 100000000; ++k) {
        const State next = rk4(s, h, p, q);
        if (next.v <= 0.0) {
            // bisect the last step for the zero crossing
            double lo = 0.0;
            double hi = h;
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (lo + hi);
                (rk4(s, mid, p, q).v > 0.0 ? lo : hi) = mid;
            }
            return t + 0.5 * (lo + hi);
        }
        s = next;
        t += h;
    }
    throw std::runtime_error("shooting did not reach zero");
}

} // namespace

double sublinear_peak(double p, double q, double lambda, double len) {
    if (!(q < p - 1.0)) {
        throw std::invalid_argument("need q < p - 1");
    }
    // v(x) = s phi(x / l) solves the problem iff s^{p-1-q} = lambda l^p
    const double l = 0.5 * len / unit_half_width(p, q);
    return std::pow(lambda * std::pow(l, p), 1.0 / (p - 1.0 - q));
}

double fd_dirichlet_eigenvalue(int cells, double len) {
    const double h = len / cells;
    const double s = std::sin(std::numbers::pi * h / (2.0 * len));
    return 4.0 / (h * h) * s * s;
}

double ode_time_to_level(double lambda, double q, double mu, double y0, double level) {
    // z = y^{1-q} obeys the linear equation z' = (q-1)(mu z - lambda)
    const double zs = lambda / mu;
    const double z0 = std::pow(y0, 1.0 - q);
    const double zl = std::pow(level, 1.0 - q);
    if (!(z0 < zs)) {
        return std::numeric_limits<double>::infinity();
    }
    return std::log((zs - zl) / (zs - z0)) / ((q - 1.0) * mu);
}

namespace {

// Solves a tridiagonal system in place (Thomas algorithm); sub/sup have n-1 entries.
std::vector<double> thomas(std::vector<double> sub, std::vector<double> diag, std::vector<double> sup,
                           std::vector<double> rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double m = sub[i - 1] / diag[i - 1];
        diag[i] -= m * sup[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    std::vector<double> x(n);
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) {
        x[i] = (rhs[i] - sup[i] * x[i + 1]) / diag[i];
    }
    return x;
}

} // namespace

std::vector<double> fd_sublinear_solution(int nodes, double x0, double x1, double lambda, double q) {
    const auto m = static_cast<std::size_t>(nodes - 2);  // interior unknowns
    const double h = (x1 - x0) / (nodes - 1);
    const double k = 1.0 / (h * h);
    std::vector<double> u(m, 1.0);

    // Picard: -u_{k+1}'' = lambda u_k^q contracts for q < 1
    for (int it = 0; it < 200; ++it) {
        std::vector<double> rhs(m);
        for (std::size_t i = 0; i < m; ++i) {
            rhs[i] = lambda * std::pow(std::max(u[i], 0.0), q);
        }
        u = thomas(std::vector<double>(m - 1, -k), std::vector<double>(m, 2.0 * k), std::vector<double>(m - 1, -k),
                   rhs);
    }
    // Newton on F(u) = -u'' - lambda u^q
    for (int it = 0; it < 50; ++it) {
        std::vector<double> f(m);
        std::vector<double> diag(m);
        double fmax = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double left = i > 0 ? u[i - 1] : 0.0;
            const double right = i + 1 < m ? u[i + 1] : 0.0;
            f[i] = k * (2.0 * u[i] - left - right) - lambda * std::pow(u[i], q);
            diag[i] = 2.0 * k - lambda * q * std::pow(u[i], q - 1.0);
            fmax = std::max(fmax, std::abs(f[i]));
        }
        if (fmax < 1e-14 * lambda) {
            break;
        }
        for (double& v : f) {
            v = -v;
        }
        const std::vector<double> d =
            thomas(std::vector<double>(m - 1, -k), diag, std::vector<double>(m - 1, -k), f);
        for (std::size_t i = 0; i < m; ++i) {
            u[i] += d[i];
        }
    }
    std::vector<double> out{0.0};
    out.insert(out.end(), u.begin(), u.end());
    out.push_back(0.0);
    return out;
}

} // namespace oracle
