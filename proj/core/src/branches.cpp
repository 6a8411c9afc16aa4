#include "varexp/branches.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <thread>

#include <json.hpp>

#include "newton.hpp"

namespace varexp {

namespace {

using nlohmann::json;

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Probe run_probe(const GridPtr& grid, double lambda, const SolverParams& params) {
    auto once = [&](const SolverParams& p) {
        const IterationOutcome out = monotone_iteration(lambda, grid, p);
        return Probe{lambda, out.status, out.iterations, out.last_iterate.sup_norm(), false};
    };
    Probe probe = once(params);
    if (probe.status == IterationStatus::Stalled) {
        SolverParams bigger = params;
        bigger.monotone_max_iter *= 4;
        probe = once(bigger);
        probe.retried = true;
    }
    return probe;
}

} // namespace

LambdaStarEstimate estimate_lambda_star(const GridPtr& grid, double lambda_lo, double lambda_hi, double tol,
                                        const SolverParams& params) {
    if (!(lambda_lo > 0.0) || !(lambda_hi > lambda_lo) || !(tol > 0.0)) {
        throw std::invalid_argument("threshold search needs 0 < lambda_lo < lambda_hi and tol > 0");
    }
    LambdaStarEstimate est;
    auto probe = [&](double lambda) {
        est.trace.push_back(run_probe(grid, lambda, params));
        return est.trace.back().status;
    };
    auto stalled = [&](double lambda) {
        est.refinement_stalled = true;
        return BracketError("probe at lambda = " + fmt17(lambda) + " stalled after retry");
    };

    constexpr int kMaxExpansions = 60;
    double lo = lambda_lo;
    double hi = lambda_hi;
    int k = 0;
    for (IterationStatus s = probe(lo); s != IterationStatus::Converged; s = probe(lo)) {
        if (s == IterationStatus::Stalled) {
            throw stalled(lo);
        }
        hi = lo;
        lo *= 0.5;
        if (++k > kMaxExpansions) {
            throw BracketError("every probe diverged down to lambda = " + fmt17(lo));
        }
    }
    k = 0;
    for (IterationStatus s = probe(hi); s != IterationStatus::Diverged; s = probe(hi)) {
        if (s == IterationStatus::Stalled) {
            throw stalled(hi);
        }
        lo = hi;
        hi *= 2.0;
        if (++k > kMaxExpansions) {
            throw BracketError("every probe converged up to lambda = " + fmt17(hi));
        }
    }

    while (hi - lo > tol * lo) {
        const double mid = 0.5 * (lo + hi);
        const IterationStatus s = probe(mid);
        if (s == IterationStatus::Converged) {
            lo = mid;
        } else if (s == IterationStatus::Diverged) {
            hi = mid;
        } else {
            // a stall is evidence for neither side: keep the certified bracket
            est.refinement_stalled = true;
            break;
        }
    }
    est.lo = lo;
    est.hi = hi;
    return est;
}

// --- bifurcation scan -------------------------------------------------------

namespace {

BranchRow scan_row(const GridPtr& grid, double lambda, const ScanOptions& opt, const SolverParams& params) {
    BranchRow row;
    row.lambda = lambda;
    try {
        const IterationOutcome minimal = monotone_iteration(lambda, grid, params);
        row.min_status = minimal.status;
        row.min_sup = minimal.last_iterate.sup_norm();
        row.min_energy = energy(minimal.last_iterate, EnergyVariant::F(lambda));
        if (minimal.status != IterationStatus::Converged) {
            row.error = std::string("minimal branch ") + to_string(minimal.status);
            if (opt.with_second) {
                row.sec_status = "Skipped";
            }
            return row;
        }
        if (!opt.with_second) {
            return row;
        }
        const double l1 = 0.9 * lambda;
        const double l2 = std::min(1.1 * lambda, opt.lambda_star_lo);
        const IterationOutcome o1 = monotone_iteration(l1, grid, params);
        const IterationOutcome o2 = monotone_iteration(l2, grid, params);
        if (!o1.solution || !o2.solution) {
            row.sec_status = "Skipped";
            row.error = "truncation bounds did not converge";
            return row;
        }
        const Field utilde = minimize_truncated(lambda, *o1.solution, *o2.solution, params);
        const Field peak = default_peak(lambda, utilde, *o1.solution);
        const MPOutcome mp = mountain_pass(lambda, utilde, *o1.solution, peak, opt.mountain_pass);
        row.sec_status = to_string(mp.status);
        row.sec_level = mp.level;
        row.sec_sup = mp.critical_point.sup_norm();
    } catch (const std::exception& e) {
        row.error = e.what();
        if (opt.with_second && row.sec_status.empty()) {
            row.sec_status = "Error";
        }
    }
    return row;
}

} // namespace

BranchTable bifurcation_scan(const GridPtr& grid, const std::vector<double>& lambdas, const ScanOptions& options,
                             const SolverParams& params) {
    if (!std::is_sorted(lambdas.begin(), lambdas.end())) {
        throw std::invalid_argument("lambda values must be sorted ascending");
    }
    if (options.with_second) {
        for (double l : lambdas) {
            if (!(l < options.lambda_star_lo)) {
                throw std::invalid_argument("second-branch scan needs every lambda below the threshold estimate");
            }
        }
    }
    BranchTable table;
    table.rows.resize(lambdas.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < lambdas.size(); i = next++) {
            table.rows[i] = scan_row(grid, lambdas[i], options, params);
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(lambdas.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n; ++t) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& t : pool) {
        t.join();
    }
    return table;
}

void write_csv(std::ostream& os, const BranchTable& table) {
    os << "lambda,min_sup,min_energy,sec_sup,sec_level,sec_status\n";
    for (const BranchRow& r : table.rows) {
        os << fmt17(r.lambda) << ',' << fmt17(r.min_sup) << ',' << fmt17(r.min_energy) << ','
           << (r.sec_sup ? fmt17(*r.sec_sup) : "") << ',' << (r.sec_level ? fmt17(*r.sec_level) : "") << ','
           << r.sec_status << '\n';
    }
}

std::string to_json_text(const BranchTable& table) {
    json rows = json::array();
    for (const BranchRow& r : table.rows) {
        json j{{"lambda", r.lambda},
               {"min_status", to_string(r.min_status)},
               {"min_sup", r.min_sup},
               {"min_energy", r.min_energy},
               {"sec_sup", r.sec_sup ? json(*r.sec_sup) : json(nullptr)},
               {"sec_level", r.sec_level ? json(*r.sec_level) : json(nullptr)},
               {"sec_status", r.sec_status}};
        if (!r.error.empty()) {
            j["error"] = r.error;
        }
        rows.push_back(std::move(j));
    }
    return json{{"rows", rows}}.dump(2);
}

std::string to_json_text(const LambdaStarEstimate& e) {
    json trace = json::array();
    for (const Probe& p : e.trace) {
        trace.push_back({{"lambda", p.lambda},
                         {"status", to_string(p.status)},
                         {"iterations", p.iterations},
                         {"sup", p.sup},
                         {"retried", p.retried}});
    }
    return json{{"lo", e.lo},
                {"hi", e.hi},
                {"width", e.width()},
                {"relative_width", e.lo > 0.0 ? e.width() / e.lo : 0.0},
                {"refinement_stalled", e.refinement_stalled},
                {"trace", trace}}
        .dump(2);
}

// --- verification battery -----------------------------------------------------

bool VerifyReport::all_passed() const {
    return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const VerifyCheck& c) { return c.passed; });
}

namespace {

Field random_field(const GridPtr& grid, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Field f(grid);
    for (int d = 0; d < grid->dof_count(); ++d) {
        f[static_cast<std::size_t>(grid->dof_node(d))] = dist(rng);
    }
    return f;
}

double max_violation(const Field& small, const Field& big) {
    double worst = -std::numeric_limits<double>::infinity();
    const Grid& g = small.grid();
    for (int d = 0; d < g.dof_count(); ++d) {
        const auto k = static_cast<std::size_t>(g.dof_node(d));
        worst = std::max(worst, small[k] - big[k]);
    }
    return worst;
}

struct Battery {
    VerifyReport report;

    // `measure` returns (measured, detail); the check passes when measured <= threshold.
    void run(const std::string& name, double threshold, const std::function<std::pair<double, std::string>()>& measure) {
        VerifyCheck c{name, false, std::numeric_limits<double>::quiet_NaN(), threshold, {}};
        try {
            auto [m, detail] = measure();
            c.measured = m;
            c.detail = std::move(detail);
            c.passed = m <= threshold;
        } catch (const std::exception& e) {
            c.detail = std::string("exception: ") + e.what();
        }
        report.checks.push_back(std::move(c));
    }
};

} // namespace

VerifyReport verify_suite(const GridPtr& grid, const SolverParams& params, const VerifyOptions& options) {
    std::mt19937_64 rng(options.seed);
    Battery b;
    const Grid& g = *grid;

    b.run("gradient_consistency", 1e-6, [&] {
        const Field lower = constant_field(grid, 0.3);
        const Field upper = constant_field(grid, 0.7);
        const std::vector<EnergyVariant> variants{EnergyVariant::F(1.0), EnergyVariant::G(1.0),
                                                  EnergyVariant::Gtilde(1.0, lower, upper),
                                                  EnergyVariant::Ghat(1.0, lower)};
        double worst = 0.0;
        for (int k = 0; k < 20; ++k) {
            const Field u = random_field(grid, rng, -0.2, 1.0);
            const Field dir = random_field(grid, rng, -1.0, 1.0);
            for (const EnergyVariant& v : variants) {
                const double eps = 1e-6;
                const double fd = (energy(u + eps * dir, v) - energy(u - eps * dir, v)) / (2.0 * eps);
                const double an = dot_dofs(residual(u, v), dir);
                worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(an), std::abs(fd), 1e-300}));
            }
        }
        return std::pair{worst, std::string("max relative error of central differences over 20 fields x 4 variants")};
    });

    b.run("jacobian_consistency", 1e-5, [&] {
        const EnergyVariant f = EnergyVariant::F(1.0);
        double worst = 0.0;
        for (int k = 0; k < 5; ++k) {
            const Field u = random_field(grid, rng, 0.1, 1.0);
            const Field dir = random_field(grid, rng, -1.0, 1.0);
            const double eps = 1e-6;
            const Vector fd = (to_dofs(residual(u + eps * dir, f)) - to_dofs(residual(u - eps * dir, f))) / (2.0 * eps);
            const Vector an = jacobian_with_fault(u, f, params.regularization, options.jacobian_fault) * to_dofs(dir);
            worst = std::max(worst, (fd - an).lpNorm<Eigen::Infinity>() / std::max(an.lpNorm<Eigen::Infinity>(), 1e-300));
        }
        return std::pair{worst, std::string("relative sup error of J*d against central differences of the residual")};
    });

    b.run("operator_monotonicity", 0.0, [&] {
        double worst = 0.0;
        for (int k = 0; k < 20; ++k) {
            const Field u = random_field(grid, rng, -1.0, 1.0);
            const Field v = random_field(grid, rng, -1.0, 1.0);
            const double pairing = dot_dofs(gradient_residual(u) - gradient_residual(v), u - v);
            const double scale = gradient_flux_scale(u) + gradient_flux_scale(v);
            worst = std::max(worst, -pairing - 1e-12 * scale * static_cast<double>(g.dof_count()));
        }
        return std::pair{worst, std::string("largest negative part of <A(u)-A(v), u-v>")};
    });

    b.run("auxiliary_convexity", 0.0, [&] {
        const Field load = random_field(grid, rng, -1.0, 1.0);
        double worst = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < 20; ++k) {
            const Field u = random_field(grid, rng, -1.0, 1.0);
            const Field v = random_field(grid, rng, -1.0, 1.0);
            const double mid = auxiliary_energy(0.5 * (u + v), load);
            const double avg = 0.5 * (auxiliary_energy(u, load) + auxiliary_energy(v, load));
            worst = std::max(worst, mid - avg - 1e-12 * std::abs(avg));
        }
        return std::pair{worst, std::string("max of I((u+v)/2) - (I(u)+I(v))/2")};
    });

    // everything below shares the minimal solution at half the small-lambda threshold
    std::optional<Supersolution> super;
    std::optional<IterationOutcome> chain;
    double lambda = 0.0;
    try {
        super = build_supersolution_small_lambda(grid, params);
        lambda = 0.5 * super->lambda_tilde;
        chain = monotone_iteration(lambda, grid, params);
    } catch (const std::exception&) {
        // reported by the checks that need them
    }
    auto need = [&] {
        if (!super || !chain) {
            throw SolverError("supersolution or minimal solution unavailable");
        }
        if (!chain->solution) {
            throw SolverError(std::string("minimal iteration ") + to_string(chain->status));
        }
        return *chain->solution;
    };

    b.run("supersolution_sign", 1e-12, [&] {
        need();
        return std::pair{-super->min_residual, std::string("negated min residual of u_bar at lambda_tilde")};
    });

    b.run("subsolution_sign", 1e-12, [&] {
        const Subsolution sub = build_subsolution(lambda, grid, params);
        return std::pair{sub.max_residual, std::string("max residual of the canonical subsolution")};
    });

    b.run("monotone_chain", 1e-12, [&] {
        const Field w = need();
        const double above = max_violation(w, super->field);
        if (above > 1e-10) {
            return std::pair{std::numeric_limits<double>::infinity(), "limit exceeds u_bar by " + fmt17(above)};
        }
        return std::pair{-chain->min_increment, std::string("largest decrease between consecutive iterates")};
    });

    b.run("comparison", 1e-10, [&] {
        const Field w = need();
        const Subsolution sub = build_subsolution(lambda, grid, params);
        double worst = std::max(max_violation(sub.field, w), max_violation(w, super->field));
        for (int k = 0; k < 5; ++k) {
            const Field f1 = random_field(grid, rng, -1.0, 1.0);
            const Field f2 = f1 + random_field(grid, rng, 0.0, 1.0);
            worst = std::max(worst, max_violation(solve_auxiliary(f1, params), solve_auxiliary(f2, params)));
        }
        return std::pair{worst, std::string("largest ordering violation over sub/minimal/super and 5 load pairs")};
    });

    b.run("positivity", 0.0, [&] {
        const Field w = need();
        return std::pair{-w.min_interior(), std::string("negated min interior value of the minimal solution")};
    });

    b.run("flux_balance", 1e-8, [&] {
        const Field w = need();
        // element fluxes at every node; boundary nodes collect the outflow
        std::vector<double> raw(g.node_count(), 0.0);
        for (const Element& e : g.elements()) {
            double gx = 0.0;
            double gy = 0.0;
            for (int k = 0; k < e.size; ++k) {
                const double v = w[static_cast<std::size_t>(e.nodes[static_cast<std::size_t>(k)])];
                gx += e.dx[static_cast<std::size_t>(k)] * v;
                gy += e.dy[static_cast<std::size_t>(k)] * v;
            }
            const double n2 = gx * gx + gy * gy;
            const double weight = e.exponent == 2.0 ? 1.0 : (n2 > 0.0 ? std::pow(n2, 0.5 * (e.exponent - 2.0)) : 0.0);
            for (int k = 0; k < e.size; ++k) {
                raw[static_cast<std::size_t>(e.nodes[static_cast<std::size_t>(k)])] +=
                    e.measure * weight * (gx * e.dx[static_cast<std::size_t>(k)] + gy * e.dy[static_cast<std::size_t>(k)]);
            }
        }
        double outflow = 0.0;
        double source = 0.0;
        for (std::size_t k = 0; k < raw.size(); ++k) {
            if (g.is_boundary(static_cast<int>(k))) {
                outflow -= raw[k];
            } else {
                source += lambda * g.node_measure(static_cast<int>(k)) * std::pow(std::max(w[k], 0.0), g.q());
            }
        }
        double interface = 0.0;
        const Field r = residual(w, EnergyVariant::F(lambda));
        for (int node : g.interface_nodes()) {
            interface = std::max(interface, std::abs(r[static_cast<std::size_t>(node)]));
        }
        const double balance = std::abs(outflow - source) / std::max(source, 1e-300);
        return std::pair{std::max(balance, interface / std::max(source, 1e-300)),
                         "relative boundary outflow vs source " + fmt17(balance) + ", interface residual " +
                             fmt17(interface)};
    });

    b.run("lambda_monotonicity", 1e-10, [&] {
        const Field w = need();
        const IterationOutcome lower = monotone_iteration(0.5 * lambda, grid, params);
        if (!lower.solution) {
            throw SolverError("minimal iteration at lambda/2 did not converge");
        }
        return std::pair{max_violation(*lower.solution, w), std::string("w(lambda/2) - w(lambda), max over nodes")};
    });

    b.run("scaling_law", 1e-6, [&] {
        const GridPtr d2 = d2_grid_of(g);
        const double gamma = 1.0 / (g.p() - 1.0 - g.q());
        const Field v1 = solve_plaplacian_sublinear(d2, 1.0, params);
        const Field v2 = solve_plaplacian_sublinear(d2, 2.0, params);
        const double defect = sup_distance(v2, std::pow(2.0, gamma) * v1) / v2.sup_norm();
        return std::pair{defect, "relative defect of v_2 against 2^gamma v_1, gamma = " + fmt17(gamma)};
    });

    b.run("p2_reduction", 1e-8, [&] {
        double worst = 0.0;
        // the configured source exponent: with p = 2 the problem is purely superlinear,
        // the canonical start is w0 = 0 and both routes must stay at the trivial solution
        {
            const GridPtr g2 = g.with_exponents(2.0, g.q());
            const IterationOutcome it = monotone_iteration(lambda, zero_field(g2), params);
            if (!it.solution) {
                throw SolverError("p = 2 monotone iteration did not converge");
            }
            const EnergyVariant f = EnergyVariant::F(lambda);
            detail::Objective obj;
            obj.energy = [&f](const Field& u) { return energy(u, f); };
            obj.gradient = [&f](const Field& u) { return residual(u, f); };
            obj.hessian = [&f, &params](const Field& u) { return jacobian(u, f, params.regularization); };
            obj.scale = [&f](const Field& u) { return residual_scale(u, f); };
            const detail::NewtonResult direct = detail::find_root(zero_field(g2), obj, params);
            worst = std::max(worst, sup_distance(*it.solution, direct.u));
        }
        // nontrivial companion: a sublinear source, where the positive solution is unique
        {
            const GridPtr g2 = g.with_exponents(2.0, 0.5);
            const double l2 = 1.0;
            const IterationOutcome it = monotone_iteration(l2, g2, params);
            if (!it.solution) {
                throw SolverError("p = 2, q = 0.5 monotone iteration did not converge");
            }
            const EnergyVariant f = EnergyVariant::F(l2);
            detail::Objective obj;
            obj.energy = [&f](const Field& u) { return energy(u, f); };
            obj.gradient = [&f](const Field& u) { return residual(u, f); };
            obj.hessian = [&f, &params](const Field& u) { return jacobian(u, f, params.regularization); };
            obj.scale = [&f](const Field& u) { return residual_scale(u, f); };
            obj.metric = [&params](const Field& u) { return gradient_jacobian(u, params.regularization); };
            const Field start = solve_auxiliary(constant_field(g2, l2), params);
            const detail::NewtonResult direct = detail::minimize(start, obj, params);
            if (!direct.converged) {
                throw SolverError("direct Newton for the p = 2 companion did not converge");
            }
            worst = std::max(worst, sup_distance(*it.solution, direct.u));
        }
        return std::pair{worst, std::string("sup distance between monotone iteration and direct Newton")};
    });

    return b.report;
}

std::string to_json_text(const VerifyReport& report) {
    json checks = json::array();
    for (const VerifyCheck& c : report.checks) {
        checks.push_back({{"name", c.name},
                          {"passed", c.passed},
                          {"measured", std::isfinite(c.measured) ? json(c.measured) : json(nullptr)},
                          {"threshold", c.threshold},
                          {"detail", c.detail}});
    }
    return json{{"all_passed", report.all_passed()}, {"checks", checks}}.dump(2);
}

} // namespace varexp
