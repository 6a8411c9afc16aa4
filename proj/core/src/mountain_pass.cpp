#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/SparseCholesky>

#include "newton.hpp"
#include "varexp/solvers.hpp"

namespace varexp {

const char* to_string(MPStatus s) {
    switch (s) {
    case MPStatus::Found:
        return "Found";
    case MPStatus::PathCollapsed:
        return "PathCollapsed";
    case MPStatus::MaxIter:
        return "MaxIter";
    }
    return "?";
}

Field default_peak(double lambda, const Field& utilde, const Field& lower) {
    const GridPtr& grid = utilde.grid_ptr();
    const Grid& g = *grid;
    const IndexBox box = interior_d1_box(g);
    Field bump(grid);
    const double lx = g.x(box.i1) - g.x(box.i0);
    const double ly = g.dimension() == 2 ? g.y(box.j1) - g.y(box.j0) : 1.0;
    for (int j = box.j0; j <= box.j1; ++j) {
        for (int i = box.i0 + 1; i < box.i1; ++i) {
            double v = std::sin(std::numbers::pi * (g.x(i) - g.x(box.i0)) / lx);
            if (g.dimension() == 2) {
                if (j == box.j0 || j == box.j1) {
                    continue;
                }
                v *= std::sin(std::numbers::pi * (g.y(j) - g.y(box.j0)) / ly);
            }
            bump[static_cast<std::size_t>(g.node(i, j))] = v;
        }
    }
    const EnergyVariant gh = EnergyVariant::Ghat(lambda, lower);
    const double target = energy(utilde, gh) - 1.0;
    double t = 1.0;
    for (int k = 0; k < 200; ++k, t *= 2.0) {
        Field candidate = t * bump;
        if (energy(candidate, gh) < target) {
            return candidate;
        }
    }
    throw SolverError("could not find a far endpoint below the base level");
}

namespace {

struct PathState {
    std::vector<Field> nodes;
    std::vector<double> levels;
};

double metric_norm(const SparseMatrix& k, const Vector& d) { return std::sqrt(std::max(0.0, d.dot(k * d))); }

double metric_distance(const SparseMatrix& k, const Field& a, const Field& b) {
    return metric_norm(k, to_dofs(a) - to_dofs(b));
}

enum class Grading { DenseAtStart, DenseAtEnd };

// `count` points along the polygon `poly` at arclength positions graded
// quadratically towards one end (first and last points are copies of the
// polygon ends).
std::vector<Field> resample(const std::vector<const Field*>& poly, std::size_t count, const SparseMatrix& k,
                            Grading grading) {
    std::vector<double> s(poly.size(), 0.0);
    for (std::size_t i = 1; i < poly.size(); ++i) {
        s[i] = s[i - 1] + metric_distance(k, *poly[i], *poly[i - 1]);
    }
    std::vector<Field> out;
    out.reserve(count);
    std::size_t seg = 0;
    for (std::size_t j = 0; j < count; ++j) {
        if (j == 0 || poly.size() == 1) {
            out.push_back(*poly.front());
            continue;
        }
        if (j + 1 == count) {
            out.push_back(*poly.back());
            continue;
        }
        const double x = static_cast<double>(j) / static_cast<double>(count - 1);
        const double target = s.back() * (grading == Grading::DenseAtStart ? x * x : 1.0 - (1.0 - x) * (1.0 - x));
        while (seg + 2 < poly.size() && s[seg + 1] < target) {
            ++seg;
        }
        const double len = s[seg + 1] - s[seg];
        const double theta = len > 0.0 ? std::clamp((target - s[seg]) / len, 0.0, 1.0) : 0.0;
        out.push_back((1.0 - theta) * *poly[seg] + theta * *poly[seg + 1]);
    }
    return out;
}

// Re-evens the deformed part 0..last so that node `top` moves to the middle
// index, with arclength spacing on either side graded to be finest next to
// it. Right of the top, nodes that are already below base - rise are moved
// into the frozen tail (which continues the path to the peak), so the
// movable nodes stay concentrated around the pass. Node 0 and everything
// after `last` are never written; the top node is copied unchanged.
std::size_t reparametrize(PathState& path, std::vector<Field>& tail, std::size_t top, std::size_t last,
                          double base, const SparseMatrix& k, const EnergyVariant& gh) {
    const double rise = path.levels[top] - base;
    std::size_t end = last;
    for (std::size_t j = top + 1; j < last; ++j) {
        if (path.levels[j] < base - rise) {
            end = j;
            break;
        }
    }
    const std::size_t mid = last / 2;
    std::vector<const Field*> left;
    std::vector<const Field*> right;
    for (std::size_t j = 0; j <= top; ++j) {
        left.push_back(&path.nodes[j]);
    }
    for (std::size_t j = top; j <= end; ++j) {
        right.push_back(&path.nodes[j]);
    }
    std::vector<Field> a = resample(left, mid + 1, k, Grading::DenseAtEnd);
    std::vector<Field> b = resample(right, last - mid + 1, k, Grading::DenseAtStart);
    if (end < last) {
        tail.insert(tail.begin(), path.nodes.begin() + static_cast<std::ptrdiff_t>(end + 1),
                    path.nodes.begin() + static_cast<std::ptrdiff_t>(last + 1));
    }
    for (std::size_t j = 1; j < mid; ++j) {
        path.nodes[j] = std::move(a[j]);
        path.levels[j] = energy(path.nodes[j], gh);
    }
    for (std::size_t j = 0; j < b.size(); ++j) {
        if (mid + j == top && j == 0) {
            continue;
        }
        path.nodes[mid + j] = std::move(b[j]);
        path.levels[mid + j] = energy(path.nodes[mid + j], gh);
    }
    return mid;
}

// Position of the anchor on the initial segment: past the energy maximum,
// where the energy has dropped below the base by as much as it rose above
// it. The segment beyond it stays below the base level, so the deformation
// can work on [0, t_anchor] alone. Falls back to 1 when the profile is not
// unimodal.
double anchor_parameter(const Field& utilde, const Field& peak, const EnergyVariant& gh, double base) {
    constexpr int kSamples = 4000;
    std::vector<double> e(kSamples + 1);
    for (int i = 0; i <= kSamples; ++i) {
        const double t = static_cast<double>(i) / kSamples;
        e[static_cast<std::size_t>(i)] = energy((1.0 - t) * utilde + t * peak, gh);
    }
    const auto top = static_cast<std::size_t>(std::max_element(e.begin(), e.end()) - e.begin());
    const double rise = e[top] - base;
    if (!(rise > 0.0)) {
        return 1.0;
    }
    for (std::size_t i = top + 1; i < e.size(); ++i) {
        if (e[i] < base - rise) {
            const bool below = std::all_of(e.begin() + static_cast<std::ptrdiff_t>(i), e.end(),
                                           [&](double v) { return v < base; });
            return below ? static_cast<double>(i) / kSamples : 1.0;
        }
    }
    return 1.0;
}

bool bitwise_equal(const Field& a, const Field& b) {
    const auto x = a.values();
    const auto y = b.values();
    return std::equal(x.begin(), x.end(), y.begin(), y.end(),
                      [](double u, double v) { return std::memcmp(&u, &v, sizeof(double)) == 0; });
}

} // namespace

MPOutcome mountain_pass(double lambda, const Field& utilde, const Field& lower, const Field& peak,
                        const MountainPassParams& params) {
    require_same_grid(utilde, lower);
    require_same_grid(utilde, peak);
    if (params.path_nodes < 3) {
        throw std::invalid_argument("mountain pass needs at least 3 path nodes");
    }
    const GridPtr& grid = utilde.grid_ptr();
    const EnergyVariant gh = EnergyVariant::Ghat(lambda, lower);
    const double reg = params.newton.regularization;

    MPOutcome out{MPStatus::MaxIter, utilde};
    out.base_level = energy(utilde, gh);

    const SparseMatrix stiffness = laplacian_stiffness(*grid);
    Eigen::SimplicialLDLT<SparseMatrix> metric(stiffness);
    if (metric.info() != Eigen::Success) {
        throw SolverError("path metric factorisation failed");
    }

    // The deformed part of the path runs from utilde to an anchor on the
    // initial segment; the straight tail from the anchor to the peak stays
    // below the base level and is kept as is.
    const auto m = static_cast<std::size_t>(params.path_nodes);
    const double t_anchor = anchor_parameter(utilde, peak, gh, out.base_level);
    const std::size_t last = (t_anchor < 1.0 && m > 3) ? m - 2 : m - 1;
    const double t_last = last == m - 1 ? 1.0 : t_anchor;
    PathState path;
    path.nodes.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double t = t_last * static_cast<double>(j) / static_cast<double>(last);
        if (j == 0) {
            path.nodes.push_back(utilde);
        } else if (j + 1 == m) {
            path.nodes.push_back(peak);
        } else {
            path.nodes.push_back((1.0 - t) * utilde + t * peak);
        }
        path.levels.push_back(energy(path.nodes.back(), gh));
    }

    std::vector<Field> tail;  // frozen part between the anchor and the peak

    detail::Objective obj;
    obj.energy = [&gh](const Field& u) { return energy(u, gh); };
    obj.gradient = [&gh](const Field& u) { return residual(u, gh); };
    obj.hessian = [&gh, reg](const Field& u) { return jacobian(u, gh, reg); };
    obj.scale = [&gh](const Field& u) { return residual_scale(u, gh); };

    const double distinct = params.distinct_rel * std::max(utilde.sup_norm(), 1e-300);
    auto admissible = [&](const detail::NewtonResult& res) {
        if (!res.converged) {
            return false;
        }
        const Grid& g = *grid;
        for (int d = 0; d < g.dof_count(); ++d) {
            const auto k = static_cast<std::size_t>(g.dof_node(d));
            if (res.u[k] < lower[k] - 1e-8) {
                return false;
            }
        }
        return sup_distance(res.u, utilde) > distinct && energy(res.u, gh) >= out.base_level - 1e-12;
    };

    double alpha = 1.0;
    std::size_t top = 1;
    for (int it = 0; it < params.max_outer; ++it) {
        out.outer_iterations = it + 1;
        top = static_cast<std::size_t>(
            std::max_element(path.levels.begin() + 1, path.levels.begin() + static_cast<std::ptrdiff_t>(last)) -
            path.levels.begin());
        if (path.levels[top] <= out.base_level + params.collapse_tol) {
            out.status = MPStatus::PathCollapsed;
            break;
        }
        if (params.keep_snapshots && it % std::max(1, params.snapshot_every) == 0) {
            out.path_snapshots.push_back(path.nodes[top]);
        }

        // Newton polish once the path maximum is close to critical, and
        // periodically as a shortcut; a polished point must sit at the level
        // the path is resolving, not at some unrelated critical point.
        Field& v = path.nodes[top];
        const Field r = residual(v, gh);
        const bool close = residual_sup(r) <= params.tol * std::max(residual_scale(v, gh), 1e-300);
        if (close || (it > 0 && it % 50 == 0)) {
            detail::NewtonResult res = detail::find_root(v, obj, params.newton);
            const double rise = path.levels[top] - out.base_level;
            if (admissible(res) && std::abs(energy(res.u, gh) - path.levels[top]) <= 0.25 * rise) {
                out.status = MPStatus::Found;
                out.critical_point = std::move(res.u);
                break;
            }
        }

        // steepest descent in the Laplacian metric, at most half the distance
        // to the nearer neighbour so the polygon stays a path
        const Vector rv = to_dofs(r);
        Vector d = metric.solve(rv);
        // sliding along the path is the re-evening's job; descend across it
        Vector tau = to_dofs(path.nodes[top + 1]) - to_dofs(path.nodes[top - 1]);
        if (const double tn = metric_norm(stiffness, tau); tn > 0.0) {
            tau /= tn;
            d -= tau.dot(stiffness * d) * tau;
        }
        const double slope = rv.dot(d);
        const double reach = std::min(metric_distance(stiffness, v, path.nodes[top - 1]),
                                      metric_distance(stiffness, v, path.nodes[top + 1]));
        if (slope > 0.0) {
            alpha = std::min(alpha, 0.5 * reach / std::sqrt(slope));
        }
        for (int ls = 0; ls < 60; ++ls) {
            Field trial = v;
            detail::axpy_dofs(trial, -alpha, d);
            const double e1 = energy(trial, gh);
            if (e1 <= path.levels[top] - params.newton.armijo * alpha * slope) {
                v = std::move(trial);
                path.levels[top] = e1;
                break;
            }
            alpha *= 0.5;
        }
        top = reparametrize(path, tail, top, last, out.base_level, stiffness, gh);
        alpha *= 2.0;
    }

    out.path_max = *std::max_element(path.levels.begin(), path.levels.end());
    for (const Field& f : tail) {
        out.path_max = std::max(out.path_max, energy(f, gh));
    }
    if (out.status != MPStatus::Found) {
        out.critical_point = path.nodes[top];
    }
    out.level = energy(out.critical_point, gh);
    out.residual_norm = residual_sup(residual(out.critical_point, gh));
    out.distance = sup_distance(out.critical_point, utilde);
    out.endpoints_fixed = bitwise_equal(path.nodes.front(), utilde) && bitwise_equal(path.nodes.back(), peak);
    return out;
}

} // namespace varexp
