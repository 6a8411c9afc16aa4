#include "varexp/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <tuple>

namespace varexp {

namespace {

constexpr double kAlignTol = 1e-9;

struct AxisLayout {
    std::vector<double> coords;
    int ia = 0;
    int ib = 0;
};

bool is_integer(double t) { return std::abs(t - std::round(t)) < kAlignTol; }

AxisLayout layout_axis(const Interval& box, const Interval& d2, int n, Alignment alignment, const char* axis) {
    const double length = box.length();
    const int min_cells = n - 1;
    const int max_cells = std::max(4 * min_cells, min_cells + 1000);
    int cells = -1;
    for (int m = min_cells; m <= max_cells; ++m) {
        const double ta = (d2.lo - box.lo) / length * m;
        const double tb = (d2.hi - box.lo) / length * m;
        if (is_integer(ta) && is_integer(tb)) {
            cells = m;
            break;
        }
        if (alignment == Alignment::Strict) {
            std::ostringstream os;
            os << "interface not alignable without snapping: D2 faces on the " << axis << " axis ["
               << d2.lo << ", " << d2.hi << "] are not nodes of a " << n << "-node grid";
            throw GridError(os.str());
        }
    }
    if (cells < 0) {
        std::ostringstream os;
        os << "interface not alignable: no grid with at most " << max_cells + 1 << " nodes on the " << axis
           << " axis places " << d2.lo << " and " << d2.hi << " on nodes";
        throw GridError(os.str());
    }

    AxisLayout out;
    out.ia = static_cast<int>(std::lround((d2.lo - box.lo) / length * cells));
    out.ib = static_cast<int>(std::lround((d2.hi - box.lo) / length * cells));
    if (out.ib - out.ia + 1 < 3) {
        std::ostringstream os;
        os << "grid too coarse to resolve D2 on the " << axis << " axis: " << out.ib - out.ia + 1
           << " D2 nodes, need at least 3";
        throw GridError(os.str());
    }
    out.coords.resize(static_cast<std::size_t>(cells) + 1);
    for (int i = 0; i <= cells; ++i) {
        out.coords[static_cast<std::size_t>(i)] = box.lo + length * i / cells;
    }
    out.coords.front() = box.lo;
    out.coords.back() = box.hi;
    out.coords[static_cast<std::size_t>(out.ia)] = d2.lo;
    out.coords[static_cast<std::size_t>(out.ib)] = d2.hi;
    return out;
}

std::vector<double> uniform_coords(const Interval& box, int n) {
    std::vector<double> c(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        c[static_cast<std::size_t>(i)] = box.lo + box.length() * i / (n - 1);
    }
    c.front() = box.lo;
    c.back() = box.hi;
    return c;
}

} // namespace

void DomainSpec::validate_geometry() const {
    if (dimension != 1 && dimension != 2) {
        throw GridError("dimension must be 1 or 2");
    }
    auto check_axis = [](const Interval& box, const Interval& d2, const char* axis) {
        if (!(box.lo < box.hi)) {
            throw GridError(std::string("empty outer box on the ") + axis + " axis");
        }
        if (!(d2.lo < d2.hi)) {
            throw GridError(std::string("empty D2 region on the ") + axis + " axis");
        }
        if (!(box.lo < d2.lo && d2.hi < box.hi)) {
            throw GridError(std::string("D2 must lie strictly inside the outer box (D2 touches the boundary on the ") +
                            axis + " axis)");
        }
    };
    check_axis(x, d2_x, "x");
    if (dimension == 2) {
        check_axis(y, d2_y, "y");
    }
}

void DomainSpec::validate() const {
    validate_geometry();
    if (!(p > 2.0)) {
        throw GridError("p must exceed 2");
    }
    if (!(2.0 < q + 1.0 && q + 1.0 < p)) {
        std::ostringstream os;
        os << "exponents violate 2 < q+1 < p (q+1 = " << q + 1.0 << ", p = " << p << ")";
        throw GridError(os.str());
    }
}

GridPtr Grid::build(const DomainSpec& spec, int n, Alignment alignment) {
    spec.validate_geometry();
    if (n < 5) {
        throw GridError("need at least 5 nodes per axis");
    }
    if (!(spec.p >= 2.0)) {
        throw GridError("p must be at least 2");
    }
    AxisLayout ax = layout_axis(spec.x, spec.d2_x, n, alignment, "x");
    if (spec.dimension == 1) {
        IndexBox box{ax.ia, ax.ib, 0, 0};
        const double hx = spec.x.length() / (static_cast<double>(ax.coords.size()) - 1.0);
        return assemble(std::move(ax.coords), {0.0}, hx, 1.0, 1, spec.p, spec.q, true, box, false);
    }
    AxisLayout ay = layout_axis(spec.y, spec.d2_y, n, alignment, "y");
    IndexBox box{ax.ia, ax.ib, ay.ia, ay.ib};
    const double hx = spec.x.length() / (static_cast<double>(ax.coords.size()) - 1.0);
    const double hy = spec.y.length() / (static_cast<double>(ay.coords.size()) - 1.0);
    return assemble(std::move(ax.coords), std::move(ay.coords), hx, hy, 2, spec.p, spec.q, true, box, false);
}

GridPtr Grid::homogeneous(Interval x, int n, double exponent, double q, bool as_d2) {
    if (n < 3) {
        throw GridError("need at least 3 nodes");
    }
    const int last = n - 1;
    IndexBox box{0, last, 0, 0};
    return assemble(uniform_coords(x, n), {0.0}, x.length() / (n - 1), 1.0, 1, exponent, q, as_d2, box, as_d2);
}

GridPtr Grid::homogeneous(Interval x, Interval y, int n, double exponent, double q, bool as_d2) {
    if (n < 3) {
        throw GridError("need at least 3 nodes per axis");
    }
    const int last = n - 1;
    IndexBox box{0, last, 0, last};
    return assemble(uniform_coords(x, n), uniform_coords(y, n), x.length() / (n - 1), y.length() / (n - 1), 2,
                    exponent, q, as_d2, box, as_d2);
}

GridPtr Grid::subgrid(const IndexBox& box, double exponent, bool as_d2) const {
    if (box.i0 < 0 || box.i1 >= nx_ || box.i1 - box.i0 < 2 ||
        (dimension_ == 2 && (box.j0 < 0 || box.j1 >= ny_ || box.j1 - box.j0 < 2))) {
        throw GridError("subgrid box out of range or fewer than 3 nodes per axis");
    }
    std::vector<double> xs(xs_.begin() + box.i0, xs_.begin() + box.i1 + 1);
    std::vector<double> ys = dimension_ == 2 ? std::vector<double>(ys_.begin() + box.j0, ys_.begin() + box.j1 + 1)
                                             : std::vector<double>{0.0};
    IndexBox whole{0, box.i1 - box.i0, 0, dimension_ == 2 ? box.j1 - box.j0 : 0};
    return assemble(std::move(xs), std::move(ys), hx_, hy_, dimension_, exponent, q_, as_d2, whole, as_d2);
}

GridPtr Grid::with_exponents(double p, double q) const {
    const bool whole = has_d2_ && std::all_of(elements_.begin(), elements_.end(), [](const Element& e) { return e.in_d2; });
    return assemble(xs_, ys_, hx_, hy_, dimension_, p, q, has_d2_, d2_box_, whole);
}

GridPtr Grid::assemble(std::vector<double> xs, std::vector<double> ys, double hx, double hy, int dimension,
                       double p, double q, bool has_d2, IndexBox d2_box, bool homogeneous_d2) {
    std::shared_ptr<Grid> g(new Grid());
    g->dimension_ = dimension;
    g->nx_ = static_cast<int>(xs.size());
    g->ny_ = static_cast<int>(ys.size());
    g->hx_ = hx;
    g->hy_ = dimension == 2 ? hy : 1.0;
    g->p_ = p;
    g->q_ = q;
    g->has_d2_ = has_d2;
    g->d2_box_ = d2_box;
    g->xs_ = std::move(xs);
    g->ys_ = std::move(ys);

    const std::size_t count = g->node_count();
    const double cell = dimension == 2 ? g->hx_ * g->hy_ : g->hx_;
    g->boundary_.assign(count, 0);
    g->node_measure_.assign(count, 0.0);
    g->dof_of_node_.assign(count, -1);
    for (int j = 0; j < g->ny_; ++j) {
        for (int i = 0; i < g->nx_; ++i) {
            const int k = g->node(i, j);
            const bool on_edge = i == 0 || i == g->nx_ - 1 || (dimension == 2 && (j == 0 || j == g->ny_ - 1));
            g->boundary_[static_cast<std::size_t>(k)] = on_edge ? 1 : 0;
            if (!on_edge) {
                g->node_measure_[static_cast<std::size_t>(k)] = cell;
                g->dof_of_node_[static_cast<std::size_t>(k)] = static_cast<int>(g->dof_nodes_.size());
                g->dof_nodes_.push_back(k);
            }
        }
    }

    // interface: nodes on the outline of the D2 box that are not on the outer boundary
    if (has_d2 && !homogeneous_d2) {
        for (int j = d2_box.j0; j <= d2_box.j1; ++j) {
            for (int i = d2_box.i0; i <= d2_box.i1; ++i) {
                const bool outline = i == d2_box.i0 || i == d2_box.i1 ||
                                     (dimension == 2 && (j == d2_box.j0 || j == d2_box.j1));
                const int k = g->node(i, j);
                if (outline && !g->is_boundary(k)) {
                    g->interface_.push_back(k);
                }
            }
        }
    }

    auto cell_in_d2 = [&](int i, int j) {
        if (!has_d2) {
            return false;
        }
        if (homogeneous_d2) {
            return true;
        }
        const bool in_x = d2_box.i0 <= i && i < d2_box.i1;
        const bool in_y = dimension == 1 || (d2_box.j0 <= j && j < d2_box.j1);
        return in_x && in_y;
    };

    const double ihx = 1.0 / g->hx_;
    if (dimension == 1) {
        g->elements_.reserve(static_cast<std::size_t>(g->nx_ - 1));
        for (int i = 0; i + 1 < g->nx_; ++i) {
            Element e;
            e.size = 2;
            e.nodes = {i, i + 1, 0};
            e.dx = {-ihx, ihx, 0.0};
            e.measure = g->hx_;
            e.in_d2 = cell_in_d2(i, 0);
            e.exponent = e.in_d2 ? p : 2.0;
            g->elements_.push_back(e);
        }
    } else {
        const double ihy = 1.0 / g->hy_;
        const double area = 0.5 * g->hx_ * g->hy_;
        g->elements_.reserve(static_cast<std::size_t>(2 * (g->nx_ - 1) * (g->ny_ - 1)));
        for (int j = 0; j + 1 < g->ny_; ++j) {
            for (int i = 0; i + 1 < g->nx_; ++i) {
                const bool d2 = cell_in_d2(i, j);
                const int n00 = g->node(i, j);
                const int n10 = g->node(i + 1, j);
                const int n11 = g->node(i + 1, j + 1);
                const int n01 = g->node(i, j + 1);
                Element lower;
                lower.size = 3;
                lower.nodes = {n00, n10, n11};
                lower.dx = {-ihx, ihx, 0.0};
                lower.dy = {0.0, -ihy, ihy};
                lower.measure = area;
                lower.in_d2 = d2;
                lower.exponent = d2 ? p : 2.0;
                Element upper;
                upper.size = 3;
                upper.nodes = {n00, n11, n01};
                upper.dx = {0.0, ihx, -ihx};
                upper.dy = {-ihy, 0.0, ihy};
                upper.measure = area;
                upper.in_d2 = d2;
                upper.exponent = d2 ? p : 2.0;
                g->elements_.push_back(lower);
                g->elements_.push_back(upper);
            }
        }
    }
    return g;
}

bool Grid::in_d2_closed(int node) const {
    if (!has_d2_) {
        return false;
    }
    const int i = index_x(node);
    const int j = index_y(node);
    const bool in_x = d2_box_.i0 <= i && i <= d2_box_.i1;
    const bool in_y = dimension_ == 1 || (d2_box_.j0 <= j && j <= d2_box_.j1);
    return in_x && in_y;
}

Field::Field(GridPtr grid) : grid_(std::move(grid)), values_(grid_->node_count(), 0.0) {}

Field::Field(GridPtr grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_->node_count()) {
        throw GridError("field size does not match grid node count");
    }
}

double Field::sup_norm() const {
    double s = 0.0;
    for (double v : values_) {
        s = std::max(s, std::abs(v));
    }
    return s;
}

double Field::min_interior() const {
    double m = std::numeric_limits<double>::infinity();
    for (int d = 0; d < grid_->dof_count(); ++d) {
        m = std::min(m, values_[static_cast<std::size_t>(grid_->dof_node(d))]);
    }
    return m;
}

bool Field::has_zero_trace() const {
    for (std::size_t k = 0; k < values_.size(); ++k) {
        if (grid_->is_boundary(static_cast<int>(k)) && values_[k] != 0.0) {
            return false;
        }
    }
    return true;
}

Field& Field::operator+=(const Field& other) {
    require_same_grid(*this, other);
    for (std::size_t k = 0; k < values_.size(); ++k) {
        values_[k] += other.values_[k];
    }
    return *this;
}

Field& Field::operator-=(const Field& other) {
    require_same_grid(*this, other);
    for (std::size_t k = 0; k < values_.size(); ++k) {
        values_[k] -= other.values_[k];
    }
    return *this;
}

Field& Field::operator*=(double c) {
    for (double& v : values_) {
        v *= c;
    }
    return *this;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(double c, Field a) { return a *= c; }

bool same_grid(const Grid& a, const Grid& b) {
    if (&a == &b) {
        return true;
    }
    if (a.dimension() != b.dimension() || a.nx() != b.nx() || a.ny() != b.ny() || a.p() != b.p() ||
        a.q() != b.q() || a.elements().size() != b.elements().size()) {
        return false;
    }
    if (!std::equal(a.xs().begin(), a.xs().end(), b.xs().begin()) ||
        !std::equal(a.ys().begin(), a.ys().end(), b.ys().begin())) {
        return false;
    }
    for (std::size_t e = 0; e < a.elements().size(); ++e) {
        if (a.elements()[e].exponent != b.elements()[e].exponent) {
            return false;
        }
    }
    return true;
}

void require_same_grid(const Field& a, const Field& b) {
    if (!same_grid(a.grid(), b.grid())) {
        throw GridError("fields live on mismatched grids");
    }
}

Field zero_field(const GridPtr& grid) { return Field(grid); }

Field constant_field(const GridPtr& grid, double c) {
    Field f(grid);
    for (int d = 0; d < grid->dof_count(); ++d) {
        f[static_cast<std::size_t>(grid->dof_node(d))] = c;
    }
    return f;
}

double sup_distance(const Field& a, const Field& b) {
    require_same_grid(a, b);
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        s = std::max(s, std::abs(a[k] - b[k]));
    }
    return s;
}

Field restrict_to(const Field& fine, const GridPtr& sub, const IndexBox& box) {
    Field out(sub);
    const Grid& g = fine.grid();
    for (int j = 0; j < sub->ny(); ++j) {
        for (int i = 0; i < sub->nx(); ++i) {
            const int parent = g.node(box.i0 + i, g.dimension() == 2 ? box.j0 + j : 0);
            out[static_cast<std::size_t>(sub->node(i, j))] = fine[static_cast<std::size_t>(parent)];
        }
    }
    return out;
}

Field extend_by_zero(const Field& sub, const GridPtr& fine, const IndexBox& box) {
    Field out(fine);
    const Grid& s = sub.grid();
    for (int j = 0; j < s.ny(); ++j) {
        for (int i = 0; i < s.nx(); ++i) {
            const int parent = fine->node(box.i0 + i, fine->dimension() == 2 ? box.j0 + j : 0);
            out[static_cast<std::size_t>(parent)] = sub[static_cast<std::size_t>(s.node(i, j))];
        }
    }
    return out;
}

IndexBox interior_d1_box(const Grid& grid) {
    const IndexBox d2 = grid.d2_box();
    const int lastx = grid.nx() - 1;
    const int lasty = grid.ny() - 1;

    std::vector<IndexBox> candidates;
    if (grid.dimension() == 1) {
        candidates.push_back({0, d2.i0, 0, 0});
        candidates.push_back({d2.i1, lastx, 0, 0});
    } else {
        candidates.push_back({0, d2.i0, 0, lasty});
        candidates.push_back({d2.i1, lastx, 0, lasty});
        candidates.push_back({0, lastx, 0, d2.j0});
        candidates.push_back({0, lastx, d2.j1, lasty});
    }
    auto area = [&](const IndexBox& b) {
        const long w = b.i1 - b.i0;
        const long h = grid.dimension() == 2 ? b.j1 - b.j0 : 1;
        return w * h;
    };
    const IndexBox best = *std::max_element(candidates.begin(), candidates.end(),
                                            [&](const IndexBox& a, const IndexBox& b) { return area(a) < area(b); });
    auto shrink = [](int lo, int hi) {
        const int margin = std::max(1, (hi - lo) / 8);
        return std::pair{lo + margin, hi - margin};
    };
    IndexBox out{};
    std::tie(out.i0, out.i1) = shrink(best.i0, best.i1);
    if (grid.dimension() == 2) {
        std::tie(out.j0, out.j1) = shrink(best.j0, best.j1);
    }
    if (out.i1 - out.i0 < 2 || (grid.dimension() == 2 && out.j1 - out.j0 < 2)) {
        throw GridError("D1 too thin to host an interior box of at least 3 nodes per axis");
    }
    return out;
}

} // namespace varexp
