#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace varexp {

class GridError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Interval {
    double lo = 0.0;
    double hi = 1.0;

    double length() const { return hi - lo; }
    bool contains(double x) const { return x >= lo && x <= hi; }
};

/// Split domain: an outer box Omega with a box-shaped region D2 strictly
/// inside it; D1 is the remainder. The operator is the Laplacian on D1 and
/// the p-Laplacian on D2, with source exponent q.
struct DomainSpec {
    int dimension = 1;
    Interval x{0.0, 1.0};
    Interval y{0.0, 1.0};
    Interval d2_x{0.4, 0.6};
    Interval d2_y{0.4, 0.6};
    double p = 3.0;
    double q = 1.5;

    /// Full check, including the concave-convex window 2 < q + 1 < p.
    void validate() const;
    /// Geometry only: D2 strictly inside the outer box, dimension 1 or 2.
    void validate_geometry() const;
};

enum class Alignment {
    Snap,   // grow the cell count until the D2 faces fall on nodes
    Strict  // throw if the requested node count does not align
};

/// Inclusive node-index ranges of a box of the structured grid.
struct IndexBox {
    int i0 = 0;
    int i1 = 0;
    int j0 = 0;
    int j1 = 0;
};

/// Piecewise-linear element: an edge in 1D, a triangle in 2D. The gradient
/// over the element is constant, g = sum_k (dx[k], dy[k]) * u[nodes[k]].
struct Element {
    std::array<int, 3> nodes{};
    std::array<double, 3> dx{};
    std::array<double, 3> dy{};
    int size = 2;
    double measure = 0.0;
    double exponent = 2.0;
    bool in_d2 = false;
};

class Grid;
using GridPtr = std::shared_ptr<const Grid>;

/// Structured tensor-product grid. Immutable after construction.
class Grid {
public:
    /// Builds the grid for a split domain with `n` nodes per axis.
    static GridPtr build(const DomainSpec& spec, int n, Alignment alignment = Alignment::Snap);

    /// Grid on a bare box with a single exponent everywhere. `as_d2` marks
    /// every element as belonging to D2 (affects norm bookkeeping only).
    static GridPtr homogeneous(Interval x, int n, double exponent, double q, bool as_d2);
    static GridPtr homogeneous(Interval x, Interval y, int n, double exponent, double q, bool as_d2);

    int dimension() const { return dimension_; }
    int nx() const { return nx_; }
    int ny() const { return ny_; }
    std::size_t node_count() const { return static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_); }
    double hx() const { return hx_; }
    double hy() const { return hy_; }
    double p() const { return p_; }
    double q() const { return q_; }

    int node(int i, int j = 0) const { return j * nx_ + i; }
    int index_x(int node) const { return node % nx_; }
    int index_y(int node) const { return node / nx_; }
    double x(int i) const { return xs_[static_cast<std::size_t>(i)]; }
    double y(int j) const { return ys_[static_cast<std::size_t>(j)]; }
    std::span<const double> xs() const { return xs_; }
    std::span<const double> ys() const { return ys_; }

    bool is_boundary(int node) const { return boundary_[static_cast<std::size_t>(node)] != 0; }
    double node_measure(int node) const { return node_measure_[static_cast<std::size_t>(node)]; }

    /// Nodes lying on the D2 boundary and inside Omega.
    const std::vector<int>& interface_nodes() const { return interface_; }
    const std::vector<Element>& elements() const { return elements_; }

    /// Node-index box of closed D2 (empty range when the grid has no D2).
    const IndexBox& d2_box() const { return d2_box_; }
    bool has_d2() const { return has_d2_; }
    bool in_d2_closed(int node) const;

    /// Interior unknowns: every non-boundary node, numbered in node order.
    int dof_count() const { return static_cast<int>(dof_nodes_.size()); }
    int dof(int node) const { return dof_of_node_[static_cast<std::size_t>(node)]; }
    int dof_node(int dof) const { return dof_nodes_[static_cast<std::size_t>(dof)]; }

    /// Sub-grid on a node box of this grid, with a single exponent; its own
    /// Dirichlet boundary is the box outline.
    GridPtr subgrid(const IndexBox& box, double exponent, bool as_d2) const;
    /// Same nodes and regions with different exponents (p on D2, q for the source).
    GridPtr with_exponents(double p, double q) const;

private:
    Grid() = default;
    static GridPtr assemble(std::vector<double> xs, std::vector<double> ys, double hx, double hy, int dimension,
                            double p, double q, bool has_d2, IndexBox d2_box, bool homogeneous_d2);

    int dimension_ = 1;
    int nx_ = 0;
    int ny_ = 1;
    double hx_ = 0.0;
    double hy_ = 1.0;
    double p_ = 2.0;
    double q_ = 1.5;
    bool has_d2_ = false;
    IndexBox d2_box_{};
    std::vector<double> xs_;
    std::vector<double> ys_;
    std::vector<char> boundary_;
    std::vector<double> node_measure_;
    std::vector<int> interface_;
    std::vector<Element> elements_;
    std::vector<int> dof_of_node_;
    std::vector<int> dof_nodes_;
};

/// Nodal values on a grid.
class Field {
public:
    explicit Field(GridPtr grid);
    Field(GridPtr grid, std::vector<double> values);

    const Grid& grid() const { return *grid_; }
    const GridPtr& grid_ptr() const { return grid_; }
    std::size_t size() const { return values_.size(); }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    double sup_norm() const;
    double min_interior() const;
    bool has_zero_trace() const;

    Field& operator+=(const Field& other);
    Field& operator-=(const Field& other);
    Field& operator*=(double c);

private:
    GridPtr grid_;
    std::vector<double> values_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double c, Field a);

/// Throws GridError unless both fields live on the same grid.
void require_same_grid(const Field& a, const Field& b);
bool same_grid(const Grid& a, const Grid& b);

Field zero_field(const GridPtr& grid);
/// `c` at interior nodes, 0 on the boundary.
Field constant_field(const GridPtr& grid, double c);

/// sup |a - b| over all nodes.
double sup_distance(const Field& a, const Field& b);

/// Copy of `fine` restricted to the nodes of `sub` (which must be a
/// subgrid of `fine`'s grid) and the zero extension back.
Field restrict_to(const Field& fine, const GridPtr& sub, const IndexBox& box);
Field extend_by_zero(const Field& sub, const GridPtr& fine, const IndexBox& box);

/// A node box strictly inside the largest D1 component, clear of D2 and of
/// the outer boundary.
IndexBox interior_d1_box(const Grid& grid);

} // namespace varexp
