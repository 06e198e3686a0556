#pragma once

#include "extsolve/types.hpp"

#include <array>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

namespace extsolve {

enum class BoundaryKind { circle, ellipse, star, sphere, ellipsoid, triangulated };

using Triangle = std::array<Point, 3>;

/// Shape description accepted by Boundary::build.
///
/// radii: circle/sphere {r}; ellipse {a, b}; ellipsoid {a, b, c};
/// star {r0, amplitude} with r(t) = r0 (1 + amplitude cos(lobes t)).
/// Triangulated shapes ignore radii and n_nodes and use one node per triangle.
struct ShapeSpec {
    BoundaryKind kind = BoundaryKind::circle;
    Point center = Point::Zero();
    std::vector<double> radii;
    int lobes = 5;
    int n_nodes = 64;
    std::vector<Triangle> triangles;

    static ShapeSpec circle(Point center, double r, int n);
    static ShapeSpec ellipse(Point center, double a, double b, int n);
    static ShapeSpec star(Point center, double r0, double amplitude, int lobes, int n);
    static ShapeSpec sphere(Point center, double r, int n);
    static ShapeSpec ellipsoid(Point center, double a, double b, double c, int n);
    static ShapeSpec mesh(std::vector<Triangle> triangles);
};

struct QuadratureSet {
    std::vector<Point> nodes;
    std::vector<double> weights;
    std::vector<Point> normals;
    std::vector<double> curvatures;  // planar curves only
};

enum class Containment { inside, outside, on_boundary };

class Boundary;
using BoundaryPtr = std::shared_ptr<const Boundary>;

/// Closed curve or surface with an attached quadrature rule.
///
/// Planar curves use equispaced parameter nodes with trapezoidal weights,
/// spheres and ellipsoids an area-weighted Fibonacci lattice, meshes the
/// centroid rule. Immutable once built.
class Boundary {
public:
    static Boundary build(const ShapeSpec& spec);
    static BoundaryPtr make(const ShapeSpec& spec);

    BoundaryKind kind() const { return spec_.kind; }
    int ambient_dim() const { return dim_; }
    std::size_t size() const { return quad_.nodes.size(); }
    const ShapeSpec& shape() const { return spec_; }
    const QuadratureSet& quadrature() const { return quad_; }

    const Point& node(std::size_t i) const { return quad_.nodes[i]; }
    const Point& normal(std::size_t i) const { return quad_.normals[i]; }
    double weight(std::size_t i) const { return quad_.weights[i]; }

    /// Local node spacing: arc-length weight on curves, sqrt(area weight) on surfaces.
    double spacing(std::size_t i) const;
    double max_spacing() const;

    double measure() const;
    double diameter() const { return diameter_; }
    const Point& center() const { return spec_.center; }

    /// Default tolerance for on-boundary classification: 1e-9 * diameter.
    double default_tolerance() const { return 1e-9 * diameter_; }

    Containment contains(const Point& x) const { return contains(x, default_tolerance()); }
    Containment contains(const Point& x, double tol) const;

    /// Approximate unsigned distance to the boundary.
    double distance(const Point& x) const;

    /// Point on the boundary at parameter t in [0,1) (planar) or at the
    /// direction given by (u, v) in [0,1)^2 (surfaces).
    Point point_at(double u, double v = 0.0) const;

    /// Same shape scaled about its center, keeping the node count.
    Boundary scaled(double factor) const;
    Boundary with_nodes(int n_nodes) const;

private:
    explicit Boundary(ShapeSpec spec);

    double signed_distance(const Point& x) const;

    ShapeSpec spec_;
    int dim_ = 2;
    QuadratureSet quad_;
    double diameter_ = 0.0;
};

/// Prefix of a fixed nested low-discrepancy point sequence on the boundary.
///
/// Curves: van der Corput ordering of the parameter. Surfaces: Halton points
/// (bases 2 and 3) through the equal-area map. Meshes: triangle centroids in
/// bit-reversed order, limited to the triangle count.
std::vector<Point> source_sequence(const Boundary& b, std::size_t count);

/// Radical inverse of i in base 2.
double van_der_corput(std::size_t i);

/// Nested configuration of closed boundaries.
///
/// inner = the data boundary, middle = the boundary of the solution domain,
/// outer = the embracing (source) boundary, probe = a boundary inside inner.
class DomainLayout {
public:
    DomainLayout(BoundaryPtr inner, BoundaryPtr middle, BoundaryPtr outer, BoundaryPtr probe = nullptr);

    const BoundaryPtr& inner() const { return inner_; }
    const BoundaryPtr& middle() const { return middle_; }
    const BoundaryPtr& outer() const { return outer_; }
    const BoundaryPtr& probe() const { return probe_; }

    /// Minimum node distance between consecutive shells, innermost first.
    const std::vector<double>& separations() const { return separations_; }

    DomainLayout with_inner(BoundaryPtr inner) const;
    DomainLayout with_probe(BoundaryPtr probe) const;

private:
    BoundaryPtr inner_, middle_, outer_, probe_;
    std::vector<double> separations_;
};

/// True when every node of `in` lies strictly inside `out`.
bool nested_inside(const Boundary& in, const Boundary& out);

/// Reads an ASCII triangle soup: one triangle per line, nine floats.
std::vector<Triangle> read_triangle_soup(std::istream& in);

}  // namespace extsolve
