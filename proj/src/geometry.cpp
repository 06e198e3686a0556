#include "extsolve/geometry.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <tuple>

namespace extsolve {

namespace {

constexpr double pi = std::numbers::pi;

struct CurveSample {
    Point position;
    Eigen::Vector2d d1;  // first derivative in t
    Eigen::Vector2d d2;  // second derivative in t
};

// Planar curves are parametrized counter-clockwise over t in [0, 2pi).
CurveSample sample_curve(const ShapeSpec& s, double t) {
    const double c = std::cos(t);
    const double sn = std::sin(t);
    CurveSample out;
    switch (s.kind) {
    case BoundaryKind::circle: {
        const double r = s.radii[0];
        out.position = s.center + Point(r * c, r * sn, 0.0);
        out.d1 = {-r * sn, r * c};
        out.d2 = {-r * c, -r * sn};
        break;
    }
    case BoundaryKind::ellipse: {
        const double a = s.radii[0];
        const double b = s.radii[1];
        out.position = s.center + Point(a * c, b * sn, 0.0);
        out.d1 = {-a * sn, b * c};
        out.d2 = {-a * c, -b * sn};
        break;
    }
    case BoundaryKind::star: {
        const double r0 = s.radii[0];
        const double amp = s.radii[1];
        const double L = s.lobes;
        const double rho = r0 * (1.0 + amp * std::cos(L * t));
        const double drho = -r0 * amp * L * std::sin(L * t);
        const double ddrho = -r0 * amp * L * L * std::cos(L * t);
        out.position = s.center + Point(rho * c, rho * sn, 0.0);
        out.d1 = {drho * c - rho * sn, drho * sn + rho * c};
        out.d2 = {ddrho * c - 2.0 * drho * sn - rho * c, ddrho * sn + 2.0 * drho * c - rho * sn};
        break;
    }
    default:
        throw GeometryError("sample_curve: not a planar curve");
    }
    return out;
}

Point unit_direction(double u, double v) {
    const double z = 1.0 - 2.0 * u;
    const double rxy = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = 2.0 * pi * v;
    return {rxy * std::cos(phi), rxy * std::sin(phi), z};
}

Point surface_point(const ShapeSpec& s, const Point& d) {
    if (s.kind == BoundaryKind::sphere) return s.center + s.radii[0] * d;
    return s.center + Point(s.radii[0] * d.x(), s.radii[1] * d.y(), s.radii[2] * d.z());
}

bool is_curve(BoundaryKind k) {
    return k == BoundaryKind::circle || k == BoundaryKind::ellipse || k == BoundaryKind::star;
}

double radical_inverse(std::size_t i, std::size_t base) {
    double inv = 1.0 / static_cast<double>(base);
    double f = inv;
    double r = 0.0;
    while (i > 0) {
        r += f * static_cast<double>(i % base);
        i /= base;
        f *= inv;
    }
    return r;
}

// Closest point on triangle (Ericson, Real-Time Collision Detection 5.1.5).
Point closest_on_triangle(const Point& p, const Triangle& tri) {
    const Point& a = tri[0];
    const Point& b = tri[1];
    const Point& c = tri[2];
    const Point ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;
    const Point bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return b;
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;
    const Point cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return c;
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
        return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

// Signed solid angle of a triangle seen from p (Van Oosterom & Strackee).
double solid_angle(const Point& p, const Triangle& tri) {
    const Point a = tri[0] - p, b = tri[1] - p, c = tri[2] - p;
    const double la = a.norm(), lb = b.norm(), lc = c.norm();
    const double num = a.dot(b.cross(c));
    const double den = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
    return 2.0 * std::atan2(num, den);
}

void validate_mesh(const std::vector<Triangle>& tris) {
    if (tris.size() < 4) throw GeometryError("triangulated boundary needs at least 4 triangles");
    using Key = std::tuple<double, double, double>;
    std::map<Key, std::size_t> vertex_ids;
    auto id = [&](const Point& p) {
        auto [it, inserted] = vertex_ids.emplace(Key{p.x(), p.y(), p.z()}, vertex_ids.size());
        return it->second;
    };
    std::map<std::pair<std::size_t, std::size_t>, int> edges;
    for (std::size_t t = 0; t < tris.size(); ++t) {
        const auto& tri = tris[t];
        if ((tri[1] - tri[0]).cross(tri[2] - tri[0]).norm() == 0.0)
            throw GeometryError("triangle " + std::to_string(t) + " is degenerate");
        std::array<std::size_t, 3> v{id(tri[0]), id(tri[1]), id(tri[2])};
        for (int e = 0; e < 3; ++e) {
            auto i = v[e], j = v[(e + 1) % 3];
            ++edges[{std::min(i, j), std::max(i, j)}];
        }
    }
    for (const auto& [edge, count] : edges) {
        if (count != 2) {
            std::ostringstream msg;
            msg << "mesh is not watertight: edge (" << edge.first << ", " << edge.second << ") is shared by "
                << count << " triangle(s)";
            throw GeometryError(msg.str());
        }
    }
}

void validate_spec(const ShapeSpec& s) {
    auto need_radii = [&](std::size_t n) {
        if (s.radii.size() != n)
            throw GeometryError("shape expects " + std::to_string(n) + " radii, got " + std::to_string(s.radii.size()));
    };
    switch (s.kind) {
    case BoundaryKind::circle:
    case BoundaryKind::sphere: need_radii(1); break;
    case BoundaryKind::ellipse: need_radii(2); break;
    case BoundaryKind::ellipsoid: need_radii(3); break;
    case BoundaryKind::star:
        need_radii(2);
        if (std::abs(s.radii[1]) >= 1.0) throw GeometryError("star amplitude must satisfy |amplitude| < 1");
        if (s.lobes < 1) throw GeometryError("star needs at least one lobe");
        break;
    case BoundaryKind::triangulated: validate_mesh(s.triangles); return;
    }
    const std::size_t positive = s.kind == BoundaryKind::star ? 1 : s.radii.size();
    for (std::size_t i = 0; i < positive; ++i) {
        if (!(s.radii[i] > 0.0) || !std::isfinite(s.radii[i])) throw GeometryError("degenerate radius");
    }
    if (s.n_nodes < 4) throw GeometryError("n_nodes must be at least 4");
    if (!s.center.allFinite()) throw GeometryError("center must be finite");
    if (is_curve(s.kind) && s.center.z() != 0.0) throw GeometryError("planar curves need center z = 0");
}

}  // namespace

double van_der_corput(std::size_t i) { return radical_inverse(i, 2); }

ShapeSpec ShapeSpec::circle(Point center, double r, int n) {
    return {BoundaryKind::circle, center, {r}, 5, n, {}};
}
ShapeSpec ShapeSpec::ellipse(Point center, double a, double b, int n) {
    return {BoundaryKind::ellipse, center, {a, b}, 5, n, {}};
}
ShapeSpec ShapeSpec::star(Point center, double r0, double amplitude, int lobes, int n) {
    return {BoundaryKind::star, center, {r0, amplitude}, lobes, n, {}};
}
ShapeSpec ShapeSpec::sphere(Point center, double r, int n) {
    return {BoundaryKind::sphere, center, {r}, 5, n, {}};
}
ShapeSpec ShapeSpec::ellipsoid(Point center, double a, double b, double c, int n) {
    return {BoundaryKind::ellipsoid, center, {a, b, c}, 5, n, {}};
}
ShapeSpec ShapeSpec::mesh(std::vector<Triangle> triangles) {
    ShapeSpec s;
    s.kind = BoundaryKind::triangulated;
    s.n_nodes = static_cast<int>(triangles.size());
    s.triangles = std::move(triangles);
    return s;
}

Boundary Boundary::build(const ShapeSpec& spec) { return Boundary(spec); }

BoundaryPtr Boundary::make(const ShapeSpec& spec) { return std::make_shared<const Boundary>(Boundary(spec)); }

Boundary::Boundary(ShapeSpec spec) : spec_(std::move(spec)) {
    validate_spec(spec_);
    dim_ = is_curve(spec_.kind) ? 2 : 3;

    if (is_curve(spec_.kind)) {
        const auto n = static_cast<std::size_t>(spec_.n_nodes);
        const double dt = 2.0 * pi / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto s = sample_curve(spec_, dt * static_cast<double>(i));
            const double speed = s.d1.norm();
            quad_.nodes.push_back(s.position);
            quad_.weights.push_back(speed * dt);
            quad_.normals.emplace_back(s.d1.y() / speed, -s.d1.x() / speed, 0.0);
            quad_.curvatures.push_back((s.d1.x() * s.d2.y() - s.d1.y() * s.d2.x()) / (speed * speed * speed));
        }
    } else if (spec_.kind == BoundaryKind::sphere || spec_.kind == BoundaryKind::ellipsoid) {
        const auto n = static_cast<std::size_t>(spec_.n_nodes);
        const double golden_angle = pi * (3.0 - std::sqrt(5.0));
        const double dOmega = 4.0 * pi / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n);
            const double rxy = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double phi = golden_angle * static_cast<double>(i);
            const Point d(rxy * std::cos(phi), rxy * std::sin(phi), z);
            quad_.nodes.push_back(surface_point(spec_, d));
            if (spec_.kind == BoundaryKind::sphere) {
                const double r = spec_.radii[0];
                quad_.weights.push_back(r * r * dOmega);
                quad_.normals.push_back(d);
            } else {
                const double a = spec_.radii[0], b = spec_.radii[1], c = spec_.radii[2];
                const Point cof(b * c * d.x(), a * c * d.y(), a * b * d.z());
                quad_.weights.push_back(cof.norm() * dOmega);
                quad_.normals.push_back(cof.normalized());
            }
        }
    } else {
        double signed_volume = 0.0;
        for (const auto& t : spec_.triangles) {
            const Point cr = (t[1] - t[0]).cross(t[2] - t[0]);
            quad_.nodes.push_back((t[0] + t[1] + t[2]) / 3.0);
            quad_.weights.push_back(0.5 * cr.norm());
            quad_.normals.push_back(cr.normalized());
            signed_volume += t[0].dot(t[1].cross(t[2])) / 6.0;
        }
        if (signed_volume < 0.0) {
            for (auto& nrm : quad_.normals) nrm = -nrm;
        }
        Point lo = quad_.nodes.front(), hi = lo;
        Point centroid = Point::Zero();
        double area = 0.0;
        for (std::size_t i = 0; i < quad_.nodes.size(); ++i) {
            for (const auto& v : spec_.triangles[i]) {
                lo = lo.cwiseMin(v);
                hi = hi.cwiseMax(v);
            }
            centroid += quad_.weights[i] * quad_.nodes[i];
            area += quad_.weights[i];
        }
        spec_.center = centroid / area;
        diameter_ = (hi - lo).norm();
    }

    if (spec_.kind != BoundaryKind::triangulated) {
        double rmax = 0.0;
        for (const auto& p : quad_.nodes) rmax = std::max(rmax, (p - spec_.center).norm());
        diameter_ = 2.0 * rmax;
    }
}

double Boundary::spacing(std::size_t i) const {
    return dim_ == 2 ? quad_.weights[i] : std::sqrt(quad_.weights[i]);
}

double Boundary::max_spacing() const {
    double h = 0.0;
    for (std::size_t i = 0; i < size(); ++i) h = std::max(h, spacing(i));
    return h;
}

double Boundary::measure() const {
    double s = 0.0;
    for (double w : quad_.weights) s += w;
    return s;
}

double Boundary::signed_distance(const Point& x) const {
    const Point d = x - spec_.center;
    switch (spec_.kind) {
    case BoundaryKind::circle:
    case BoundaryKind::sphere:
        return d.norm() - spec_.radii[0];
    case BoundaryKind::ellipse:
    case BoundaryKind::ellipsoid: {
        const int n = spec_.kind == BoundaryKind::ellipse ? 2 : 3;
        double F = -1.0;
        Point grad = Point::Zero();
        for (int i = 0; i < n; ++i) {
            const double a = spec_.radii[static_cast<std::size_t>(i)];
            F += d[i] * d[i] / (a * a);
            grad[i] = 2.0 * d[i] / (a * a);
        }
        const double g = grad.norm();
        if (g == 0.0) return -*std::min_element(spec_.radii.begin(), spec_.radii.end());
        return F / g;
    }
    case BoundaryKind::star: {
        const double rho = d.head<2>().norm();
        const double r0 = spec_.radii[0];
        const double amp = spec_.radii[1];
        if (rho == 0.0) return -r0 * (1.0 - std::abs(amp));
        const double t = std::atan2(d.y(), d.x());
        const double L = spec_.lobes;
        const double r = r0 * (1.0 + amp * std::cos(L * t));
        const double dr = -r0 * amp * L * std::sin(L * t);
        return (rho - r) / std::sqrt(1.0 + (dr / rho) * (dr / rho));
    }
    case BoundaryKind::triangulated: {
        double dmin = std::numeric_limits<double>::infinity();
        double omega = 0.0;
        for (const auto& t : spec_.triangles) {
            dmin = std::min(dmin, (x - closest_on_triangle(x, t)).norm());
            omega += solid_angle(x, t);
        }
        // Winding number with the orientation fixed by the signed volume.
        double sign = 1.0;
        if (!spec_.triangles.empty()) {
            const auto& t0 = spec_.triangles.front();
            const Point cr = (t0[1] - t0[0]).cross(t0[2] - t0[0]).normalized();
            if (cr.dot(quad_.normals.front()) < 0.0) sign = -1.0;
        }
        const double winding = sign * omega / (4.0 * pi);
        return winding > 0.5 ? -dmin : dmin;
    }
    }
    return 0.0;
}

double Boundary::distance(const Point& x) const { return std::abs(signed_distance(x)); }

Containment Boundary::contains(const Point& x, double tol) const {
    if (dim_ == 2 && x.z() != 0.0) return Containment::outside;
    const double sd = signed_distance(x);
    if (std::abs(sd) <= tol) return Containment::on_boundary;
    return sd < 0.0 ? Containment::inside : Containment::outside;
}

Point Boundary::point_at(double u, double v) const {
    if (is_curve(spec_.kind)) return sample_curve(spec_, 2.0 * pi * u).position;
    if (spec_.kind == BoundaryKind::triangulated) throw GeometryError("point_at is not defined on meshes");
    return surface_point(spec_, unit_direction(u, v));
}

Boundary Boundary::scaled(double factor) const {
    if (!(factor > 0.0)) throw GeometryError("scale factor must be positive");
    ShapeSpec s = spec_;
    if (s.kind == BoundaryKind::triangulated) {
        for (auto& t : s.triangles) {
            for (auto& v : t) v = spec_.center + factor * (v - spec_.center);
        }
    } else if (s.kind == BoundaryKind::star) {
        s.radii[0] *= factor;
    } else {
        for (auto& r : s.radii) r *= factor;
    }
    return Boundary(std::move(s));
}

Boundary Boundary::with_nodes(int n_nodes) const {
    ShapeSpec s = spec_;
    if (s.kind != BoundaryKind::triangulated) s.n_nodes = n_nodes;
    return Boundary(std::move(s));
}

std::vector<Point> source_sequence(const Boundary& b, std::size_t count) {
    std::vector<Point> out;
    out.reserve(count);
    if (b.kind() == BoundaryKind::triangulated) {
        const std::size_t T = b.size();
        if (count > T) throw GeometryError("mesh has fewer triangles than requested sources");
        std::size_t bits = 0;
        while ((std::size_t{1} << bits) < T) ++bits;
        for (std::size_t j = 0; out.size() < count; ++j) {
            std::size_t r = 0;
            for (std::size_t k = 0; k < bits; ++k) {
                if (j & (std::size_t{1} << k)) r |= std::size_t{1} << (bits - 1 - k);
            }
            if (r < T) out.push_back(b.node(r));
        }
        return out;
    }
    for (std::size_t j = 0; j < count; ++j) {
        if (b.ambient_dim() == 2) {
            out.push_back(b.point_at(van_der_corput(j)));
        } else {
            out.push_back(b.point_at(radical_inverse(j, 2), radical_inverse(j, 3)));
        }
    }
    return out;
}

bool nested_inside(const Boundary& in, const Boundary& out) {
    if (in.ambient_dim() != out.ambient_dim()) return false;
    for (const auto& p : in.quadrature().nodes) {
        if (out.contains(p) != Containment::inside) return false;
    }
    return true;
}

namespace {

double min_node_distance(const Boundary& a, const Boundary& b) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& p : a.quadrature().nodes) {
        for (const auto& q : b.quadrature().nodes) d = std::min(d, (p - q).norm());
    }
    return d;
}

}  // namespace

DomainLayout::DomainLayout(BoundaryPtr inner, BoundaryPtr middle, BoundaryPtr outer, BoundaryPtr probe)
    : inner_(std::move(inner)), middle_(std::move(middle)), outer_(std::move(outer)), probe_(std::move(probe)) {
    if (!inner_) throw GeometryError("layout needs an inner boundary");
    std::vector<std::pair<const char*, const Boundary*>> shells;
    if (probe_) shells.emplace_back("probe", probe_.get());
    shells.emplace_back("inner", inner_.get());
    if (middle_) shells.emplace_back("middle", middle_.get());
    if (outer_) shells.emplace_back("outer", outer_.get());
    for (std::size_t i = 0; i + 1 < shells.size(); ++i) {
        if (!nested_inside(*shells[i].second, *shells[i + 1].second)) {
            throw GeometryError(std::string("nesting violated: ") + shells[i].first + " is not strictly inside " +
                                shells[i + 1].first);
        }
        separations_.push_back(min_node_distance(*shells[i].second, *shells[i + 1].second));
    }
}

DomainLayout DomainLayout::with_inner(BoundaryPtr inner) const {
    return DomainLayout(std::move(inner), middle_, outer_, nullptr);
}

DomainLayout DomainLayout::with_probe(BoundaryPtr probe) const {
    return DomainLayout(inner_, middle_, outer_, std::move(probe));
}

std::vector<Triangle> read_triangle_soup(std::istream& in) {
    std::vector<Triangle> tris;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        for (char& ch : line) {
            if (ch == ',') ch = ' ';
        }
        std::istringstream ls(line);
        std::array<double, 9> v{};
        for (double& x : v) {
            if (!(ls >> x)) throw GeometryError("triangle soup line " + std::to_string(lineno) + ": expected nine floats");
        }
        std::string rest;
        if (ls >> rest) throw GeometryError("triangle soup line " + std::to_string(lineno) + ": trailing data");
        tris.push_back({Point(v[0], v[1], v[2]), Point(v[3], v[4], v[5]), Point(v[6], v[7], v[8])});
    }
    return tris;
}

}  // namespace extsolve
