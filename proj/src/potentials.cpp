#include "extsolve/potentials.hpp"

#include "extsolve/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace extsolve {

namespace {

using Vec = Eigen::VectorXd;

void require_density_on(const Boundary& b, const LayerDensity& d, const char* what) {
    if (d.nodes() != b.size()) throw GeometryError(std::string(what) + ": density does not live on this boundary");
}

void require_components(const OperatorSpec& op, const LayerDensity& d) {
    if (d.components() != op.components()) throw OperatorError("density component count does not match the operator");
}

// Sum over quadrature nodes in fixed order.
// `mag`, when given, accumulates the norms of the individual terms: the
// scale against which cancellation in the sum is judged.
Vec single_layer_at(const OperatorSpec& op, const Boundary& b, const Vec& v, const Point& x, double* mag = nullptr) {
    const int k = op.components();
    Vec acc = Vec::Zero(k);
    for (std::size_t q = 0; q < b.size(); ++q) {
        const Vec term = b.weight(q) * (phi(op, x, b.node(q)) * v.segment(static_cast<Eigen::Index>(q) * k, k));
        acc += term;
        if (mag) *mag += term.norm();
    }
    return acc;
}

Vec double_layer_at(const OperatorSpec& op, const Boundary& b, const Vec& u, const Point& x, double* mag = nullptr) {
    const int k = op.components();
    Vec acc = Vec::Zero(k);
    for (std::size_t q = 0; q < b.size(); ++q) {
        const Vec term =
            b.weight(q) * (conormal_kernel_y(op, x, b.node(q), b.normal(q)) * u.segment(static_cast<Eigen::Index>(q) * k, k));
        acc -= term;
        if (mag) *mag += term.norm();
    }
    return acc;
}

Vec conormal_single_layer_at(const OperatorSpec& op, const Boundary& b, const Vec& v, const Point& x,
                             const Point& nx, double* mag = nullptr) {
    const int k = op.components();
    Vec acc = Vec::Zero(k);
    for (std::size_t q = 0; q < b.size(); ++q) {
        const Vec term =
            b.weight(q) * (conormal_kernel_x(op, x, nx, b.node(q)) * v.segment(static_cast<Eigen::Index>(q) * k, k));
        acc += term;
        if (mag) *mag += term.norm();
    }
    return acc;
}

Side side_of(const Boundary& b, const Point& x) {
    switch (b.contains(x)) {
    case Containment::inside: return Side::inside;
    case Containment::outside: return Side::outside;
    case Containment::on_boundary: break;
    }
    return Side::on_boundary;
}

bool in_near_field(const Boundary& b, const Point& x, double factor) {
    for (std::size_t q = 0; q < b.size(); ++q) {
        if ((x - b.node(q)).norm() < factor * b.spacing(q)) return true;
    }
    return false;
}

template <class Eval>
PotentialField evaluate_field(const OperatorSpec& op, const Boundary& b, std::span<const Point> targets,
                              const PotentialOptions& opts, Eval&& eval) {
    const int k = op.components();
    PotentialField field;
    field.points.assign(targets.begin(), targets.end());
    field.components = k;
    field.values = Vec::Zero(static_cast<Eigen::Index>(targets.size()) * k);
    field.sides.resize(targets.size());
    std::vector<char> near(targets.size(), 0);
    parallel_for(targets.size(), [&](std::size_t i) {
        const Point& x = targets[i];
        field.sides[i] = side_of(b, x);
        near[i] = in_near_field(b, x, opts.near_field_factor) ? 1 : 0;
        try {
            field.values.segment(static_cast<Eigen::Index>(i) * k, k) = eval(x);
        } catch (const SingularityError& e) {
            throw SingularityError("potential evaluated on a quadrature node", i, e.source_index);
        }
    });
    for (std::size_t i = 0; i < near.size(); ++i) {
        if (near[i]) field.near_field.push_back(i);
    }
    return field;
}

// One-sided limit at every node of b of a field evaluated at offset points
// x -/+ t nu(x), t = eps/2, eps, 3 eps/2: quadratic extrapolation to t = 0.
// The gap to the linear (two point) extrapolation serves as error estimate.
constexpr std::array<double, 3> trace_offsets{0.5, 1.0, 1.5};
constexpr std::array<double, 3> trace_weights{3.0, -3.0, 1.0};

template <class Eval>
TraceResult extrapolate_trace(const OperatorSpec& op, const Boundary& b, BoundaryPtr carrier, TraceSide side,
                              const PotentialOptions& opts, Eval&& eval) {
    const int k = op.components();
    const double s = side == TraceSide::interior ? -1.0 : 1.0;
    const auto n = static_cast<Eigen::Index>(b.size());
    Vec extrapolated = Vec::Zero(n * k);
    Vec gap = Vec::Zero(n * k);
    Vec size = Vec::Zero(n);
    parallel_for(b.size(), [&](std::size_t i) {
        const double eps = opts.offset_factor * b.spacing(i);
        const Point& x = b.node(i);
        const Point& nu = b.normal(i);
        std::array<Vec, 3> f;
        double mag = 0.0;
        for (std::size_t l = 0; l < 3; ++l)
            f[l] = eval(Point(x + s * trace_offsets[l] * eps * nu), nu, l == 0 ? &mag : nullptr);
        const Vec limit = trace_weights[0] * f[0] + trace_weights[1] * f[1] + trace_weights[2] * f[2];
        extrapolated.segment(static_cast<Eigen::Index>(i) * k, k) = limit;
        gap.segment(static_cast<Eigen::Index>(i) * k, k) = f[0] - 2.0 * f[1] + f[2];
        size(static_cast<Eigen::Index>(i)) = mag;
    });
    TraceResult out{LayerDensity(std::move(carrier), k, extrapolated), 0.0, false};
    // relative to the size of the quadrature terms, so that a trace which
    // cancels to zero does not look inaccurate
    const double scale = size.maxCoeff();
    const double g = gap.cwiseAbs().maxCoeff();
    out.max_disagreement = scale > 0.0 ? g / scale : g;
    out.flagged = out.max_disagreement > opts.trace_tolerance;
    return out;
}

bool same_nodes(const Boundary& a, const Boundary& b) {
    if (&a == &b) return true;
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.node(i) != b.node(i)) return false;
    }
    return true;
}

}  // namespace

LayerDensity::LayerDensity(BoundaryPtr boundary, int components, Eigen::VectorXd values)
    : boundary_(std::move(boundary)), k_(components), values_(std::move(values)) {
    if (!boundary_) throw GeometryError("density needs a boundary");
    if (k_ < 1 || k_ > 3) throw OperatorError("density component count must be 1..3");
    if (values_.size() != static_cast<Eigen::Index>(boundary_->size()) * k_)
        throw GeometryError("density length does not match node count times components");
    if (!values_.allFinite()) throw GeometryError("density has non-finite entries");
}

LayerDensity LayerDensity::zeros(BoundaryPtr boundary, int components) {
    const auto n = static_cast<Eigen::Index>(boundary->size()) * components;
    return LayerDensity(std::move(boundary), components, Vec::Zero(n));
}

LayerDensity LayerDensity::sample(BoundaryPtr boundary, int components,
                                  const std::function<Eigen::VectorXd(const Point&, const Point&)>& f) {
    Vec v(static_cast<Eigen::Index>(boundary->size()) * components);
    for (std::size_t i = 0; i < boundary->size(); ++i) {
        v.segment(static_cast<Eigen::Index>(i) * components, components) = f(boundary->node(i), boundary->normal(i));
    }
    return LayerDensity(std::move(boundary), components, std::move(v));
}

double LayerDensity::l2_norm() const {
    double s = 0.0;
    for (std::size_t i = 0; i < nodes(); ++i) s += boundary_->weight(i) * at(i).squaredNorm();
    return std::sqrt(s);
}

LayerDensity LayerDensity::operator+(const LayerDensity& other) const {
    if (other.k_ != k_ || other.values_.size() != values_.size() ||
        (other.boundary_ != boundary_ && other.boundary_->quadrature().nodes != boundary_->quadrature().nodes))
        throw GeometryError("densities live on different boundaries");
    return LayerDensity(boundary_, k_, values_ + other.values_);
}

LayerDensity LayerDensity::operator-(const LayerDensity& other) const { return *this + other * -1.0; }

LayerDensity LayerDensity::operator*(double s) const { return LayerDensity(boundary_, k_, values_ * s); }

PotentialField eval_single_layer(const OperatorSpec& op, const Boundary& b, const LayerDensity& v,
                                 std::span<const Point> targets, const PotentialOptions& opts) {
    require_density_on(b, v, "eval_single_layer");
    require_components(op, v);
    return evaluate_field(op, b, targets, opts, [&](const Point& x) { return single_layer_at(op, b, v.values(), x); });
}

PotentialField eval_double_layer(const OperatorSpec& op, const Boundary& b, const LayerDensity& u0,
                                 std::span<const Point> targets, const PotentialOptions& opts) {
    require_density_on(b, u0, "eval_double_layer");
    require_components(op, u0);
    return evaluate_field(op, b, targets, opts, [&](const Point& x) { return double_layer_at(op, b, u0.values(), x); });
}

PotentialField green_representation(const OperatorSpec& op, const Boundary& b, const LayerDensity& u0,
                                    const LayerDensity& u1, std::span<const Point> targets,
                                    const PotentialOptions& opts) {
    require_density_on(b, u0, "green_representation");
    require_density_on(b, u1, "green_representation");
    require_components(op, u0);
    require_components(op, u1);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (b.contains(targets[i]) == Containment::on_boundary)
            throw DomainError("green_representation: target " + std::to_string(i) + " lies on the boundary");
    }
    return evaluate_field(op, b, targets, opts, [&](const Point& x) {
        return Vec(double_layer_at(op, b, u0.values(), x) + single_layer_at(op, b, u1.values(), x));
    });
}

TraceResult trace_single_layer(const OperatorSpec& op, const Boundary& b, const LayerDensity& v, BoundaryPtr on,
                               const PotentialOptions& opts) {
    require_density_on(b, v, "trace_single_layer");
    require_components(op, v);
    if (!on) throw GeometryError("trace_single_layer: no target boundary");
    if (same_nodes(b, *on)) {
        return extrapolate_trace(op, b, on, TraceSide::interior, opts,
                                 [&](const Point& x, const Point&, double* mag) { return single_layer_at(op, b, v.values(), x, mag); });
    }
    const int k = op.components();
    Vec out = Vec::Zero(static_cast<Eigen::Index>(on->size()) * k);
    parallel_for(on->size(), [&](std::size_t i) {
        out.segment(static_cast<Eigen::Index>(i) * k, k) = single_layer_at(op, b, v.values(), on->node(i));
    });
    return {LayerDensity(on, k, std::move(out)), 0.0, false};
}

TraceResult trace_green(const OperatorSpec& op, const Boundary& b, const LayerDensity* u0, const LayerDensity* u1,
                        TraceSide side, const PotentialOptions& opts) {
    const LayerDensity* any = u0 ? u0 : u1;
    if (!any) throw GeometryError("trace_green: no density given");
    if (u0) {
        require_density_on(b, *u0, "trace_green");
        require_components(op, *u0);
    }
    if (u1) {
        require_density_on(b, *u1, "trace_green");
        require_components(op, *u1);
    }
    return extrapolate_trace(op, b, any->boundary_ptr(), side, opts, [&](const Point& x, const Point&, double* mag) {
        Vec acc = Vec::Zero(op.components());
        if (u0) acc += double_layer_at(op, b, u0->values(), x, mag);
        if (u1) acc += single_layer_at(op, b, u1->values(), x, mag);
        return acc;
    });
}

TraceResult conormal_jump_single_layer(const OperatorSpec& op, const Boundary& b, const LayerDensity& v,
                                       const PotentialOptions& opts) {
    require_density_on(b, v, "conormal_jump_single_layer");
    require_components(op, v);
    auto eval = [&](const Point& x, const Point& nu, double* mag) {
        return conormal_single_layer_at(op, b, v.values(), x, nu, mag);
    };
    const TraceResult inner = extrapolate_trace(op, b, v.boundary_ptr(), TraceSide::interior, opts, eval);
    const TraceResult outer = extrapolate_trace(op, b, v.boundary_ptr(), TraceSide::exterior, opts, eval);
    TraceResult out{inner.density - outer.density, std::max(inner.max_disagreement, outer.max_disagreement), false};
    out.flagged = inner.flagged || outer.flagged;
    return out;
}

Eigen::MatrixXd self_trace_single_layer_matrix(const OperatorSpec& op, const Boundary& b,
                                               const PotentialOptions& opts) {
    const int k = op.components();
    const auto n = static_cast<Eigen::Index>(b.size());
    Eigen::MatrixXd S(n * k, n * k);
    parallel_for(b.size(), [&](std::size_t i) {
        const double eps = opts.offset_factor * b.spacing(i);
        std::array<Point, 3> at;
        for (std::size_t l = 0; l < 3; ++l) at[l] = b.node(i) - trace_offsets[l] * eps * b.normal(i);
        for (std::size_t q = 0; q < b.size(); ++q) {
            KernelValue block = trace_weights[0] * phi(op, at[0], b.node(q));
            block += trace_weights[1] * phi(op, at[1], b.node(q));
            block += trace_weights[2] * phi(op, at[2], b.node(q));
            S.block(static_cast<Eigen::Index>(i) * k, static_cast<Eigen::Index>(q) * k, k, k) = b.weight(q) * block;
        }
    });
    return S;
}

}  // namespace extsolve
