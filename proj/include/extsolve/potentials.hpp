#pragma once

#include "extsolve/geometry.hpp"
#include "extsolve/kernels.hpp"

#include <Eigen/Core>

#include <functional>
#include <span>
#include <vector>

namespace extsolve {

/// k-vector valued function sampled at the quadrature nodes of a boundary.
/// Values are stacked node-major: entry (node i, component c) is i*k + c.
class LayerDensity {
public:
    LayerDensity(BoundaryPtr boundary, int components, Eigen::VectorXd values);

    static LayerDensity zeros(BoundaryPtr boundary, int components);
    static LayerDensity sample(BoundaryPtr boundary, int components,
                               const std::function<Eigen::VectorXd(const Point& node, const Point& normal)>& f);

    const Boundary& boundary() const { return *boundary_; }
    const BoundaryPtr& boundary_ptr() const { return boundary_; }
    int components() const { return k_; }
    std::size_t nodes() const { return boundary_->size(); }

    const Eigen::VectorXd& values() const { return values_; }
    auto at(std::size_t i) const { return values_.segment(static_cast<Eigen::Index>(i) * k_, k_); }

    /// Discrete L2 norm with the boundary quadrature weights.
    double l2_norm() const;

    LayerDensity operator+(const LayerDensity& other) const;
    LayerDensity operator-(const LayerDensity& other) const;
    LayerDensity operator*(double s) const;

private:
    BoundaryPtr boundary_;
    int k_;
    Eigen::VectorXd values_;
};

enum class Side { inside, outside, on_boundary };

/// Potential values at a set of evaluation points (stacked like LayerDensity).
struct PotentialField {
    std::vector<Point> points;
    int components = 1;
    Eigen::VectorXd values;
    std::vector<Side> sides;
    /// Indices of points closer to the generating boundary than the
    /// near-field threshold; plain quadrature there is not reliable.
    std::vector<std::size_t> near_field;

    bool near_singular() const { return !near_field.empty(); }
    auto at(std::size_t i) const { return values.segment(static_cast<Eigen::Index>(i) * components, components); }
};

struct PotentialOptions {
    /// Near-field band, in units of the local node spacing.
    double near_field_factor = 3.0;
    /// Offset of the outer extrapolation point, in units of the local node spacing.
    double offset_factor = 4.0;
    /// Relative disagreement between extrapolation levels that raises the flag.
    double trace_tolerance = 1e-2;
};

/// Boundary values obtained by offset evaluation plus Richardson extrapolation.
struct TraceResult {
    LayerDensity density;
    /// max second difference of the offset samples, relative to the summed size of the quadrature terms.
    double max_disagreement = 0.0;
    bool flagged = false;
};

enum class TraceSide { interior, exterior };

PotentialField eval_single_layer(const OperatorSpec& op, const Boundary& b, const LayerDensity& v,
                                 std::span<const Point> targets, const PotentialOptions& opts = {});

/// Double layer with the leading minus: -sum_q w_q K_y(x, y_q) u0(y_q).
PotentialField eval_double_layer(const OperatorSpec& op, const Boundary& b, const LayerDensity& u0,
                                 std::span<const Point> targets, const PotentialOptions& opts = {});

/// Double layer of u0 plus single layer of u1. Reproduces a solution inside
/// b from its Dirichlet and conormal traces and vanishes outside.
PotentialField green_representation(const OperatorSpec& op, const Boundary& b, const LayerDensity& u0,
                                    const LayerDensity& u1, std::span<const Point> targets,
                                    const PotentialOptions& opts = {});

/// Single layer of v restricted to the nodes of `on`. Disjoint boundaries use
/// plain quadrature; when `on` is b itself the interior limit is
/// extrapolated from offset points (the single layer is continuous across b).
TraceResult trace_single_layer(const OperatorSpec& op, const Boundary& b, const LayerDensity& v, BoundaryPtr on,
                               const PotentialOptions& opts = {});

/// One-sided limit at the nodes of b of (double layer of u0) + (single layer
/// of u1); either density may be null.
TraceResult trace_green(const OperatorSpec& op, const Boundary& b, const LayerDensity* u0, const LayerDensity* u1,
                        TraceSide side, const PotentialOptions& opts = {});

/// Jump of the conormal derivative of the single layer across b: interior
/// limit minus exterior limit, both taken with the outward normal. Equals v.
TraceResult conormal_jump_single_layer(const OperatorSpec& op, const Boundary& b, const LayerDensity& v,
                                       const PotentialOptions& opts = {});

/// Matrix of the on-surface single-layer operator on b built with the same
/// offset extrapolation as trace_single_layer; columns carry the weights.
Eigen::MatrixXd self_trace_single_layer_matrix(const OperatorSpec& op, const Boundary& b,
                                               const PotentialOptions& opts = {});

}  // namespace extsolve
