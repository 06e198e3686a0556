#include "extsolve/problems.hpp"

#include "extsolve/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace extsolve {

namespace {

using Vec = Eigen::VectorXd;

void require_data_on(const LayerDensity& f, const Boundary& b, const char* what) {
    if (f.nodes() != b.size()) throw GeometryError(std::string(what) + ": datum does not live on the inner boundary");
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (f.boundary().node(i) != b.node(i))
            throw GeometryError(std::string(what) + ": datum does not live on the inner boundary");
    }
}

void require_components(const OperatorSpec& op, const LayerDensity& f) {
    if (f.components() != op.components()) throw OperatorError("datum component count does not match the operator");
}

std::vector<double> weights_of(const Boundary& b) { return b.quadrature().weights; }

}  // namespace

void CauchyData::validate() const {
    if (u00.nodes() != u10.nodes() || u00.components() != u10.components())
        throw GeometryError("Cauchy data traces must share a boundary");
    for (std::size_t i = 0; i < u00.nodes(); ++i) {
        if (u00.boundary().node(i) != u10.boundary().node(i))
            throw GeometryError("Cauchy data traces must share a boundary");
    }
}

ExtensionSolution::ExtensionSolution(OperatorSpec op, Representation rep, std::vector<Point> sources,
                                     std::vector<double> weights, Eigen::VectorXd coefficients, SolveReport report)
    : op_(std::move(op)),
      rep_(rep),
      sources_(std::move(sources)),
      weights_(std::move(weights)),
      coeffs_(std::move(coefficients)),
      report_(std::move(report)) {
    if (coeffs_.size() != static_cast<Eigen::Index>(sources_.size()) * op_.components())
        throw SolveError("coefficient count does not match the representation");
    if (!weights_.empty() && weights_.size() != sources_.size()) throw SolveError("one weight per source expected");
}

void ExtensionSolution::restrict_to(BoundaryPtr within, BoundaryPtr excluded, double band) {
    within_ = std::move(within);
    excluded_ = std::move(excluded);
    band_ = band;
}

void ExtensionSolution::subtract_green_potentials(CauchyData data, PotentialOptions opts) {
    data.validate();
    green_ = std::move(data);
    green_opts_ = opts;
}

void ExtensionSolution::add_flag(std::string flag) {
    if (std::find(report_.flags.begin(), report_.flags.end(), flag) == report_.flags.end())
        report_.flags.push_back(std::move(flag));
}

bool ExtensionSolution::valid_at(const Point& x) const {
    if (within_ && within_->contains(x) != Containment::inside) return false;
    if (excluded_ && excluded_->contains(x) != Containment::outside) return false;
    return true;
}

PotentialField ExtensionSolution::evaluate(std::span<const Point> points) const {
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!valid_at(points[i]))
            throw DomainError("evaluation point " + std::to_string(i) + " lies outside the solution domain");
    }
    const int k = op_.components();
    PotentialField field;
    field.points.assign(points.begin(), points.end());
    field.components = k;
    field.values = Vec::Zero(static_cast<Eigen::Index>(points.size()) * k);
    field.sides.assign(points.size(), Side::inside);
    parallel_for(points.size(), [&](std::size_t i) {
        Vec acc = Vec::Zero(k);
        for (std::size_t j = 0; j < sources_.size(); ++j) {
            KernelValue block = phi(op_, points[i], sources_[j]);
            if (!weights_.empty()) block *= weights_[j];
            acc += block * coeffs_.segment(static_cast<Eigen::Index>(j) * k, k);
        }
        field.values.segment(static_cast<Eigen::Index>(i) * k, k) = acc;
    });
    if (green_) {
        const PotentialField g =
            green_representation(op_, green_->boundary(), green_->u00, green_->u10, points, green_opts_);
        field.values -= g.values;
    }
    if (excluded_ && band_ > 0.0) {
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (excluded_->distance(points[i]) < band_) field.near_field.push_back(i);
        }
    }
    return field;
}

LayerDensity ExtensionSolution::trace_on(const BoundaryPtr& b) const {
    const PotentialField f = evaluate(b->quadrature().nodes);
    return LayerDensity(b, op_.components(), f.values);
}

ExtensionSolution solve_inner_dirichlet_mfs(const OperatorSpec& op, const DomainLayout& layout, const LayerDensity& f,
                                            const SolverOptions& opts) {
    op.require_solver_support();
    if (!layout.outer()) throw GeometryError("MFS needs an outer (source) boundary");
    require_data_on(f, *layout.inner(), "solve_inner_dirichlet_mfs");
    require_components(op, f);
    if (opts.sources < 1) throw SolveError("MFS needs at least one source");

    std::vector<Point> sources = source_sequence(*layout.outer(), opts.sources);
    const auto& targets = layout.inner()->quadrature().nodes;
    const Eigen::MatrixXd A = assemble(op, sources, {}, targets, AssemblyMode::mfs);
    SolveResult res = solve(A, f.values(), opts.reg);

    ExtensionSolution sol(op, ExtensionSolution::Representation::mfs_weights, std::move(sources), {},
                          std::move(res.coefficients), std::move(res.report));
    sol.restrict_to(layout.outer());
    return sol;
}

ExtensionSolution solve_inner_dirichlet_single_layer(const OperatorSpec& op, const DomainLayout& layout,
                                                     const LayerDensity& f, const SolverOptions& opts) {
    op.require_solver_support();
    if (!layout.middle()) throw GeometryError("the single-layer method needs a middle boundary");
    require_data_on(f, *layout.inner(), "solve_inner_dirichlet_single_layer");
    require_components(op, f);

    const Boundary& carrier = *layout.middle();
    std::vector<Point> sources = carrier.quadrature().nodes;
    std::vector<double> weights = weights_of(carrier);
    const auto& targets = layout.inner()->quadrature().nodes;
    const Eigen::MatrixXd A = assemble(op, sources, weights, targets, AssemblyMode::single_layer);
    SolveResult res = solve(A, f.values(), opts.reg);

    ExtensionSolution sol(op, ExtensionSolution::Representation::layer_density, std::move(sources),
                          std::move(weights), std::move(res.coefficients), std::move(res.report));
    sol.restrict_to(layout.middle());
    return sol;
}

ExtensionSolution solve_inner_dirichlet(const OperatorSpec& op, const DomainLayout& layout, const LayerDensity& f,
                                        Method method, const SolverOptions& opts) {
    return method == Method::mfs ? solve_inner_dirichlet_mfs(op, layout, f, opts)
                                 : solve_inner_dirichlet_single_layer(op, layout, f, opts);
}

ExtensionSolution continue_solution(const OperatorSpec& op, const DomainLayout& layout, const LayerDensity& v_trace,
                                    Method method, const SolverOptions& opts) {
    ExtensionSolution sol = solve_inner_dirichlet(op, layout, v_trace, method, opts);
    if (layout.middle()) sol.restrict_to(layout.middle());
    return sol;
}

LayerDensity cauchy_datum_on_probe(const OperatorSpec& op, const CauchyData& data, const BoundaryPtr& probe) {
    data.validate();
    if (!probe || !nested_inside(*probe, data.boundary()))
        throw GeometryError("probe boundary must lie strictly inside the data boundary");
    const PotentialField f =
        green_representation(op, data.boundary(), data.u00, data.u10, probe->quadrature().nodes);
    return LayerDensity(probe, op.components(), f.values);
}

TraceResult cauchy_datum_pv(const OperatorSpec& op, const CauchyData& data, const PotentialOptions& opts) {
    data.validate();
    return trace_green(op, data.boundary(), &data.u00, &data.u10, TraceSide::interior, opts);
}

HatDatum cauchy_datum_hat(const OperatorSpec& op, const DomainLayout& layout, const CauchyData& data,
                          const SolverOptions& opts) {
    data.validate();
    if (!layout.middle()) throw GeometryError("the hat reduction needs a middle boundary");
    require_data_on(data.u00, *layout.inner(), "cauchy_datum_hat");
    const Boundary& mid = *layout.middle();
    const int k = op.components();

    // Exterior values of the Green potentials on the middle boundary.
    const PotentialField g = green_representation(op, data.boundary(), data.u00, data.u10, mid.quadrature().nodes,
                                                  opts.potentials);

    // D g = (single layer on middle restricted to inner) (self trace on middle)^-1 g
    const Eigen::MatrixXd S = self_trace_single_layer_matrix(op, mid, opts.potentials);
    SolveResult inv = solve(S, g.values, RegConfig{});
    const Eigen::MatrixXd T =
        assemble(op, mid.quadrature().nodes, mid.quadrature().weights, layout.inner()->quadrature().nodes,
                 AssemblyMode::single_layer);
    const Vec Dg = T * inv.coefficients;

    const TraceResult pv = cauchy_datum_pv(op, data, opts.potentials);
    HatDatum out{LayerDensity(layout.inner(), k, pv.density.values() - Dg), std::move(inv.report), pv.flagged};
    if (out.inversion.flagged()) out.flagged = true;
    return out;
}

ExtensionSolution solve_cauchy(const OperatorSpec& op, const DomainLayout& layout, const CauchyData& data,
                               Reduction reduction, Method method, const SolverOptions& opts) {
    op.require_solver_support();
    data.validate();
    if (!layout.middle()) throw GeometryError("the Cauchy problem needs the middle boundary of the annulus");
    require_data_on(data.u00, *layout.inner(), "solve_cauchy");
    require_components(op, data.u00);

    const Boundary& inner = *layout.inner();
    const double band = opts.exclusion_factor * inner.max_spacing();
    std::vector<std::string> flags;

    auto finish = [&](ExtensionSolution sol, bool subtract) {
        if (subtract) sol.subtract_green_potentials(data, opts.potentials);
        sol.restrict_to(layout.middle(), layout.inner(), band);
        for (auto& f : flags) sol.add_flag(f);
        return sol;
    };

    switch (reduction) {
    case Reduction::probe: {
        BoundaryPtr probe = layout.probe();
        if (!probe) probe = std::make_shared<const Boundary>(inner.scaled(opts.probe_scale));
        const LayerDensity datum = cauchy_datum_on_probe(op, data, probe);
        const DomainLayout continuation(probe, layout.middle(), layout.outer());
        return finish(solve_inner_dirichlet(op, continuation, datum, method, opts), true);
    }
    case Reduction::pv: {
        const TraceResult datum = cauchy_datum_pv(op, data, opts.potentials);
        if (datum.flagged) flags.emplace_back("trace_extrapolation");
        return finish(solve_inner_dirichlet(op, layout.with_inner(layout.inner()), datum.density, method, opts), true);
    }
    case Reduction::hat: {
        const HatDatum datum = cauchy_datum_hat(op, layout, data, opts);
        if (datum.flagged) flags.emplace_back("hat_datum");
        return finish(solve_inner_dirichlet(op, layout.with_inner(layout.inner()), datum.datum, method, opts), false);
    }
    }
    throw SolveError("unknown reduction");
}

ExtensionSolution dirichlet_by_extension(const OperatorSpec& op, const BoundaryPtr& inner,
                                         const BoundaryPtr& virtual_boundary, const LayerDensity& w0, Method method,
                                         const SolverOptions& opts) {
    const DomainLayout layout = method == Method::mfs ? DomainLayout(inner, nullptr, virtual_boundary)
                                                      : DomainLayout(inner, virtual_boundary, nullptr);
    ExtensionSolution sol = solve_inner_dirichlet(op, layout, w0, method, opts);
    sol.restrict_to(inner);
    return sol;
}

std::string to_string(Method m) { return m == Method::mfs ? "mfs" : "single-layer"; }

std::string to_string(Reduction r) {
    switch (r) {
    case Reduction::probe: return "probe";
    case Reduction::pv: return "pv";
    case Reduction::hat: return "hat";
    }
    return "unknown";
}

}  // namespace extsolve
