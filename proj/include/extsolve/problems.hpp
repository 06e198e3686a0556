#pragma once

#include "extsolve/geometry.hpp"
#include "extsolve/kernels.hpp"
#include "extsolve/potentials.hpp"
#include "extsolve/reglinalg.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace extsolve {

enum class Method { mfs, single_layer };

/// Route from Cauchy data to a Dirichlet datum for the continuation step.
enum class Reduction { probe, pv, hat };

/// Dirichlet trace u00 and conormal trace u10 (outward normal of the data
/// boundary) of the sought solution.
struct CauchyData {
    LayerDensity u00;
    LayerDensity u10;

    const Boundary& boundary() const { return u00.boundary(); }
    const BoundaryPtr& boundary_ptr() const { return u00.boundary_ptr(); }
    void validate() const;
};

struct SolverOptions {
    /// Number of MFS sources N.
    std::size_t sources = 64;
    RegConfig reg;
    PotentialOptions potentials;
    /// Exclusion band around the data boundary of a Cauchy solution, in
    /// units of its node spacing.
    double exclusion_factor = 3.0;
    /// Scale of the default probe boundary relative to the data boundary.
    double probe_scale = 0.6;
};

/// Approximate solution: a weighted sum of fundamental solutions, possibly
/// minus the Green potentials of Cauchy data, together with the region in
/// which it may be evaluated.
class ExtensionSolution {
public:
    enum class Representation { mfs_weights, layer_density };

    ExtensionSolution(OperatorSpec op, Representation rep, std::vector<Point> sources, std::vector<double> weights,
                      Eigen::VectorXd coefficients, SolveReport report);

    Representation representation() const { return rep_; }
    const std::vector<Point>& sources() const { return sources_; }
    const std::vector<double>& weights() const { return weights_; }
    const Eigen::VectorXd& coefficients() const { return coeffs_; }
    const SolveReport& report() const { return report_; }
    const std::vector<std::string>& flags() const { return report_.flags; }
    const OperatorSpec& op() const { return op_; }

    /// Points must lie strictly inside `within`; when `excluded` is set they
    /// must also lie outside it, and those closer than `band` are reported
    /// in the field's near-field list.
    void restrict_to(BoundaryPtr within, BoundaryPtr excluded = nullptr, double band = 0.0);

    /// u = (weighted sum) - (double layer of u00 + single layer of u10).
    void subtract_green_potentials(CauchyData data, PotentialOptions opts);

    void add_flag(std::string flag);

    bool valid_at(const Point& x) const;

    /// Throws DomainError when a point is outside the region of validity.
    PotentialField evaluate(std::span<const Point> points) const;

    /// Trace of the solution at the nodes of a boundary inside the region.
    LayerDensity trace_on(const BoundaryPtr& b) const;

private:
    OperatorSpec op_;
    Representation rep_;
    std::vector<Point> sources_;
    std::vector<double> weights_;
    Eigen::VectorXd coeffs_;
    SolveReport report_;
    BoundaryPtr within_;
    BoundaryPtr excluded_;
    double band_ = 0.0;
    std::optional<CauchyData> green_;
    PotentialOptions green_opts_;
};

/// Inner Dirichlet problem by the method of fundamental solutions: sources
/// are the first N points of the nested sequence on layout.outer(),
/// collocation at the nodes of layout.inner().
ExtensionSolution solve_inner_dirichlet_mfs(const OperatorSpec& op, const DomainLayout& layout, const LayerDensity& f,
                                            const SolverOptions& opts = {});

/// Inner Dirichlet problem by a single-layer density on layout.middle().
ExtensionSolution solve_inner_dirichlet_single_layer(const OperatorSpec& op, const DomainLayout& layout,
                                                     const LayerDensity& f, const SolverOptions& opts = {});

ExtensionSolution solve_inner_dirichlet(const OperatorSpec& op, const DomainLayout& layout, const LayerDensity& f,
                                        Method method, const SolverOptions& opts = {});

/// Continues a solution known in the domain bounded by layout.inner() from
/// its trace there.
ExtensionSolution continue_solution(const OperatorSpec& op, const DomainLayout& layout, const LayerDensity& v_trace,
                                    Method method, const SolverOptions& opts = {});

/// Dirichlet datum on a probe boundary strictly inside the data boundary:
/// Green potentials of the Cauchy data evaluated at the probe nodes.
LayerDensity cauchy_datum_on_probe(const OperatorSpec& op, const CauchyData& data, const BoundaryPtr& probe);

/// Dirichlet datum on the data boundary itself: interior limit of the Green
/// potentials, by offset extrapolation.
TraceResult cauchy_datum_pv(const OperatorSpec& op, const CauchyData& data, const PotentialOptions& opts = {});

/// Dirichlet datum whose inner-Dirichlet solution has the same trace on
/// layout.middle() as the Cauchy solution.
struct HatDatum {
    LayerDensity datum;
    SolveReport inversion;
    bool flagged = false;
};
HatDatum cauchy_datum_hat(const OperatorSpec& op, const DomainLayout& layout, const CauchyData& data,
                          const SolverOptions& opts = {});

/// Cauchy problem in the annulus between layout.inner() and layout.middle().
ExtensionSolution solve_cauchy(const OperatorSpec& op, const DomainLayout& layout, const CauchyData& data,
                               Reduction reduction, Method method, const SolverOptions& opts = {});

/// Classical Dirichlet problem inside `inner` through the inner Dirichlet
/// problem posed with a virtual embracing boundary.
ExtensionSolution dirichlet_by_extension(const OperatorSpec& op, const BoundaryPtr& inner,
                                         const BoundaryPtr& virtual_boundary, const LayerDensity& w0, Method method,
                                         const SolverOptions& opts = {});

std::string to_string(Method m);
std::string to_string(Reduction r);

}  // namespace extsolve
