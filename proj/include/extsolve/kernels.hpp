#pragma once

#include "extsolve/types.hpp"

#include <string>

namespace extsolve {

enum class OperatorKind { laplace2d, laplace3d, helmholtz3d, lame3d };

enum class HelmholtzBranch { decaying, growing };

/// Second-order strongly elliptic operator with a convolution-type
/// fundamental solution.
///
///   laplace2d, laplace3d   L = -Laplacian
///   helmholtz3d            L = |a|^2 - Laplacian
///   lame3d                 L = -mu Laplacian - (mu + lambda) grad div
///
/// The conormal derivative B1 is d/dnu for the scalar operators and
/// mu d/dnu + (mu + lambda) nu div for Lame.
class OperatorSpec {
public:
    static OperatorSpec laplace2d();
    static OperatorSpec laplace3d();
    static OperatorSpec helmholtz3d(double a, HelmholtzBranch branch = HelmholtzBranch::decaying);
    static OperatorSpec lame3d(double mu, double lambda);

    OperatorKind kind() const { return kind_; }
    int dim() const { return kind_ == OperatorKind::laplace2d ? 2 : 3; }
    int components() const { return kind_ == OperatorKind::lame3d ? 3 : 1; }

    double helmholtz_a() const { return a_; }
    HelmholtzBranch branch() const { return branch_; }
    double mu() const { return mu_; }
    double lambda() const { return lambda_; }

    /// Minimum |x - y| below which kernels refuse to evaluate.
    double singular_radius() const { return singular_radius_; }
    OperatorSpec with_singular_radius(double eps) const;

    /// Solvers only accept operators for which the single-layer
    /// representation holds (the growing Helmholtz branch does not).
    bool solver_supported() const;
    void require_solver_support() const;

    std::string name() const;

private:
    OperatorSpec() = default;

    OperatorKind kind_ = OperatorKind::laplace3d;
    double a_ = 0.0;
    HelmholtzBranch branch_ = HelmholtzBranch::decaying;
    double mu_ = 1.0;
    double lambda_ = 0.0;
    double singular_radius_ = 1e-13;
};

/// Fundamental solution Phi(x, y) = Phi(x - y), a k x k block.
KernelValue phi(const OperatorSpec& op, const Point& x, const Point& y);

/// (B1 in y applied to the columns of Phi(x, .))^T at a source point y with
/// unit normal ny. The double layer integrates minus this kernel.
KernelValue conormal_kernel_y(const OperatorSpec& op, const Point& x, const Point& y, const Point& ny);

/// B1 in x applied to the columns of Phi(., y) at a point x with unit normal nx.
KernelValue conormal_kernel_x(const OperatorSpec& op, const Point& x, const Point& nx, const Point& y);

/// Applies L by central second differences with step h to every column of
/// Phi(., y) at x and returns the largest entry of L_h Phi relative to the
/// second-derivative scale max|Phi| / |x - y|^2. Requires |x - y| > 10 h.
double pde_residual(const OperatorSpec& op, const Point& y, const Point& x, double h);

}  // namespace extsolve
