#include "extsolve/kernels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace extsolve {

namespace {

constexpr double pi = std::numbers::pi;

// Radial profile g(rho) and its derivative for the scalar kernels.
struct Radial {
    double g;
    double dg;
};

Radial scalar_profile(const OperatorSpec& op, double rho) {
    switch (op.kind()) {
    case OperatorKind::laplace2d:
        return {-std::log(rho) / (2.0 * pi), -1.0 / (2.0 * pi * rho)};
    case OperatorKind::laplace3d:
        return {1.0 / (4.0 * pi * rho), -1.0 / (4.0 * pi * rho * rho)};
    case OperatorKind::helmholtz3d: {
        const double k = op.branch() == HelmholtzBranch::decaying ? -op.helmholtz_a() : op.helmholtz_a();
        const double e = std::exp(k * rho);
        return {e / (4.0 * pi * rho), e * (k * rho - 1.0) / (4.0 * pi * rho * rho)};
    }
    case OperatorKind::lame3d: break;
    }
    throw OperatorError("scalar_profile: operator is not scalar");
}

double checked_distance(const OperatorSpec& op, const Point& r) {
    const double rho = r.norm();
    if (!(rho > op.singular_radius())) throw SingularityError("kernel evaluated at coincident points", 0, 0);
    return rho;
}

using Mat3 = Eigen::Matrix3d;

Mat3 lame_phi(const OperatorSpec& op, const Point& r, double rho) {
    const double mu = op.mu(), la = op.lambda();
    const double C = 1.0 / (8.0 * pi * mu * (la + 2.0 * mu));
    const double r3 = rho * rho * rho;
    return C * ((la + 3.0 * mu) / rho * Mat3::Identity() + (la + mu) / r3 * (r * r.transpose()));
}

// dPhi[m](i, j) = d/dr_m Phi_ij(r).
std::array<Mat3, 3> lame_gradient(const OperatorSpec& op, const Point& r, double rho) {
    const double mu = op.mu(), la = op.lambda();
    const double C = 1.0 / (8.0 * pi * mu * (la + 2.0 * mu));
    const double r3 = rho * rho * rho;
    const double r5 = r3 * rho * rho;
    std::array<Mat3, 3> d;
    for (int m = 0; m < 3; ++m) {
        Mat3 t = -(la + 3.0 * mu) * r[m] / r3 * Mat3::Identity();
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                const double dim = (i == m ? r[j] : 0.0) + (j == m ? r[i] : 0.0);
                t(i, j) += (la + mu) * (dim / r3 - 3.0 * r[i] * r[j] * r[m] / r5);
            }
        }
        d[static_cast<std::size_t>(m)] = C * t;
    }
    return d;
}

// Column j of the result is B1 (normal n) applied to column j of Phi, with
// derivatives taken in the argument r = x - y.
Mat3 lame_conormal(const OperatorSpec& op, const Point& r, double rho, const Point& n) {
    const auto d = lame_gradient(op, r, rho);
    const double mu = op.mu(), la = op.lambda();
    Mat3 out = Mat3::Zero();
    for (int j = 0; j < 3; ++j) {
        double div = 0.0;
        for (int m = 0; m < 3; ++m) div += d[static_cast<std::size_t>(m)](m, j);
        for (int i = 0; i < 3; ++i) {
            double dn = 0.0;
            for (int m = 0; m < 3; ++m) dn += n[m] * d[static_cast<std::size_t>(m)](i, j);
            out(i, j) = mu * dn + (mu + la) * n[i] * div;
        }
    }
    return out;
}

KernelValue scalar(double v) {
    KernelValue k(1, 1);
    k(0, 0) = v;
    return k;
}

}  // namespace

OperatorSpec OperatorSpec::laplace2d() {
    OperatorSpec op;
    op.kind_ = OperatorKind::laplace2d;
    return op;
}

OperatorSpec OperatorSpec::laplace3d() {
    OperatorSpec op;
    op.kind_ = OperatorKind::laplace3d;
    return op;
}

OperatorSpec OperatorSpec::helmholtz3d(double a, HelmholtzBranch branch) {
    if (!(std::abs(a) > 0.0) || !std::isfinite(a)) throw OperatorError("helmholtz3d needs |a| > 0");
    OperatorSpec op;
    op.kind_ = OperatorKind::helmholtz3d;
    op.a_ = std::abs(a);
    op.branch_ = branch;
    return op;
}

OperatorSpec OperatorSpec::lame3d(double mu, double lambda) {
    if (!(mu > 0.0)) throw OperatorError("lame3d needs mu > 0");
    if (!(2.0 * mu + lambda > 0.0)) throw OperatorError("lame3d needs 2 mu + lambda > 0");
    OperatorSpec op;
    op.kind_ = OperatorKind::lame3d;
    op.mu_ = mu;
    op.lambda_ = lambda;
    return op;
}

OperatorSpec OperatorSpec::with_singular_radius(double eps) const {
    OperatorSpec op = *this;
    op.singular_radius_ = eps;
    return op;
}

bool OperatorSpec::solver_supported() const {
    return !(kind_ == OperatorKind::helmholtz3d && branch_ == HelmholtzBranch::growing);
}

void OperatorSpec::require_solver_support() const {
    if (!solver_supported()) {
        throw OperatorError(
            "the growing Helmholtz kernel exp(|a| r)/(4 pi r) lacks the decay at infinity that the single-layer "
            "representation needs; use the decaying branch");
    }
}

std::string OperatorSpec::name() const {
    switch (kind_) {
    case OperatorKind::laplace2d: return "laplace2d";
    case OperatorKind::laplace3d: return "laplace3d";
    case OperatorKind::helmholtz3d: return "helmholtz3d";
    case OperatorKind::lame3d: return "lame3d";
    }
    return "unknown";
}

KernelValue phi(const OperatorSpec& op, const Point& x, const Point& y) {
    const Point r = x - y;
    const double rho = checked_distance(op, r);
    if (op.kind() == OperatorKind::lame3d) return lame_phi(op, r, rho);
    return scalar(scalar_profile(op, rho).g);
}

KernelValue conormal_kernel_y(const OperatorSpec& op, const Point& x, const Point& y, const Point& ny) {
    const Point r = x - y;
    const double rho = checked_distance(op, r);
    if (op.kind() == OperatorKind::lame3d) return Mat3(-lame_conormal(op, r, rho, ny).transpose());
    return scalar(-scalar_profile(op, rho).dg * r.dot(ny) / rho);
}

KernelValue conormal_kernel_x(const OperatorSpec& op, const Point& x, const Point& nx, const Point& y) {
    const Point r = x - y;
    const double rho = checked_distance(op, r);
    if (op.kind() == OperatorKind::lame3d) return lame_conormal(op, r, rho, nx);
    return scalar(scalar_profile(op, rho).dg * r.dot(nx) / rho);
}

double pde_residual(const OperatorSpec& op, const Point& y, const Point& x, double h) {
    const double rho = (x - y).norm();
    if (!(rho > 10.0 * h)) throw OperatorError("pde_residual needs |x - y| > 10 h");
    const int dim = op.dim();
    const int k = op.components();

    auto at = [&](const Point& offset) { return phi(op, x + offset, y); };
    auto e = [](int i) { return Point(Point::Unit(i)); };

    const KernelValue center = at(Point::Zero());
    // hess[i][j] = d_i d_j Phi (each a k x k block), central differences.
    std::array<std::array<KernelValue, 3>, 3> hess;
    for (int i = 0; i < dim; ++i) {
        hess[i][i] = (at(h * e(i)) - 2.0 * center + at(-h * e(i))) / (h * h);
        for (int j = i + 1; j < dim; ++j) {
            hess[i][j] = (at(h * (e(i) + e(j))) - at(h * (e(i) - e(j))) - at(h * (e(j) - e(i))) + at(-h * (e(i) + e(j)))) /
                         (4.0 * h * h);
            hess[j][i] = hess[i][j];
        }
    }

    KernelValue laplacian = KernelValue::Zero(k, k);
    for (int i = 0; i < dim; ++i) laplacian += hess[i][i];

    KernelValue residual;
    switch (op.kind()) {
    case OperatorKind::laplace2d:
    case OperatorKind::laplace3d: residual = -laplacian; break;
    case OperatorKind::helmholtz3d: residual = op.helmholtz_a() * op.helmholtz_a() * center - laplacian; break;
    case OperatorKind::lame3d: {
        // (grad div v)_i = sum_m d_i d_m v_m, applied to each column of Phi.
        KernelValue graddiv = KernelValue::Zero(3, 3);
        for (int col = 0; col < 3; ++col) {
            for (int i = 0; i < 3; ++i) {
                double s = 0.0;
                for (int m = 0; m < 3; ++m) s += hess[i][m](m, col);
                graddiv(i, col) = s;
            }
        }
        residual = -op.mu() * laplacian - (op.mu() + op.lambda()) * graddiv;
        break;
    }
    }
    // Second-derivative scale; the gradient term keeps it nonzero where a
    // logarithmic kernel vanishes.
    double grad = 0.0;
    for (int i = 0; i < dim; ++i) grad = std::max(grad, ((at(h * e(i)) - at(-h * e(i))) / (2.0 * h)).cwiseAbs().maxCoeff());
    const double scale = (center.cwiseAbs().maxCoeff() + rho * grad) / (rho * rho);
    return residual.cwiseAbs().maxCoeff() / scale;
}

}  // namespace extsolve
