#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "extsolve/kernels.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace extsolve;
using std::numbers::pi;

namespace {

std::vector<OperatorSpec> all_ops() {
    return {OperatorSpec::laplace2d(), OperatorSpec::laplace3d(), OperatorSpec::helmholtz3d(1.0),
            OperatorSpec::lame3d(1.0, 1.0)};
}

// Finite-difference conormal of the columns of Phi, derivatives taken in
// the variable selected by `in_y`, at step h. Column j of the result is
// B1 applied to column j of Phi.
KernelValue fd_conormal(const OperatorSpec& op, const Point& x, const Point& y, const Point& n, bool in_y, double h) {
    const int k = op.components();
    const int dim = op.dim();
    auto f = [&](const Point& d) { return in_y ? phi(op, x, y + d) : phi(op, x + d, y); };
    std::array<KernelValue, 3> grad;  // grad[i] = d_i Phi
    for (int i = 0; i < dim; ++i) {
        const Point e = h * Point::Unit(i);
        grad[i] = (f(e) - f(-e)) / (2 * h);
    }
    KernelValue out = KernelValue::Zero(k, k);
    if (op.kind() != OperatorKind::lame3d) {
        for (int i = 0; i < dim; ++i) out += n(i) * grad[i];
        return out;
    }
    // column j: u = Phi e_j, B1 u = mu du/dn + (mu + lambda) n div u
    for (int j = 0; j < 3; ++j) {
        double div = 0.0;
        for (int i = 0; i < 3; ++i) div += grad[i](i, j);
        for (int c = 0; c < 3; ++c) {
            double dn = 0.0;
            for (int i = 0; i < 3; ++i) dn += n(i) * grad[i](c, j);
            out(c, j) = op.mu() * dn + (op.mu() + op.lambda()) * n(c) * div;
        }
    }
    return out;
}

double max_abs(const KernelValue& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("fundamental solution values") {
    CHECK(std::abs(phi(OperatorSpec::laplace3d(), Point(1, 0, 0), Point::Zero())(0, 0) - 1.0 / (4 * pi)) < 1e-15);
    CHECK(std::abs(phi(OperatorSpec::laplace3d(), Point(0.2, 0.3, 0.4), Point(0.2, 0.3, 1.4))(0, 0) - 0.079577472) <
          1e-9);
    CHECK(std::abs(phi(OperatorSpec::laplace2d(), Point(1, 0, 0), Point::Zero())(0, 0)) < 1e-16);
    CHECK(std::abs(phi(OperatorSpec::helmholtz3d(2.0), Point(0, 1, 0), Point::Zero())(0, 0) - 0.0107696397) < 1e-10);
    CHECK(std::abs(phi(OperatorSpec::helmholtz3d(2.0), Point(0, 1, 0), Point::Zero())(0, 0) -
                   std::exp(-2.0) / (4 * pi)) < 1e-16);
    CHECK(std::abs(phi(OperatorSpec::helmholtz3d(2.0, HelmholtzBranch::growing), Point(0, 1, 0), Point::Zero())(0, 0) -
                   std::exp(2.0) / (4 * pi)) < 1e-14);

    const KernelValue L = phi(OperatorSpec::lame3d(1.0, 1.0), Point(1, 0, 0), Point::Zero());
    REQUIRE(L.rows() == 3);
    CHECK(std::abs(L(0, 1)) == 0.0);
    CHECK(std::abs(L(0, 0) - 1.0 / (4 * pi)) < 1e-15);
    // transverse entries: (lambda + 3 mu) / (8 pi mu (lambda + 2 mu)) = 4 / (24 pi)
    CHECK(std::abs(L(1, 1) - 1.0 / (6 * pi)) < 1e-15);
}

TEST_CASE("coincident points raise a singularity error") {
    for (const auto& op : all_ops()) {
        CHECK_THROWS_AS(phi(op, Point(0.1, 0.2, 0), Point(0.1, 0.2, 0)), SingularityError);
        CHECK_THROWS_AS(conormal_kernel_y(op, Point::Zero(), Point::Zero(), Point(1, 0, 0)), SingularityError);
    }
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(OperatorSpec::helmholtz3d(0.0), OperatorError);
    // only |a| enters the operator
    CHECK(phi(OperatorSpec::helmholtz3d(-1.5), Point(1, 0, 0), Point::Zero())(0, 0) ==
          phi(OperatorSpec::helmholtz3d(1.5), Point(1, 0, 0), Point::Zero())(0, 0));
    CHECK_THROWS_AS(OperatorSpec::lame3d(0.0, 1.0), OperatorError);
    CHECK_THROWS_AS(OperatorSpec::lame3d(1.0, -2.5), OperatorError);
    CHECK_NOTHROW(OperatorSpec::lame3d(1.0, -1.5));
    CHECK(OperatorSpec::helmholtz3d(1.0).solver_supported());
    CHECK_FALSE(OperatorSpec::helmholtz3d(1.0, HelmholtzBranch::growing).solver_supported());
    CHECK_THROWS_AS(OperatorSpec::helmholtz3d(1.0, HelmholtzBranch::growing).require_solver_support(), OperatorError);
    CHECK(OperatorSpec::lame3d(1, 1).components() == 3);
    CHECK(OperatorSpec::laplace2d().dim() == 2);
}

TEST_CASE("translation invariance and symmetry") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1, 1);
    for (const auto& op : all_ops()) {
        for (int i = 0; i < 10; ++i) {
            const double z = op.dim() == 3 ? 1.0 : 0.0;
            const Point x(u(rng), u(rng), z * u(rng)), y(u(rng) + 3, u(rng), z * u(rng));
            const Point t(0.25, -0.5, z * 0.125);
            const KernelValue a = phi(op, x, y);
            CHECK(max_abs(phi(op, x + t, y + t) - a) <= 1e-14 * max_abs(a));
            CHECK(max_abs(a - phi(op, y, x)) <= 1e-12 * max_abs(a));
            CHECK(max_abs(a - a.transpose()) <= 1e-12 * max_abs(a));
        }
    }
}

TEST_CASE("conormal kernels against finite differences") {
    const Point x(0.3, -0.2, 0.1), y(1.1, 0.4, -0.5);
    const Point n = Point(0.3, -0.7, 0.2).normalized();
    for (const auto& op : all_ops()) {
        CAPTURE(op.name());
        const Point xx = op.dim() == 2 ? Point(x.x(), x.y(), 0) : x;
        const Point yy = op.dim() == 2 ? Point(y.x(), y.y(), 0) : y;
        const Point nn = op.dim() == 2 ? Point(n.x(), n.y(), 0).normalized() : n;
        const KernelValue kx = conormal_kernel_x(op, xx, nn, yy);
        const KernelValue ky = conormal_kernel_y(op, xx, yy, nn);
        const double scale = max_abs(kx);
        CHECK(max_abs(kx - fd_conormal(op, xx, yy, nn, false, 1e-5)) < 1e-7 * std::max(1.0, scale));
        // kernel_y is the transpose of B1 in y applied to the columns
        CHECK(max_abs(ky - fd_conormal(op, xx, yy, nn, true, 1e-5).transpose()) < 1e-7 * std::max(1.0, scale));

        // second order: halving h cuts the discrepancy about four times
        const double e1 = max_abs(kx - fd_conormal(op, xx, yy, nn, false, 2e-2));
        const double e2 = max_abs(kx - fd_conormal(op, xx, yy, nn, false, 1e-2));
        CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.1));
    }
}

TEST_CASE("conormal kernel examples") {
    const auto l2 = OperatorSpec::laplace2d();
    // B1 in y of -(1/2pi) ln|x - y| at x = 0, y = (1,0), ny = (1,0)
    const double ky = conormal_kernel_y(l2, Point::Zero(), Point(1, 0, 0), Point(1, 0, 0))(0, 0);
    CHECK(std::abs(ky + 1.0 / (2 * pi)) < 1e-15);
    CHECK(std::abs(conormal_kernel_x(l2, Point::Zero(), Point(1, 0, 0), Point(1, 0, 0))(0, 0) + ky) < 1e-15);

    const auto l3 = OperatorSpec::laplace3d();
    CHECK(std::abs(conormal_kernel_y(l3, Point::Zero(), Point(1, 0, 0), Point(0, 1, 0))(0, 0)) < 1e-17);

    // antisymmetry for radial kernels
    for (const auto& op : {l2, l3, OperatorSpec::helmholtz3d(1.5)}) {
        const Point x(0.1, 0.2, op.dim() == 3 ? 0.3 : 0.0), y(-0.4, 0.9, op.dim() == 3 ? 0.1 : 0.0);
        const Point n = Point(1, 2, op.dim() == 3 ? -1 : 0).normalized();
        CHECK(std::abs(conormal_kernel_x(op, x, n, y)(0, 0) + conormal_kernel_y(op, x, y, n)(0, 0)) < 1e-15);
    }
}

TEST_CASE("pde residual examples") {
    CHECK(pde_residual(OperatorSpec::laplace3d(), Point::Zero(), Point(1, 0, 0), 1e-3) < 1e-5);
    CHECK(pde_residual(OperatorSpec::helmholtz3d(1.0), Point::Zero(), Point(0, 1, 0), 1e-3) < 1e-4);
    CHECK(pde_residual(OperatorSpec::lame3d(1.0, 1.0), Point::Zero(), Point(0.6, 0.8, 0), 1e-3) < 1e-4);
    CHECK(pde_residual(OperatorSpec::lame3d(2.0, 0.5), Point(5, 0, 0), Point(1, 0, 0), 1e-3) < 1e-4);
    CHECK_THROWS_AS(pde_residual(OperatorSpec::laplace3d(), Point::Zero(), Point(0.005, 0, 0), 1e-3), OperatorError);

    // the stencil residual is pure truncation error, so it is O(h^2)
    for (const auto& op : all_ops()) {
        const double r1 = pde_residual(op, Point::Zero(), Point(0.7, 0.4, op.dim() == 3 ? 0.2 : 0.0), 2e-3);
        const double r2 = pde_residual(op, Point::Zero(), Point(0.7, 0.4, op.dim() == 3 ? 0.2 : 0.0), 1e-3);
        CAPTURE(op.name());
        CHECK(r1 / r2 == doctest::Approx(4.0).epsilon(0.1));
    }
}
