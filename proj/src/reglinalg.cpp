#include "extsolve/reglinalg.hpp"

#include "extsolve/parallel.hpp"

#include <cmath>
#include <limits>

namespace extsolve {

namespace {

constexpr double default_alpha_scale = 1e-24;

// Condition estimates saturate at 1 / machine epsilon; beyond that the
// smallest singular value is roundoff.
double capped_condition(double smax, double smin) {
    const double cap = 1.0 / std::numeric_limits<double>::epsilon();
    return smin > smax / cap ? smax / smin : cap;
}

// Search window for the discrepancy bisection, relative to sigma_max^2.
constexpr double log_alpha_lo = -40.0;
constexpr double log_alpha_hi = 4.0;

}  // namespace

RegConfig RegConfig::tikhonov_fixed(double alpha) {
    RegConfig r;
    r.alpha = alpha;
    return r;
}

RegConfig RegConfig::truncated(double tau) {
    RegConfig r;
    r.method = RegMethod::tsvd;
    r.tau = tau;
    return r;
}

RegConfig RegConfig::morozov(double delta) {
    RegConfig r;
    r.discrepancy = delta;
    return r;
}

void RegConfig::validate() const {
    if (alpha && !(*alpha >= 0.0)) throw SolveError("regularization alpha must be nonnegative");
    if (method == RegMethod::tsvd && !(tau > 0.0 && tau < 1.0)) throw SolveError("tsvd threshold must lie in (0, 1)");
    if (discrepancy && !(*discrepancy > 0.0)) throw SolveError("discrepancy noise level must be positive");
    if (discrepancy && method != RegMethod::tikhonov) throw SolveError("discrepancy selection needs tikhonov");
}

Eigen::MatrixXd assemble(const OperatorSpec& op, std::span<const Point> sources, std::span<const double> weights,
                         std::span<const Point> targets, AssemblyMode mode) {
    const int k = op.components();
    if (mode == AssemblyMode::single_layer && weights.size() != sources.size())
        throw SolveError("single-layer assembly needs one weight per source");
    Eigen::MatrixXd A(static_cast<Eigen::Index>(targets.size()) * k, static_cast<Eigen::Index>(sources.size()) * k);
    parallel_for(targets.size(), [&](std::size_t i) {
        for (std::size_t j = 0; j < sources.size(); ++j) {
            KernelValue block;
            try {
                block = phi(op, targets[i], sources[j]);
            } catch (const SingularityError&) {
                throw SingularityError("assemble: target " + std::to_string(i) + " coincides with source " +
                                           std::to_string(j),
                                       i, j);
            }
            if (mode == AssemblyMode::single_layer) block *= weights[j];
            A.block(static_cast<Eigen::Index>(i) * k, static_cast<Eigen::Index>(j) * k, k, k) = block;
        }
    });
    return A;
}

SpectralSolver::SpectralSolver(const Eigen::MatrixXd& A) : svd_(A, Eigen::ComputeThinU | Eigen::ComputeThinV) {
    if (!A.allFinite()) throw SolveError("matrix has non-finite entries");
    sigma_ = svd_.singularValues();
    if (sigma_.size() == 0 || sigma_(0) == 0.0) throw SolveError("matrix is identically zero");
}

Eigen::VectorXd SpectralSolver::project(const Eigen::VectorXd& b) const { return svd_.matrixU().transpose() * b; }

double SpectralSolver::orthogonal_residual(const Eigen::VectorXd& b) const {
    return (b - svd_.matrixU() * project(b)).norm();
}

Eigen::VectorXd SpectralSolver::tikhonov(const Eigen::VectorXd& b, double alpha) const {
    const Eigen::VectorXd beta = project(b);
    Eigen::VectorXd coeff(sigma_.size());
    for (Eigen::Index i = 0; i < sigma_.size(); ++i) {
        const double s = sigma_(i);
        const double den = s * s + alpha;
        coeff(i) = den > 0.0 ? s * beta(i) / den : 0.0;
    }
    return svd_.matrixV() * coeff;
}

Eigen::VectorXd SpectralSolver::truncated(const Eigen::VectorXd& b, double tau) const {
    const Eigen::VectorXd beta = project(b);
    Eigen::VectorXd coeff = Eigen::VectorXd::Zero(sigma_.size());
    for (Eigen::Index i = 0; i < sigma_.size(); ++i) {
        if (sigma_(i) > tau * sigma_(0)) coeff(i) = beta(i) / sigma_(i);
    }
    return svd_.matrixV() * coeff;
}

double SpectralSolver::tikhonov_residual(const Eigen::VectorXd& b, double alpha) const {
    const Eigen::VectorXd beta = project(b);
    double r2 = 0.0;
    for (Eigen::Index i = 0; i < sigma_.size(); ++i) {
        const double s2 = sigma_(i) * sigma_(i);
        const double den = s2 + alpha;
        const double f = den > 0.0 ? alpha / den : 1.0;
        r2 += f * f * beta(i) * beta(i);
    }
    const double perp = orthogonal_residual(b);
    return std::sqrt(r2 + perp * perp);
}

double SpectralSolver::truncated_residual(const Eigen::VectorXd& b, double tau) const {
    const Eigen::VectorXd beta = project(b);
    double r2 = 0.0;
    for (Eigen::Index i = 0; i < sigma_.size(); ++i) {
        if (!(sigma_(i) > tau * sigma_(0))) r2 += beta(i) * beta(i);
    }
    const double perp = orthogonal_residual(b);
    return std::sqrt(r2 + perp * perp);
}

int SpectralSolver::tikhonov_rank(double alpha) const {
    int r = 0;
    const double floor = std::numeric_limits<double>::epsilon() * sigma_(0) * static_cast<double>(sigma_.size());
    for (Eigen::Index i = 0; i < sigma_.size(); ++i) {
        // filter factor sigma^2 / (sigma^2 + alpha) >= 1/2
        if (sigma_(i) > floor && sigma_(i) * sigma_(i) >= alpha) ++r;
    }
    return r;
}

int SpectralSolver::truncated_rank(double tau) const {
    int r = 0;
    for (Eigen::Index i = 0; i < sigma_.size(); ++i) {
        if (sigma_(i) > tau * sigma_(0)) ++r;
    }
    return r;
}

DiscrepancyResult pick_alpha_discrepancy(const SpectralSolver& svd, const Eigen::VectorXd& b, double delta) {
    if (!(delta > 0.0)) throw SolveError("discrepancy noise level must be positive");
    const double s2 = svd.sigma_max() * svd.sigma_max();
    const double target = delta * b.norm();
    auto residual = [&](double log_alpha) { return svd.tikhonov_residual(b, s2 * std::pow(10.0, log_alpha)); };

    DiscrepancyResult out;
    if (b.norm() == 0.0) {
        out.alpha = s2 * std::pow(10.0, log_alpha_lo);
        return out;
    }
    if (residual(log_alpha_lo) > target) {
        out.alpha = s2 * std::pow(10.0, log_alpha_lo);
        out.bracketed = false;
        out.flag = "discrepancy_below_floor";
        return out;
    }
    if (residual(log_alpha_hi) < target) {
        out.alpha = s2 * std::pow(10.0, log_alpha_hi);
        out.bracketed = false;
        out.flag = "discrepancy_above_ceiling";
        return out;
    }
    double lo = log_alpha_lo, hi = log_alpha_hi;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double r = residual(mid);
        if (std::abs(r - target) <= 1e-3 * target) {
            lo = hi = mid;
            break;
        }
        (r < target ? lo : hi) = mid;
    }
    out.alpha = s2 * std::pow(10.0, 0.5 * (lo + hi));
    return out;
}

double pick_alpha_discrepancy(const RegularizedSystem& sys, double delta) {
    const SpectralSolver svd(sys.matrix);
    return pick_alpha_discrepancy(svd, sys.rhs, delta).alpha;
}

double condition_estimate(const Eigen::MatrixXd& A) {
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(A);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) throw SolveError("condition_estimate: zero matrix");
    return capped_condition(s(0), s(s.size() - 1));
}

SolveResult solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const RegConfig& reg) {
    reg.validate();
    if (A.rows() != b.size()) throw SolveError("matrix rows do not match right-hand side length");
    if (!b.allFinite()) throw SolveError("right-hand side has non-finite entries");
    const SpectralSolver svd(A);
    const auto& s = svd.singular_values();

    SolveResult out;
    SolveReport& rep = out.report;
    const double smin = s(s.size() - 1);
    rep.condition_estimate = capped_condition(s(0), smin);

    if (reg.method == RegMethod::tsvd) {
        out.coefficients = svd.truncated(b, reg.tau);
        rep.residual_norm = svd.truncated_residual(b, reg.tau);
        rep.effective_rank = svd.truncated_rank(reg.tau);
        rep.alpha_used = reg.tau;
    } else {
        double alpha = reg.alpha.value_or(default_alpha_scale * s(0) * s(0));
        if (reg.discrepancy) {
            const auto pick = pick_alpha_discrepancy(svd, b, *reg.discrepancy);
            alpha = pick.alpha;
            if (!pick.bracketed) rep.flags.push_back(pick.flag);
        }
        // Unregularized solve of a numerically singular system: minimum-norm
        // solution, but worth reporting.
        if (alpha == 0.0 && !(smin > 0.0)) rep.flags.push_back("singular_matrix");
        out.coefficients = svd.tikhonov(b, alpha);
        rep.residual_norm = svd.tikhonov_residual(b, alpha);
        rep.effective_rank = svd.tikhonov_rank(alpha);
        rep.alpha_used = alpha;
    }
    rep.solution_norm = out.coefficients.norm();
    return out;
}

SolveResult solve(RegularizedSystem& sys) {
    SolveResult out = solve(sys.matrix, sys.rhs, sys.reg);
    sys.report = out.report;
    return out;
}

}  // namespace extsolve
