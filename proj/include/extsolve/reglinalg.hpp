#pragma once

#include "extsolve/kernels.hpp"

#include <Eigen/Core>
#include <Eigen/SVD>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace extsolve {

enum class RegMethod { tikhonov, tsvd };

struct RegConfig {
    RegMethod method = RegMethod::tikhonov;
    /// Tikhonov alpha (>= 0). Unset means 1e-24 * sigma_max^2, which damps
    /// singular values below about 1e-12 * sigma_max.
    std::optional<double> alpha;
    /// TSVD threshold relative to sigma_max, in (0, 1).
    double tau = 1e-10;
    /// Noise level for Morozov's discrepancy principle (Tikhonov only).
    std::optional<double> discrepancy;

    static RegConfig tikhonov_fixed(double alpha);
    static RegConfig truncated(double tau);
    static RegConfig morozov(double delta);
    void validate() const;
};

struct SolveReport {
    double residual_norm = 0.0;
    double solution_norm = 0.0;
    double condition_estimate = 0.0;
    int effective_rank = 0;
    double alpha_used = 0.0;
    std::vector<std::string> flags;

    bool flagged() const { return !flags.empty(); }
};

struct RegularizedSystem {
    Eigen::MatrixXd matrix;
    Eigen::VectorXd rhs;
    RegConfig reg;
    SolveReport report;
};

struct SolveResult {
    Eigen::VectorXd coefficients;
    SolveReport report;
};

enum class AssemblyMode { mfs, single_layer };

/// Dense collocation matrix with k x k blocks: row block i belongs to
/// targets[i], column block j to sources[j]. Single-layer mode multiplies
/// column block j by weights[j]; mfs mode ignores weights.
Eigen::MatrixXd assemble(const OperatorSpec& op, std::span<const Point> sources, std::span<const double> weights,
                         std::span<const Point> targets, AssemblyMode mode);

/// SVD of a fixed matrix, reused across regularization parameters.
class SpectralSolver {
public:
    explicit SpectralSolver(const Eigen::MatrixXd& A);

    const Eigen::VectorXd& singular_values() const { return sigma_; }
    double sigma_max() const { return sigma_.size() ? sigma_(0) : 0.0; }

    Eigen::VectorXd tikhonov(const Eigen::VectorXd& b, double alpha) const;
    Eigen::VectorXd truncated(const Eigen::VectorXd& b, double tau) const;

    /// ||A x_alpha - b|| evaluated through the filter factors.
    double tikhonov_residual(const Eigen::VectorXd& b, double alpha) const;
    double truncated_residual(const Eigen::VectorXd& b, double tau) const;

    int tikhonov_rank(double alpha) const;
    int truncated_rank(double tau) const;

private:
    Eigen::VectorXd project(const Eigen::VectorXd& b) const;
    double orthogonal_residual(const Eigen::VectorXd& b) const;

    Eigen::BDCSVD<Eigen::MatrixXd> svd_;
    Eigen::VectorXd sigma_;
};

struct DiscrepancyResult {
    double alpha = 0.0;
    bool bracketed = true;
    std::string flag;
};

/// Bisection on log alpha for ||A x_alpha - b|| = delta ||b|| (within 5%).
DiscrepancyResult pick_alpha_discrepancy(const SpectralSolver& svd, const Eigen::VectorXd& b, double delta);
double pick_alpha_discrepancy(const RegularizedSystem& sys, double delta);

/// sigma_max / sigma_min from a full SVD, capped at 1 / machine epsilon.
double condition_estimate(const Eigen::MatrixXd& A);

/// Solves sys in place (fills sys.report) and returns the coefficients.
SolveResult solve(RegularizedSystem& sys);
SolveResult solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const RegConfig& reg);

}  // namespace extsolve
