#pragma once

#include "extsolve/config.hpp"
#include "extsolve/problems.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace extsolve {

/// u(x) = Phi(x, z0) e for a fixed selector e. Solves L u = 0 away from z0.
class ManufacturedSolution {
public:
    ManufacturedSolution(OperatorSpec op, Point z0, Eigen::VectorXd selector);
    /// Unit selector for component `column`.
    ManufacturedSolution(OperatorSpec op, Point z0, int column);
    static ManufacturedSolution zero(OperatorSpec op, Point z0);

    const OperatorSpec& op() const { return op_; }
    const Point& source() const { return z0_; }

    Eigen::VectorXd value(const Point& x) const;
    PotentialField field(std::span<const Point> points) const;

    /// Throws DomainError unless z0 lies strictly outside b.
    void require_outside(const Boundary& b) const;

    LayerDensity dirichlet_trace(const BoundaryPtr& b) const;
    LayerDensity conormal_trace(const BoundaryPtr& b) const;
    CauchyData cauchy_data(const BoundaryPtr& b) const;

private:
    OperatorSpec op_;
    Point z0_;
    Eigen::VectorXd e_;
};

enum class ProblemKind { inner_dirichlet, continuation, cauchy, dirichlet_extension };

std::string to_string(ProblemKind k);

struct ProbeSet {
    std::string name;
    ShapeSpec shape;
    int line = 0;
};

/// Everything a run needs, resolved from a config file.
struct ExperimentConfig {
    OperatorSpec op = OperatorSpec::laplace2d();

    ShapeSpec inner;
    std::optional<ShapeSpec> middle;
    std::optional<ShapeSpec> outer;
    /// Probe boundary of the Cauchy probe reduction.
    std::optional<ShapeSpec> probe;

    ProblemKind problem = ProblemKind::inner_dirichlet;
    Method method = Method::mfs;
    Reduction reduction = Reduction::probe;
    SolverOptions solver;

    // data
    std::optional<Point> source;
    Eigen::VectorXd selector;
    bool zero_data = false;
    /// Tabulated boundary data, one row per inner node: k values of the
    /// Dirichlet trace, followed by k conormal values for Cauchy problems.
    std::vector<std::vector<double>> data_rows;
    std::string data_file;
    double noise = 0.0;
    std::uint64_t seed = 1;

    bool discrepancy = false;
    std::optional<double> discrepancy_delta;

    // studies
    std::vector<long> levels{8, 16, 32, 64};
    std::vector<double> noise_levels{1e-6, 1e-4, 1e-2};
    std::vector<double> radii{2.0, 3.0, 4.0};
    int oversample = 1;

    /// Named evaluation sets; defaults are filled in when none are declared.
    std::vector<ProbeSet> probes;

    bool timing = false;
    bool write_field = true;

    std::string source_name = "<config>";
    /// Header line of every section, for diagnostics raised while running.
    std::map<std::string, int> lines;

    static ExperimentConfig from(const ConfigFile& file);
    static ExperimentConfig load(const std::string& path);
};

/// One line of report.csv.
struct ReportRow {
    std::string study;
    long n = 0;
    long nodes = 0;
    double alpha = 0.0;
    double delta = 0.0;
    double inner_radius = 0.0;
    double middle_radius = 0.0;
    double outer_radius = 0.0;
    double residual_norm = 0.0;
    double solution_norm = 0.0;
    double condition_estimate = 0.0;
    long effective_rank = 0;
    double field_error = 0.0;
    double field_error_max = 0.0;
    double wall_time = 0.0;
    std::vector<std::string> flags;
};

/// Error of one row on one named probe set (probes.csv).
struct ProbeError {
    std::string study;
    long n = 0;
    double delta = 0.0;
    std::string probe;
    double relative_l2 = 0.0;
    double max_abs = 0.0;
};

struct RunResult {
    std::vector<ReportRow> rows;
    std::vector<ProbeError> probe_errors;
    /// Computed field of the last row on all probe sets.
    PotentialField field;

    bool flagged() const;
};

const std::vector<std::string>& report_columns();

RunResult run_solve(const ExperimentConfig& cfg);
RunResult run_convergence(const ExperimentConfig& cfg);
RunResult run_noise(const ExperimentConfig& cfg);
RunResult run_conditioning(const ExperimentConfig& cfg);

void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows);
void write_probe_csv(std::ostream& out, const std::vector<ProbeError>& rows);
void write_field_csv(std::ostream& out, const PotentialField& field, int dim);

/// Adds seeded Gaussian noise scaled so that ||noisy - clean|| = delta ||clean||.
/// Returns the achieved relative perturbation.
double add_noise(Eigen::VectorXd& values, double delta, std::uint64_t seed);

struct KernelCheck {
    std::string op;
    bool pass = false;
    double residual = 0.0;
    /// residual(h) / residual(h / 2), about 4 for a second-order stencil.
    double ratio = 0.0;
    std::string detail;
};

/// PDE residual of every kernel at 20 random points, its O(h^2) behavior and
/// the symmetry Phi(x, y) = Phi(y, x)^T.
std::vector<KernelCheck> check_kernels(std::uint64_t seed = 1);

/// Runs a subcommand end to end and writes CSVs into out_dir. Returns the
/// process exit status: 0 clean, 1 flagged, 2 usage or config error.
int run_command(const std::string& subcommand, const std::string& config_path, const std::string& out_dir,
                std::ostream& log, std::ostream& err);

}  // namespace extsolve
