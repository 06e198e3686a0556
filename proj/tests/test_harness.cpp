#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "extsolve/harness.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

using namespace extsolve;
namespace fs = std::filesystem;
using std::numbers::pi;

namespace {

const std::string data_dir = EXTSOLVE_TEST_DATA;

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("extsolve_harness_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(cells);
    }
    return rows;
}

// Column of report.csv by header name.
std::vector<double> column(const fs::path& report, const std::string& name) {
    const auto rows = read_csv(report);
    REQUIRE(!rows.empty());
    const auto& h = rows[0];
    const auto it = std::find(h.begin(), h.end(), name);
    REQUIRE(it != h.end());
    const auto c = static_cast<std::size_t>(it - h.begin());
    std::vector<double> out;
    for (std::size_t i = 1; i < rows.size(); ++i) out.push_back(std::stod(rows[i][c]));
    return out;
}

struct Run {
    int status;
    std::string log, err;
};
Run run(const std::string& cmd, const std::string& cfg, const fs::path& out) {
    std::ostringstream log, err;
    const int s = run_command(cmd, cfg.empty() ? "" : data_dir + "/" + cfg, out.string(), log, err);
    return {s, log.str(), err.str()};
}

ExperimentConfig parse(const std::string& text) {
    std::istringstream in(text);
    return ExperimentConfig::from(ConfigFile::parse(in, data_dir + "/inline.cfg"));
}

// Line reported for a broken config, or -1 when it parses.
int error_line(const std::string& text, std::string* msg = nullptr) {
    try {
        (void)parse(text);
    } catch (const ConfigError& e) {
        if (msg) *msg = e.what();
        return e.line();
    }
    return -1;
}

const std::string base_cfg = R"([operator]
kind = laplace2d

[geometry.inner]
radius = 1
nodes = 32

[geometry.outer]
radius = 3
nodes = 32

[problem]
method = mfs
sources = 16

[data]
source = 5, 0
)";

int exit_code(const std::string& args) {
    const int s = std::system((std::string(EXTSOLVE_CLI) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
}

}  // namespace

TEST_CASE("manufactured solutions") {
    const ManufacturedSolution l3(OperatorSpec::laplace3d(), Point(5, 0, 0), 0);
    CHECK(std::abs(l3.value(Point(1, 0, 0))(0) - 1.0 / (16 * pi)) < 1e-16);
    CHECK(std::abs(l3.value(Point(1, 0, 0))(0) - 0.019894368) < 1e-9);

    const auto sphere = Boundary::make(ShapeSpec::sphere(Point::Zero(), 1.0, 100));
    const auto z = ManufacturedSolution::zero(OperatorSpec::lame3d(1, 1), Point(5, 0, 0));
    CHECK(z.dirichlet_trace(sphere).values().cwiseAbs().maxCoeff() == 0.0);
    CHECK(z.conormal_trace(sphere).values().cwiseAbs().maxCoeff() == 0.0);

    // column 0 of the Kelvin solution solves the Lame system at x = (1, 0, 0)
    CHECK(pde_residual(OperatorSpec::lame3d(1, 1), Point(5, 0, 0), Point(1, 0, 0), 1e-3) < 1e-4);
    const ManufacturedSolution k0(OperatorSpec::lame3d(1, 1), Point(5, 0, 0), 0);
    CHECK((k0.value(Point(1, 0, 0)) - phi(OperatorSpec::lame3d(1, 1), Point(1, 0, 0), Point(5, 0, 0)).col(0)).norm() ==
          0.0);

    // traces: conormal trace of the Laplace point source against d/dn by differences
    const auto c = Boundary::make(ShapeSpec::circle(Point::Zero(), 1.0, 16));
    const ManufacturedSolution l2(OperatorSpec::laplace2d(), Point(3, 1, 0), 0);
    const auto u1 = l2.conormal_trace(c);
    for (std::size_t i = 0; i < c->size(); ++i) {
        const double h = 1e-5;
        const Point x = c->node(i), n = c->normal(i);
        const double fd = (l2.value(x + h * n)(0) - l2.value(x - h * n)(0)) / (2 * h);
        CHECK(std::abs(u1.at(i)(0) - fd) < 1e-8);
    }

    const auto big = Boundary::make(ShapeSpec::circle(Point::Zero(), 4.0, 16));
    CHECK_THROWS_AS(l2.dirichlet_trace(big), DomainError);
    CHECK_THROWS_AS(ManufacturedSolution(OperatorSpec::laplace2d(), Point(3, 0, 1), 0), GeometryError);
    CHECK_THROWS_AS(ManufacturedSolution(OperatorSpec::laplace3d(), Point(3, 0, 0), 1), OperatorError);
}

TEST_CASE("config parsing") {
    const ExperimentConfig cfg = parse(base_cfg);
    CHECK(cfg.op.kind() == OperatorKind::laplace2d);
    CHECK(cfg.method == Method::mfs);
    CHECK(cfg.solver.sources == 16);
    REQUIRE(cfg.source);
    CHECK(*cfg.source == Point(5, 0, 0));
    CHECK(cfg.oversample == 1);

    std::string msg;
    // unknown key, line-anchored
    CHECK(error_line(base_cfg + "colour = blue\n", &msg) == 18);
    CHECK(msg.find("inline.cfg:18:") != std::string::npos);
    CHECK(msg.find("colour") != std::string::npos);
    // value of the wrong type
    CHECK(error_line(std::string(base_cfg).replace(base_cfg.find("sources = 16"), 12, "sources = many")) == 14);
    // choice outside the allowed set
    CHECK(error_line(std::string(base_cfg).replace(base_cfg.find("method = mfs"), 12, "method = fem")) == 13);
    // missing '=' and keys outside sections
    CHECK(error_line("kind = laplace2d\n" + base_cfg) == 1);
    CHECK(error_line(base_cfg + "what\n") == 18);
    // duplicate key and duplicate section
    CHECK(error_line(base_cfg + "seed = 1\nseed = 2\n") == 19);
    CHECK(error_line(base_cfg + "[operator]\n") == 18);
    // unknown section
    CHECK(error_line(base_cfg + "[geometry.extra]\nradius = 2\n") == 18);
    CHECK(error_line(base_cfg + "[solver]\n") == 18);
    // unresolved reference: single layer without a middle shell
    CHECK(error_line(std::string(base_cfg).replace(base_cfg.find("method = mfs"), 12, "method = single-layer")) == 12);
    // manufactured source inside the solution domain
    CHECK(error_line(std::string(base_cfg).replace(base_cfg.find("source = 5, 0"), 13, "source = 2, 0")) == 17);
    // shells out of order, anchored in the geometry sections
    const int order = error_line(std::string(base_cfg).replace(base_cfg.find("radius = 3"), 10, "radius = 0.5"));
    CHECK(order >= 4);
    CHECK(order <= 10);
    // no data at all, anchored at [data]
    CHECK(error_line(std::string(base_cfg).replace(base_cfg.find("source = 5, 0"), 13, "seed = 3")) == 16);
    // helmholtz parameters are validated
    CHECK(error_line(std::string(base_cfg).replace(base_cfg.find("kind = laplace2d"), 16, "kind = helmholtz3d\na = 0")) > 0);
}

TEST_CASE("report schema is fixed") {
    std::ostringstream out;
    write_report_csv(out, {});
    CHECK(out.str() ==
          "study,N,nodes,alpha,delta,inner_radius,middle_radius,outer_radius,residual_norm,solution_norm,"
          "condition_estimate,effective_rank,field_error,field_error_max,wall_time,flags\n");

    ReportRow r;
    r.study = "solve";
    r.n = 3;
    r.field_error = 1.0 / 3.0;
    r.flags = {"a", "b"};
    std::ostringstream one;
    write_report_csv(one, {r});
    const std::string line = one.str().substr(one.str().find('\n') + 1);
    CHECK(line.find("3.333333333333333e-01") != std::string::npos);  // >= 12 significant digits
    CHECK(line.find(",a;b\n") != std::string::npos);

    std::ostringstream probes;
    write_probe_csv(probes, {});
    CHECK(probes.str() == "study,N,delta,probe,field_error,field_error_max\n");

    PotentialField f;
    f.points = {Point(1, 2, 3)};
    f.components = 3;
    f.values = Eigen::Vector3d(4, 5, 6);
    std::ostringstream fo;
    write_field_csv(fo, f, 3);
    const std::string text = fo.str();
    CHECK(text.substr(0, text.find('\n')) == "x,y,z,component,value");
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);
}

TEST_CASE("noise injection hits the requested level") {
    Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(50, -1.0, 2.0);
    const Eigen::VectorXd clean = v;
    for (double d : {1e-6, 1e-4, 1e-2, 0.5}) {
        v = clean;
        const double got = add_noise(v, d, 42);
        CHECK(std::abs(got - d) <= 1e-12 * std::max(1.0, d));
        CHECK(std::abs((v - clean).norm() / clean.norm() - d) <= 1e-12);
    }
    Eigen::VectorXd a = clean, b = clean;
    add_noise(a, 1e-3, 9);
    add_noise(b, 1e-3, 9);
    CHECK((a.array() == b.array()).all());
    b = clean;
    add_noise(b, 1e-3, 10);
    CHECK((a - b).norm() > 0.0);
    v = clean;
    CHECK(add_noise(v, 0.0, 1) == 0.0);
    CHECK((v.array() == clean.array()).all());
}

TEST_CASE("zero data give a zero field") {
    const auto out = scratch("zero");
    const auto r = run("solve", "zero_data.cfg", out);
    CHECK(r.status == 0);
    const auto rows = read_csv(out / "field.csv");
    REQUIRE(rows.size() > 1);
    CHECK(rows[0] == std::vector<std::string>{"x", "y", "component", "value"});
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(std::stod(rows[i][3]) == 0.0);
}

TEST_CASE("convergence study") {
    const auto out = scratch("conv");
    const auto r = run("study-convergence", "mfs_laplace2d.cfg", out);
    CHECK(r.status == 0);
    CHECK(column(out / "report.csv", "N") == std::vector<double>{8, 16, 32, 64});
    const auto err = column(out / "report.csv", "field_error");
    REQUIRE(err.size() == 4);
    for (std::size_t i = 1; i < err.size(); ++i) CHECK(err[i] < err[i - 1]);
    CHECK(err.back() < 1e-6);
    // wall time stays zero unless asked for, so reruns compare equal
    for (double t : column(out / "report.csv", "wall_time")) CHECK(t == 0.0);

    const auto probes = read_csv(out / "probes.csv");
    REQUIRE(probes.size() == 5);
    CHECK(probes[1][3] == "r2");
}

TEST_CASE("single-layer and Cauchy runs") {
    const auto sl = scratch("sl");
    CHECK(run("solve", "single_layer_laplace2d.cfg", sl).status == 0);
    CHECK(column(sl / "report.csv", "field_error_max")[0] < 1e-4);

    const auto ca = scratch("cauchy");
    CHECK(run("solve", "cauchy_laplace2d.cfg", ca).status == 0);
    CHECK(column(ca / "report.csv", "field_error_max")[0] < 1e-4);
}

TEST_CASE("noise study") {
    const auto out = scratch("noise");
    CHECK(run("study-noise", "cauchy_laplace2d.cfg", out).status == 0);
    const auto delta = column(out / "report.csv", "delta");
    const std::vector<double> want{1e-6, 1e-4, 1e-2};
    REQUIRE(delta.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(delta[i] - want[i]) <= 1e-12);
    const auto err = column(out / "report.csv", "field_error");
    for (std::size_t i = 1; i < err.size(); ++i) CHECK(err[i] >= err[i - 1]);
}

TEST_CASE("conditioning study") {
    const auto out = scratch("cond");
    CHECK(run("study-conditioning", "conditioning_laplace2d.cfg", out).status == 0);
    const auto cond = column(out / "report.csv", "condition_estimate");
    const auto radius = column(out / "report.csv", "outer_radius");
    REQUIRE(cond.size() == 3);
    CHECK(radius == std::vector<double>{2, 3, 4});
    for (std::size_t i = 1; i < cond.size(); ++i) CHECK(cond[i] > cond[i - 1]);
}

TEST_CASE("extension approach for Lame and tabulated data") {
    const auto lame = scratch("lame");
    CHECK(run("solve", "extension_lame3d.cfg", lame).status == 0);
    CHECK(column(lame / "report.csv", "field_error")[0] < 1e-4);
    CHECK(read_csv(lame / "field.csv")[0].size() == 5);

    // cos(theta) data: the harmonic extension is x on the default interior probe
    const auto tab = scratch("tab");
    CHECK(run("solve", "tabulated.cfg", tab).status == 0);
    const auto rows = read_csv(tab / "field.csv");
    REQUIRE(rows.size() > 1);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(std::abs(std::stod(rows[i][3]) - std::stod(rows[i][0])) < 1e-8);
    CHECK(std::isnan(column(tab / "report.csv", "field_error")[0]));
}

TEST_CASE("reruns are bytewise identical") {
    const auto a = scratch("det_a"), b = scratch("det_b");
    CHECK(run("study-noise", "cauchy_laplace2d.cfg", a).status == 0);
    CHECK(run("study-noise", "cauchy_laplace2d.cfg", b).status == 0);
    for (const char* f : {"report.csv", "probes.csv", "field.csv"}) {
        CAPTURE(f);
        CHECK(slurp(a / f) == slurp(b / f));
        CHECK(!slurp(a / f).empty());
    }
}

TEST_CASE("exit codes") {
    const auto out = scratch("codes");
    CHECK(run("bogus", "", out).status == 2);
    CHECK(run("solve", "", out).status == 2);
    CHECK(run("solve", "no_such_file.cfg", out).status == 2);

    const auto bad = scratch("bad_cfg");
    fs::create_directories(bad);
    {
        std::ofstream f(bad / "bad.cfg");
        f << base_cfg << "colour = blue\n";
    }
    std::ostringstream log, err;
    CHECK(run_command("solve", (bad / "bad.cfg").string(), out.string(), log, err) == 2);
    CHECK(err.str().find("bad.cfg:18:") != std::string::npos);

    // flagged results: a trace-extrapolation failure forced by a tiny tolerance
    {
        std::ofstream f(bad / "flagged.cfg");
        f << slurp(data_dir + "/cauchy_laplace2d.cfg") << "\n[potentials]\ntrace_tolerance = 1e-300\n";
    }
    std::string text = slurp(bad / "flagged.cfg");
    text.replace(text.find("reduction = probe"), 17, "reduction = pv");
    {
        std::ofstream f(bad / "flagged.cfg");
        f << text;
    }
    std::ostringstream l2, e2;
    CHECK(run_command("solve", (bad / "flagged.cfg").string(), (out / "flagged").string(), l2, e2) == 1);
    CHECK(slurp(out / "flagged" / "report.csv").find("trace_extrapolation") != std::string::npos);

    std::ostringstream kl, ke;
    CHECK(run_command("check-kernels", "", "", kl, ke) == 0);
    std::istringstream lines(kl.str());
    std::string line;
    int pass = 0;
    while (std::getline(lines, line)) pass += line.rfind("PASS ", 0) == 0;
    CHECK(pass == 4);
}

TEST_CASE("command line binary") {
    const auto out = scratch("cli");
    CHECK(exit_code("") == 2);
    CHECK(exit_code("frobnicate") == 2);
    CHECK(exit_code("solve") == 2);
    CHECK(exit_code("check-kernels") == 0);
    CHECK(exit_code("solve --config " + data_dir + "/zero_data.cfg --out " + out.string()) == 0);
    CHECK(fs::exists(out / "report.csv"));
    CHECK(exit_code("solve -c " + data_dir + "/missing.cfg -o " + out.string()) == 2);
}
