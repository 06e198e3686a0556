#include "extsolve/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace extsolve {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// manufactured solution

ManufacturedSolution::ManufacturedSolution(OperatorSpec op, Point z0, Eigen::VectorXd selector)
    : op_(std::move(op)), z0_(std::move(z0)), e_(std::move(selector)) {
    if (e_.size() != op_.components()) throw OperatorError("selector length must match the operator components");
    if (op_.dim() == 2 && z0_.z() != 0.0) throw GeometryError("planar operator needs a source with z = 0");
}

namespace {

Eigen::VectorXd unit_selector(int k, int column) {
    if (column < 0 || column >= k) throw OperatorError("selector column out of range");
    Eigen::VectorXd e = Eigen::VectorXd::Zero(k);
    e(column) = 1.0;
    return e;
}

}  // namespace

ManufacturedSolution::ManufacturedSolution(OperatorSpec op, Point z0, int column)
    : ManufacturedSolution(op, std::move(z0), unit_selector(op.components(), column)) {}

ManufacturedSolution ManufacturedSolution::zero(OperatorSpec op, Point z0) {
    const int k = op.components();
    return ManufacturedSolution(std::move(op), std::move(z0), Eigen::VectorXd::Zero(k));
}

Eigen::VectorXd ManufacturedSolution::value(const Point& x) const { return phi(op_, x, z0_) * e_; }

PotentialField ManufacturedSolution::field(std::span<const Point> points) const {
    const int k = op_.components();
    PotentialField f;
    f.points.assign(points.begin(), points.end());
    f.components = k;
    f.values.resize(static_cast<Eigen::Index>(points.size()) * k);
    f.sides.assign(points.size(), Side::inside);
    for (std::size_t i = 0; i < points.size(); ++i) f.values.segment(static_cast<Eigen::Index>(i) * k, k) = value(points[i]);
    return f;
}

void ManufacturedSolution::require_outside(const Boundary& b) const {
    if (b.contains(z0_) != Containment::outside)
        throw DomainError("manufactured source lies inside or on a boundary where the solution is requested");
}

LayerDensity ManufacturedSolution::dirichlet_trace(const BoundaryPtr& b) const {
    require_outside(*b);
    return LayerDensity::sample(b, op_.components(), [&](const Point& x, const Point&) { return value(x); });
}

LayerDensity ManufacturedSolution::conormal_trace(const BoundaryPtr& b) const {
    require_outside(*b);
    return LayerDensity::sample(b, op_.components(), [&](const Point& x, const Point& n) {
        return Eigen::VectorXd(conormal_kernel_x(op_, x, n, z0_) * e_);
    });
}

CauchyData ManufacturedSolution::cauchy_data(const BoundaryPtr& b) const {
    return CauchyData{dirichlet_trace(b), conormal_trace(b)};
}

std::string to_string(ProblemKind k) {
    switch (k) {
    case ProblemKind::inner_dirichlet: return "inner-dirichlet";
    case ProblemKind::continuation: return "continuation";
    case ProblemKind::cauchy: return "cauchy";
    case ProblemKind::dirichlet_extension: return "dirichlet-extension";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// config

namespace {

using Section = ConfigFile::Section;

Point read_point(const Section& s, const std::string& key, int dim) {
    const auto v = s.get_doubles(key);
    if (static_cast<int>(v.size()) != dim && !(dim == 2 && v.size() == 3 && v[2] == 0.0))
        s.fail(key, "expected " + std::to_string(dim) + " coordinates");
    return Point(v[0], v[1], v.size() > 2 ? v[2] : 0.0);
}

double positive(const Section& s, const std::string& key, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) s.fail(key, "must be a positive number");
    return v;
}

std::vector<Triangle> load_mesh(const Section& s, const fs::path& base) {
    const fs::path file = base / s.get_string("file");
    std::ifstream in(file);
    if (!in) s.fail("file", "cannot open mesh file '" + file.string() + "'");
    try {
        return read_triangle_soup(in);
    } catch (const GeometryError& e) {
        s.fail("file", e.what());
    }
}

ShapeSpec read_shape(const Section& s, int dim, const fs::path& base) {
    const std::string kind = dim == 2 ? s.get_choice("kind", {"circle", "ellipse", "star"}, "circle")
                                      : s.get_choice("kind", {"sphere", "ellipsoid", "mesh"}, "sphere");
    const Point c = s.has("center") ? read_point(s, "center", dim) : Point::Zero();
    const long n = s.get_int("nodes", dim == 2 ? 128 : 400);
    if (kind != "mesh" && n < 4) s.fail("nodes", "need at least 4 nodes");
    const int nn = static_cast<int>(n);

    ShapeSpec spec;
    if (kind == "circle") {
        spec = ShapeSpec::circle(c, positive(s, "radius", s.get_double("radius")), nn);
    } else if (kind == "sphere") {
        spec = ShapeSpec::sphere(c, positive(s, "radius", s.get_double("radius")), nn);
    } else if (kind == "ellipse") {
        const auto r = s.get_doubles("radii");
        if (r.size() != 2) s.fail("radii", "ellipse needs two semi-axes");
        spec = ShapeSpec::ellipse(c, positive(s, "radii", r[0]), positive(s, "radii", r[1]), nn);
    } else if (kind == "ellipsoid") {
        const auto r = s.get_doubles("radii");
        if (r.size() != 3) s.fail("radii", "ellipsoid needs three semi-axes");
        spec = ShapeSpec::ellipsoid(c, positive(s, "radii", r[0]), positive(s, "radii", r[1]),
                                    positive(s, "radii", r[2]), nn);
    } else if (kind == "star") {
        const double r0 = positive(s, "radius", s.get_double("radius"));
        const double amp = s.get_double("amplitude", 0.2);
        if (!(amp >= 0.0 && amp < 1.0)) s.fail("amplitude", "must lie in [0, 1)");
        const long lobes = s.get_int("lobes", 5);
        if (lobes < 1) s.fail("lobes", "must be positive");
        spec = ShapeSpec::star(c, r0, amp, static_cast<int>(lobes), nn);
    } else {
        spec = ShapeSpec::mesh(load_mesh(s, base));
    }
    try {
        (void)Boundary::build(spec);
    } catch (const GeometryError& e) {
        s.fail("", e.what());
    }
    return spec;
}

std::vector<std::vector<double>> load_table(const Section& s, const fs::path& base) {
    const fs::path file = base / s.get_string("file");
    std::ifstream in(file);
    if (!in) s.fail("file", "cannot open data file '" + file.string() + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ss(line);
        std::vector<double> row;
        std::string tok;
        while (ss >> tok) {
            char* end = nullptr;
            const double v = std::strtod(tok.c_str(), &end);
            if (end != tok.c_str() + tok.size() || !std::isfinite(v))
                throw ConfigError(file.string(), lineno, "expected a finite number, got '" + tok + "'");
            row.push_back(v);
        }
        if (row.empty()) continue;
        if (!rows.empty() && row.size() != rows.front().size())
            throw ConfigError(file.string(), lineno, "row length differs from the first row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) s.fail("file", "data file has no rows");
    return rows;
}

}  // namespace

ExperimentConfig ExperimentConfig::from(const ConfigFile& file) {
    ExperimentConfig cfg;
    cfg.source_name = file.source();
    const fs::path base = fs::path(file.source()).parent_path();

    const auto known = std::vector<std::string>{"operator",      "geometry.inner", "geometry.middle", "geometry.outer",
                                                "geometry.probe", "problem",        "data",            "regularization",
                                                "potentials",    "study",          "output"};
    for (const auto& s : file.sections()) {
        if (s.name().rfind("probe.", 0) != 0 && std::find(known.begin(), known.end(), s.name()) == known.end())
            throw ConfigError(file.source(), s.line(), "unknown section [" + s.name() + "]");
    }

    // operator
    const Section& ops = file.section("operator");
    if (!file.has("operator")) throw ConfigError(file.source(), 0, "missing section [operator]");
    cfg.lines["operator"] = ops.line();
    const std::string kind = ops.get_choice("kind", {"laplace2d", "laplace3d", "helmholtz3d", "lame3d"}, "laplace2d");
    try {
        if (kind == "laplace2d") {
            cfg.op = OperatorSpec::laplace2d();
        } else if (kind == "laplace3d") {
            cfg.op = OperatorSpec::laplace3d();
        } else if (kind == "helmholtz3d") {
            const std::string br = ops.get_choice("branch", {"decaying", "growing"}, "decaying");
            cfg.op = OperatorSpec::helmholtz3d(ops.get_double("a", 1.0),
                                               br == "growing" ? HelmholtzBranch::growing : HelmholtzBranch::decaying);
        } else {
            cfg.op = OperatorSpec::lame3d(ops.get_double("mu", 1.0), ops.get_double("lambda", 1.0));
        }
    } catch (const OperatorError& e) {
        ops.fail("", e.what());
    }
    const int dim = cfg.op.dim();
    const int k = cfg.op.components();

    // geometry
    if (!file.has("geometry.inner")) throw ConfigError(file.source(), 0, "missing section [geometry.inner]");
    auto shape_of = [&](const std::string& name) -> std::optional<ShapeSpec> {
        if (!file.has(name)) return std::nullopt;
        cfg.lines[name] = file.section(name).line();
        return read_shape(file.section(name), dim, base);
    };
    cfg.inner = *shape_of("geometry.inner");
    cfg.middle = shape_of("geometry.middle");
    cfg.outer = shape_of("geometry.outer");
    cfg.probe = shape_of("geometry.probe");

    // problem
    const Section& pr = file.section("problem");
    cfg.lines["problem"] = pr.line();
    const std::string pk =
        pr.get_choice("kind", {"inner-dirichlet", "continuation", "cauchy", "dirichlet-extension"}, "inner-dirichlet");
    cfg.problem = pk == "inner-dirichlet" ? ProblemKind::inner_dirichlet
                  : pk == "continuation"  ? ProblemKind::continuation
                  : pk == "cauchy"        ? ProblemKind::cauchy
                                          : ProblemKind::dirichlet_extension;
    cfg.method = pr.get_choice("method", {"mfs", "single-layer"}, "mfs") == "mfs" ? Method::mfs : Method::single_layer;
    const std::string red = pr.get_choice("reduction", {"probe", "pv", "hat"}, "probe");
    cfg.reduction = red == "probe" ? Reduction::probe : red == "pv" ? Reduction::pv : Reduction::hat;
    const long n_src = pr.get_int("sources", 64);
    if (n_src < 1) pr.fail("sources", "must be positive");
    cfg.solver.sources = static_cast<std::size_t>(n_src);
    cfg.solver.exclusion_factor = pr.get_double("exclusion_factor", cfg.solver.exclusion_factor);
    cfg.solver.probe_scale = pr.get_double("probe_scale", cfg.solver.probe_scale);
    if (!(cfg.solver.probe_scale > 0.0 && cfg.solver.probe_scale < 1.0))
        pr.fail("probe_scale", "must lie in (0, 1)");
    if (cfg.solver.exclusion_factor < 0.0) pr.fail("exclusion_factor", "must be nonnegative");

    // references between sections
    auto need = [&](const std::optional<ShapeSpec>& s, const std::string& what, const std::string& why) {
        if (!s) pr.fail("", why + " needs section [" + what + "]");
    };
    const bool extension = cfg.problem == ProblemKind::dirichlet_extension;
    if (cfg.method == Method::mfs) need(cfg.outer, "geometry.outer", "the mfs method");
    if (cfg.method == Method::single_layer) need(cfg.middle, "geometry.middle", "the single-layer method");
    if (cfg.problem == ProblemKind::cauchy) need(cfg.middle, "geometry.middle", "the cauchy problem");
    if (cfg.probe && cfg.problem != ProblemKind::cauchy)
        throw ConfigError(file.source(), cfg.lines["geometry.probe"],
                          "[geometry.probe] is only used by the cauchy problem");
    if (!extension) {
        try {
            const auto b = [](const std::optional<ShapeSpec>& s) { return s ? Boundary::make(*s) : nullptr; };
            DomainLayout(Boundary::make(cfg.inner), b(cfg.middle), b(cfg.outer), b(cfg.probe));
        } catch (const GeometryError& e) {
            throw ConfigError(file.source(), cfg.lines["geometry.inner"], e.what());
        }
    } else {
        try {
            const auto inner = Boundary::make(cfg.inner);
            const auto& v = cfg.method == Method::mfs ? *cfg.outer : *cfg.middle;
            if (!nested_inside(*inner, *Boundary::make(v)))
                throw GeometryError("the virtual boundary must embrace the inner boundary");
        } catch (const GeometryError& e) {
            throw ConfigError(file.source(), cfg.lines["geometry.inner"], e.what());
        }
    }

    // data
    const Section& data = file.section("data");
    cfg.lines["data"] = data.line();
    cfg.zero_data = data.get_bool("zero", false);
    if (data.has("source")) cfg.source = read_point(data, "source", dim);
    if (data.has("file")) {
        if (cfg.source) data.fail("file", "give either a manufactured source or a data file, not both");
        cfg.data_file = data.get_string("file");
        cfg.data_rows = load_table(data, base);
        const std::size_t width = cfg.problem == ProblemKind::cauchy ? 2 * k : k;
        if (cfg.data_rows.front().size() != width)
            data.fail("file", "expected " + std::to_string(width) + " values per row");
    }
    if (!cfg.source && cfg.data_rows.empty() && !cfg.zero_data)
        throw ConfigError(file.source(), data.line(), "[data] needs source, file or zero = true");
    const long column = data.get_int("column", 0);
    if (column < 0 || column >= k) data.fail("column", "must lie in [0, " + std::to_string(k) + ")");
    cfg.selector = Eigen::VectorXd::Zero(k);
    if (!cfg.zero_data) cfg.selector(column) = 1.0;
    cfg.noise = data.get_double("noise", 0.0);
    if (!(cfg.noise >= 0.0) || !std::isfinite(cfg.noise)) data.fail("noise", "must be a nonnegative number");
    const long seed = data.get_int("seed", 1);
    if (seed < 0) data.fail("seed", "must be nonnegative");
    cfg.seed = static_cast<std::uint64_t>(seed);
    if (cfg.source) {
        const ManufacturedSolution ms(cfg.op, *cfg.source, cfg.selector);
        try {
            if (extension) {
                ms.require_outside(*Boundary::make(cfg.inner));
            } else {
                ms.require_outside(*Boundary::make(cfg.middle ? *cfg.middle : *cfg.outer));
            }
        } catch (const DomainError& e) {
            data.fail("source", e.what());
        }
    }

    // regularization
    const Section& reg = file.section("regularization");
    cfg.lines["regularization"] = reg.line();
    const std::string rm = reg.get_choice("method", {"tikhonov", "tsvd"}, "tikhonov");
    if (rm == "tsvd") {
        cfg.solver.reg = RegConfig::truncated(reg.get_double("tau", 1e-10));
    } else if (reg.has("alpha")) {
        cfg.solver.reg = RegConfig::tikhonov_fixed(reg.get_double("alpha"));
    }
    const std::string sel = reg.get_choice("selection", {"fixed", "discrepancy"}, "fixed");
    cfg.discrepancy = sel == "discrepancy";
    if (cfg.discrepancy && rm == "tsvd") reg.fail("selection", "discrepancy selection needs tikhonov");
    if (reg.has("delta")) {
        if (!cfg.discrepancy) reg.fail("delta", "only used with selection = discrepancy");
        cfg.discrepancy_delta = positive(reg, "delta", reg.get_double("delta"));
    }
    try {
        cfg.solver.reg.validate();
    } catch (const SolveError& e) {
        reg.fail(rm == "tsvd" ? "tau" : "alpha", e.what());
    }

    // potentials
    const Section& pot = file.section("potentials");
    cfg.solver.potentials.offset_factor =
        positive(pot, "offset_factor", pot.get_double("offset_factor", cfg.solver.potentials.offset_factor));
    cfg.solver.potentials.near_field_factor =
        positive(pot, "near_field_factor", pot.get_double("near_field_factor", cfg.solver.potentials.near_field_factor));
    cfg.solver.potentials.trace_tolerance =
        positive(pot, "trace_tolerance", pot.get_double("trace_tolerance", cfg.solver.potentials.trace_tolerance));

    // study
    const Section& st = file.section("study");
    if (st.has("levels")) cfg.levels = st.get_ints("levels");
    for (long l : cfg.levels) {
        if (l < 1) st.fail("levels", "levels must be positive");
    }
    if (st.has("noise")) cfg.noise_levels = st.get_doubles("noise");
    for (double d : cfg.noise_levels) {
        if (!(d >= 0.0)) st.fail("noise", "noise levels must be nonnegative");
    }
    if (st.has("radii")) cfg.radii = st.get_doubles("radii");
    for (double r : cfg.radii) positive(st, "radii", r);
    cfg.oversample = static_cast<int>(st.get_int("oversample", cfg.oversample));
    if (cfg.oversample < 0) st.fail("oversample", "must be nonnegative");

    // probes
    for (const auto* s : file.sections_with_prefix("probe")) {
        const std::string name = s->name().substr(6);
        if (name.empty() || name.find('.') != std::string::npos)
            throw ConfigError(file.source(), s->line(), "probe sections are named [probe.NAME]");
        cfg.probes.push_back(ProbeSet{name, read_shape(*s, dim, base), s->line()});
        cfg.lines[s->name()] = s->line();
    }

    // output
    const Section& out = file.section("output");
    cfg.timing = out.get_bool("timing", false);
    cfg.write_field = out.get_bool("field", true);

    for (const auto& name : known) cfg.lines.emplace(name, file.section(name).line());
    file.reject_unused();
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) { return from(ConfigFile::load(path)); }

// ---------------------------------------------------------------------------
// running

namespace {

double shell_radius(const ShapeSpec& s) {
    switch (s.kind) {
    case BoundaryKind::circle:
    case BoundaryKind::sphere: return s.radii[0];
    case BoundaryKind::ellipse:
    case BoundaryKind::ellipsoid: return *std::max_element(s.radii.begin(), s.radii.end());
    case BoundaryKind::star: return s.radii[0] * (1.0 + s.radii[1]);
    case BoundaryKind::triangulated: return 0.5 * Boundary::build(s).diameter();
    }
    return 0.0;
}

ShapeSpec scale_shape(const ShapeSpec& s, double f) { return Boundary::build(s).scaled(f).shape(); }

ShapeSpec with_nodes(const ShapeSpec& s, long n) {
    ShapeSpec out = s;
    if (out.kind != BoundaryKind::triangulated) out.n_nodes = static_cast<int>(n);
    return out;
}

[[noreturn]] void config_fail(const ExperimentConfig& cfg, const std::string& section, const std::string& msg) {
    const auto it = cfg.lines.find(section);
    throw ConfigError(cfg.source_name, it == cfg.lines.end() ? 0 : it->second, msg);
}

// Probe sets of a run: declared ones, else one set halfway across the domain.
std::vector<ProbeSet> probe_sets(const ExperimentConfig& cfg) {
    if (!cfg.probes.empty()) return cfg.probes;
    if (cfg.problem == ProblemKind::dirichlet_extension) return {ProbeSet{"interior", scale_shape(cfg.inner, 0.5), 0}};
    const ShapeSpec& container = cfg.middle ? *cfg.middle : *cfg.outer;
    const double f = 0.5 * (1.0 + shell_radius(container) / shell_radius(cfg.inner));
    return {ProbeSet{"mid", scale_shape(cfg.inner, f), 0}};
}

LayerDensity table_density(const ExperimentConfig& cfg, const BoundaryPtr& b, std::size_t offset) {
    const int k = cfg.op.components();
    if (cfg.data_rows.size() != b->size())
        config_fail(cfg, "data",
                    "data file has " + std::to_string(cfg.data_rows.size()) + " rows but the inner boundary has " +
                        std::to_string(b->size()) + " nodes");
    Eigen::VectorXd v(static_cast<Eigen::Index>(b->size()) * k);
    for (std::size_t i = 0; i < b->size(); ++i) {
        for (int c = 0; c < k; ++c) v(static_cast<Eigen::Index>(i) * k + c) = cfg.data_rows[i][offset + c];
    }
    return LayerDensity(b, k, std::move(v));
}

struct PointOutcome {
    ReportRow row;
    std::vector<ProbeError> probes;
    PotentialField field;
};

PointOutcome solve_point(const ExperimentConfig& cfg, const std::string& study, double noise) {
    const auto t0 = std::chrono::steady_clock::now();
    const OperatorSpec& op = cfg.op;
    const int k = op.components();

    const BoundaryPtr inner = Boundary::make(cfg.inner);
    const BoundaryPtr middle = cfg.middle ? Boundary::make(*cfg.middle) : nullptr;
    const BoundaryPtr outer = cfg.outer ? Boundary::make(*cfg.outer) : nullptr;
    const BoundaryPtr probe = cfg.probe ? Boundary::make(*cfg.probe) : nullptr;

    std::optional<ManufacturedSolution> exact;
    if (cfg.source) exact.emplace(op, *cfg.source, cfg.selector);
    const bool zero = cfg.zero_data && !cfg.source;

    SolverOptions opts = cfg.solver;
    double achieved = 0.0;
    auto perturb = [&](LayerDensity d) {
        Eigen::VectorXd v = d.values();
        achieved = add_noise(v, noise, cfg.seed);
        return LayerDensity(d.boundary_ptr(), k, std::move(v));
    };
    auto trace = [&](std::size_t offset, bool conormal) {
        if (!cfg.data_rows.empty()) return table_density(cfg, inner, offset);
        if (zero) return LayerDensity::zeros(inner, k);
        return conormal ? exact->conormal_trace(inner) : exact->dirichlet_trace(inner);
    };

    std::optional<ExtensionSolution> sol;
    if (cfg.problem == ProblemKind::cauchy) {
        CauchyData data{perturb(trace(0, false)), trace(static_cast<std::size_t>(k), true)};
        if (cfg.discrepancy) {
            const double d = cfg.discrepancy_delta.value_or(achieved);
            if (d > 0.0) opts.reg.discrepancy = d;
        }
        sol.emplace(solve_cauchy(op, DomainLayout(inner, middle, outer, probe), data, cfg.reduction, cfg.method, opts));
    } else {
        const LayerDensity f = perturb(trace(0, false));
        if (cfg.discrepancy) {
            const double d = cfg.discrepancy_delta.value_or(achieved);
            if (d > 0.0) opts.reg.discrepancy = d;
        }
        if (cfg.problem == ProblemKind::dirichlet_extension) {
            sol.emplace(dirichlet_by_extension(op, inner, cfg.method == Method::mfs ? outer : middle, f, cfg.method,
                                               opts));
        } else if (cfg.problem == ProblemKind::continuation) {
            sol.emplace(continue_solution(op, DomainLayout(inner, middle, outer), f, cfg.method, opts));
        } else {
            sol.emplace(solve_inner_dirichlet(op, DomainLayout(inner, middle, outer), f, cfg.method, opts));
        }
    }

    PointOutcome out;
    ReportRow& row = out.row;
    row.study = study;
    row.n = cfg.method == Method::mfs ? static_cast<long>(opts.sources) : static_cast<long>(middle->size());
    row.nodes = static_cast<long>(inner->size());
    row.alpha = sol->report().alpha_used;
    row.delta = achieved;
    row.inner_radius = shell_radius(cfg.inner);
    row.middle_radius = cfg.middle ? shell_radius(*cfg.middle) : 0.0;
    row.outer_radius = cfg.outer ? shell_radius(*cfg.outer) : 0.0;
    row.residual_norm = sol->report().residual_norm;
    row.solution_norm = sol->report().solution_norm;
    row.condition_estimate = sol->report().condition_estimate;
    row.effective_rank = sol->report().effective_rank;
    row.flags = sol->flags();

    // field on the probe sets
    double err2 = 0.0, ref2 = 0.0, errmax = 0.0;
    bool have_oracle = exact.has_value() || zero;
    bool near = false;
    out.field.components = k;
    std::vector<double> all_values;
    for (const auto& ps : probe_sets(cfg)) {
        const BoundaryPtr pb = Boundary::make(ps.shape);
        const auto& pts = pb->quadrature().nodes;
        if (exact) {
            try {
                exact->require_outside(*pb);
            } catch (const DomainError& e) {
                config_fail(cfg, ps.line ? "probe." + ps.name : "data", "probe set '" + ps.name + "': " + e.what());
            }
        }
        PotentialField f;
        try {
            f = sol->evaluate(pts);
        } catch (const DomainError& e) {
            config_fail(cfg, ps.line ? "probe." + ps.name : "problem",
                        "probe set '" + ps.name + "' leaves the solution domain: " + e.what());
        }
        if (f.near_singular()) near = true;
        Eigen::VectorXd ref = Eigen::VectorXd::Zero(f.values.size());
        if (exact) ref = exact->field(pts).values;
        ProbeError pe{study, row.n, achieved, ps.name, std::numeric_limits<double>::quiet_NaN(),
                      std::numeric_limits<double>::quiet_NaN()};
        if (have_oracle) {
            const Eigen::VectorXd diff = f.values - ref;
            pe.relative_l2 = ref.norm() > 0.0 ? diff.norm() / ref.norm() : diff.norm();
            pe.max_abs = diff.cwiseAbs().maxCoeff();
            err2 += diff.squaredNorm();
            ref2 += ref.squaredNorm();
            errmax = std::max(errmax, pe.max_abs);
        }
        out.probes.push_back(pe);
        out.field.points.insert(out.field.points.end(), pts.begin(), pts.end());
        all_values.insert(all_values.end(), f.values.data(), f.values.data() + f.values.size());
    }
    out.field.values = Eigen::Map<Eigen::VectorXd>(all_values.data(), static_cast<Eigen::Index>(all_values.size()));
    out.field.sides.assign(out.field.points.size(), Side::inside);
    if (have_oracle) {
        row.field_error = ref2 > 0.0 ? std::sqrt(err2 / ref2) : std::sqrt(err2);
        row.field_error_max = errmax;
    } else {
        row.field_error = row.field_error_max = std::numeric_limits<double>::quiet_NaN();
    }
    if (near) row.flags.push_back("probe_near_boundary");
    if (cfg.timing) row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

void append(RunResult& r, PointOutcome&& p) {
    r.rows.push_back(std::move(p.row));
    r.probe_errors.insert(r.probe_errors.end(), p.probes.begin(), p.probes.end());
    r.field = std::move(p.field);
}

}  // namespace

bool RunResult::flagged() const {
    return std::any_of(rows.begin(), rows.end(), [](const ReportRow& r) { return !r.flags.empty(); });
}

RunResult run_solve(const ExperimentConfig& cfg) {
    RunResult r;
    append(r, solve_point(cfg, "solve", cfg.noise));
    return r;
}

RunResult run_convergence(const ExperimentConfig& cfg) {
    RunResult r;
    for (long n : cfg.levels) {
        ExperimentConfig c = cfg;
        if (cfg.method == Method::mfs) {
            c.solver.sources = static_cast<std::size_t>(n);
        } else {
            c.middle = with_nodes(*cfg.middle, n);
        }
        // Data live on the inner nodes; Cauchy data and tabulated data are fixed.
        if (cfg.oversample > 0 && cfg.problem != ProblemKind::cauchy && cfg.data_rows.empty())
            c.inner = with_nodes(cfg.inner, cfg.oversample * n);
        append(r, solve_point(c, "convergence", cfg.noise));
    }
    return r;
}

RunResult run_noise(const ExperimentConfig& cfg) {
    RunResult r;
    for (double d : cfg.noise_levels) append(r, solve_point(cfg, "noise", d));
    return r;
}

RunResult run_conditioning(const ExperimentConfig& cfg) {
    RunResult r;
    const bool mfs = cfg.method == Method::mfs;
    const ShapeSpec& swept = mfs ? *cfg.outer : *cfg.middle;
    const double r0 = shell_radius(swept);
    for (double radius : cfg.radii) {
        ExperimentConfig c = cfg;
        const ShapeSpec s = scale_shape(swept, radius / r0);
        (mfs ? c.outer : c.middle) = s;
        try {
            if (!nested_inside(*Boundary::make(c.inner), *Boundary::make(s)))
                throw GeometryError("swept boundary of radius " + std::to_string(radius) +
                                    " does not embrace the inner boundary");
            if (c.middle && c.outer && !nested_inside(*Boundary::make(*c.middle), *Boundary::make(*c.outer)))
                throw GeometryError("swept radius " + std::to_string(radius) + " breaks the shell nesting");
            if (c.source) ManufacturedSolution(c.op, *c.source, c.selector).require_outside(*Boundary::make(s));
        } catch (const std::exception& e) {
            config_fail(cfg, "study", e.what());
        }
        append(r, solve_point(c, "conditioning", cfg.noise));
    }
    return r;
}

// ---------------------------------------------------------------------------
// output

const std::vector<std::string>& report_columns() {
    static const std::vector<std::string> cols{"study",         "N",
                                               "nodes",         "alpha",
                                               "delta",         "inner_radius",
                                               "middle_radius", "outer_radius",
                                               "residual_norm", "solution_norm",
                                               "condition_estimate", "effective_rank",
                                               "field_error",   "field_error_max",
                                               "wall_time",     "flags"};
    return cols;
}

namespace {

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.15e", v);
    return buf;
}

std::string join(const std::vector<std::string>& v, char sep) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : std::string(1, sep)) + x;
    return s;
}

}  // namespace

void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
    out << join(report_columns(), ',') << '\n';
    for (const auto& r : rows) {
        out << r.study << ',' << r.n << ',' << r.nodes << ',' << num(r.alpha) << ',' << num(r.delta) << ','
            << num(r.inner_radius) << ',' << num(r.middle_radius) << ',' << num(r.outer_radius) << ','
            << num(r.residual_norm) << ',' << num(r.solution_norm) << ',' << num(r.condition_estimate) << ','
            << r.effective_rank << ',' << num(r.field_error) << ',' << num(r.field_error_max) << ','
            << num(r.wall_time) << ',' << join(r.flags, ';') << '\n';
    }
}

void write_probe_csv(std::ostream& out, const std::vector<ProbeError>& rows) {
    out << "study,N,delta,probe,field_error,field_error_max\n";
    for (const auto& r : rows) {
        out << r.study << ',' << r.n << ',' << num(r.delta) << ',' << r.probe << ',' << num(r.relative_l2) << ','
            << num(r.max_abs) << '\n';
    }
}

void write_field_csv(std::ostream& out, const PotentialField& field, int dim) {
    out << (dim == 2 ? "x,y,component,value\n" : "x,y,z,component,value\n");
    for (std::size_t i = 0; i < field.points.size(); ++i) {
        const Point& p = field.points[i];
        for (int c = 0; c < field.components; ++c) {
            out << num(p.x()) << ',' << num(p.y()) << ',';
            if (dim == 3) out << num(p.z()) << ',';
            out << c << ',' << num(field.values(static_cast<Eigen::Index>(i) * field.components + c)) << '\n';
        }
    }
}

double add_noise(Eigen::VectorXd& values, double delta, std::uint64_t seed) {
    const double base = values.norm();
    if (delta == 0.0 || base == 0.0 || values.size() == 0) return 0.0;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd g(values.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = gauss(rng);
    g *= delta * base / g.norm();
    const Eigen::VectorXd clean = values;
    values += g;
    return (values - clean).norm() / base;
}

// ---------------------------------------------------------------------------
// kernel checks

std::vector<KernelCheck> check_kernels(std::uint64_t seed) {
    const std::vector<OperatorSpec> ops{OperatorSpec::laplace2d(), OperatorSpec::laplace3d(),
                                        OperatorSpec::helmholtz3d(1.0), OperatorSpec::lame3d(1.0, 1.0)};
    std::vector<KernelCheck> out;
    for (const auto& op : ops) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::uniform_real_distribution<double> dist(0.5, 2.0);
        KernelCheck kc;
        kc.op = op.name();
        double r1 = 0.0, r2 = 0.0, asym = 0.0;
        for (int i = 0; i < 20; ++i) {
            Point y(u(rng), u(rng), op.dim() == 3 ? u(rng) : 0.0);
            Point d(u(rng), u(rng), op.dim() == 3 ? u(rng) : 0.0);
            if (d.norm() < 1e-3) d = Point(1.0, 0.0, 0.0);
            const Point x = y + dist(rng) * d.normalized();
            r1 = std::max(r1, pde_residual(op, y, x, 1e-3));
            r2 = std::max(r2, pde_residual(op, y, x, 5e-4));
            const KernelValue a = phi(op, x, y);
            const KernelValue b = phi(op, y, x).transpose();
            asym = std::max(asym, (a - b).cwiseAbs().maxCoeff() / a.cwiseAbs().maxCoeff());
        }
        kc.residual = r1;
        kc.ratio = r2 > 0.0 ? r1 / r2 : std::numeric_limits<double>::infinity();
        kc.pass = r1 < 1e-4 && kc.ratio > 3.0 && kc.ratio < 5.0 && asym < 1e-14;
        char buf[160];
        std::snprintf(buf, sizeof buf, "residual=%.3e ratio=%.3f symmetry=%.1e", r1, kc.ratio, asym);
        kc.detail = buf;
        out.push_back(kc);
    }
    return out;
}

// ---------------------------------------------------------------------------
// command

int run_command(const std::string& subcommand, const std::string& config_path, const std::string& out_dir,
                std::ostream& log, std::ostream& err) {
    static const std::vector<std::string> commands{"solve", "study-convergence", "study-noise", "study-conditioning",
                                                   "check-kernels"};
    if (std::find(commands.begin(), commands.end(), subcommand) == commands.end()) {
        err << "unknown subcommand '" << subcommand << "' (expected one of: " << join(commands, ' ') << ")\n";
        return 2;
    }
    try {
        if (subcommand == "check-kernels") {
            std::uint64_t seed = 1;
            if (!config_path.empty()) seed = ExperimentConfig::load(config_path).seed;
            bool ok = true;
            for (const auto& kc : check_kernels(seed)) {
                log << (kc.pass ? "PASS " : "FAIL ") << kc.op << ' ' << kc.detail << '\n';
                ok = ok && kc.pass;
            }
            return ok ? 0 : 1;
        }
        if (config_path.empty()) {
            err << subcommand << " needs --config\n";
            return 2;
        }
        if (out_dir.empty()) {
            err << subcommand << " needs --out\n";
            return 2;
        }
        const ExperimentConfig cfg = ExperimentConfig::load(config_path);
        RunResult res;
        if (subcommand == "solve") res = run_solve(cfg);
        if (subcommand == "study-convergence") res = run_convergence(cfg);
        if (subcommand == "study-noise") res = run_noise(cfg);
        if (subcommand == "study-conditioning") res = run_conditioning(cfg);

        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec) {
            err << "cannot create output directory '" << out_dir << "': " << ec.message() << '\n';
            return 2;
        }
        auto open = [&](const std::string& name) {
            std::ofstream f(fs::path(out_dir) / name, std::ios::binary);
            if (!f) throw std::runtime_error("cannot write " + (fs::path(out_dir) / name).string());
            return f;
        };
        {
            auto f = open("report.csv");
            write_report_csv(f, res.rows);
        }
        {
            auto f = open("probes.csv");
            write_probe_csv(f, res.probe_errors);
        }
        if (cfg.write_field) {
            auto f = open("field.csv");
            write_field_csv(f, res.field, cfg.op.dim());
        }
        for (const auto& r : res.rows) {
            log << r.study << " N=" << r.n << " field_error=" << num(r.field_error)
                << (r.flags.empty() ? "" : " flags=" + join(r.flags, ';')) << '\n';
        }
        return res.flagged() ? 1 : 0;
    } catch (const ConfigError& e) {
        err << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace extsolve
