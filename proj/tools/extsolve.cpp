// extsolve: command line front end of the exterior extension solvers.
//
//   extsolve solve --config run.cfg --out results/
//   extsolve study-convergence --config run.cfg --out results/
//   extsolve check-kernels
//
// EXT_SOLVER_THREADS caps the worker threads.

#include "extsolve/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Exterior extension problems for strongly elliptic operators"};
    app.require_subcommand(1);

    std::string config, out;
    auto add = [&](const char* name, const char* help, bool needs_config) {
        CLI::App* sub = app.add_subcommand(name, help);
        auto* c = sub->add_option("-c,--config", config, "experiment config file");
        auto* o = sub->add_option("-o,--out", out, "output directory for the CSV files");
        if (needs_config) {
            c->required();
            o->required();
        }
        return sub;
    };
    add("solve", "solve the configured problem once", true);
    add("study-convergence", "refinement study over study.levels", true);
    add("study-noise", "noise stability study over study.noise", true);
    add("study-conditioning", "condition numbers over the source radii study.radii", true);
    add("check-kernels", "PDE residual and symmetry checks of every kernel", false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return 2;
    }

    const std::string cmd = app.get_subcommands().front()->get_name();
    return extsolve::run_command(cmd, config, out, std::cout, std::cerr);
}
