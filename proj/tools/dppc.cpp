#include "dppc/errors.hpp"
#include "dppc/harness.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>

namespace fs = std::filesystem;

namespace {

#ifndef DPPC_SCENARIO_DIR
#define DPPC_SCENARIO_DIR "scenarios"
#endif

fs::path output_dir(const std::string& flag) {
    if (!flag.empty()) {
        return flag;
    }
    if (const char* env = std::getenv("DPPC_OUT_DIR"); env && *env) {
        return env;
    }
    return "out";
}

int cmd_run(const std::string& file, const std::string& out_flag, std::optional<double> h,
            std::optional<double> t_end, bool baseline, bool feasibility, bool svg) {
    dppc::Scenario s = dppc::load_scenario(file);
    if (h) {
        s.h = *h;
    }
    if (t_end) {
        s.t_end = *t_end;
    }
    s.baseline_controller = s.baseline_controller || baseline;
    s.check_feasibility = s.check_feasibility || feasibility;
    s.validate();

    const dppc::RunReport r = s.baseline_controller ? dppc::run_baseline(s) : dppc::run(s);
    const fs::path dir = output_dir(out_flag);
    fs::create_directories(dir);
    const std::string stem = s.name + (s.baseline_controller && s.name.find("baseline") == std::string::npos
                                           ? "_baseline"
                                           : "");
    dppc::emit_csv(r, dir / (stem + ".csv"));
    if (svg && !r.rows.empty()) {
        dppc::emit_svg(r, dir / (stem + ".svg"));
    }
    std::cout << dppc::summary_json(r) << '\n';
    if (r.feasibility) {
        std::cerr << dppc::to_table(*r.feasibility);
    }
    return dppc::exit_code(r);
}

int cmd_feasibility(const std::string& file, bool json) {
    const dppc::Scenario s = dppc::load_scenario(file);
    const dppc::ClosedLoop cl = dppc::make_closed_loop(s);
    const dppc::FeasibilityReport rep =
        dppc::check_feasibility(dppc::feasibility_inputs(cl.plant(), cl.config(), cl.delays()));
    std::cout << (json ? dppc::to_json(rep) + "\n" : dppc::to_table(rep));
    return 0;
}

int cmd_reproduce(const std::string& dir, const std::string& out_flag) {
    const auto checks = dppc::reproduce_suite(dir, output_dir(out_flag));
    bool all = true;
    for (const auto& c : checks) {
        std::cout << (c.passed ? "PASS  " : "FAIL  ") << std::left << std::setw(48) << c.name
                  << c.detail << '\n';
        all = all && c.passed;
    }
    return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Delay-compensated prescribed performance control: scenario runner"};
    app.require_subcommand(1);

    std::string file;
    std::string out;
    std::optional<double> h;
    std::optional<double> t_end;
    bool baseline = false;
    bool feas = false;
    bool svg = false;
    auto* run = app.add_subcommand("run", "simulate one scenario, write CSV and print a summary");
    run->set_help_flag("--help", "print this help message and exit");
    run->add_option("scenario", file, "scenario JSON file")->required();
    run->add_option("--out", out, "output directory (default $DPPC_OUT_DIR or ./out)");
    run->add_option("--h", h, "override the integration step");
    run->add_option("--t-end", t_end, "override the final time");
    run->add_flag("--baseline", baseline, "use the uncorrected baseline controller");
    run->add_flag("--check-feasibility", feas, "evaluate the delay budget certificate too");
    run->add_flag("--svg", svg, "also write an error-vs-envelope SVG");

    bool json = false;
    auto* feasibility = app.add_subcommand("feasibility", "print the delay budget certificate");
    feasibility->add_option("scenario", file, "scenario JSON file")->required();
    feasibility->add_flag("--json", json, "structured output");

    std::string dir = DPPC_SCENARIO_DIR;
    auto* repro = app.add_subcommand("reproduce-paper", "run the shipped scenario suite");
    repro->add_option("--scenarios", dir, "directory holding the shipped scenarios");
    repro->add_option("--out", out, "output directory (default $DPPC_OUT_DIR or ./out)");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) {
            return cmd_run(file, out, h, t_end, baseline, feas, svg);
        }
        if (*feasibility) {
            return cmd_feasibility(file, json);
        }
        return cmd_reproduce(dir, out);
    } catch (const dppc::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
