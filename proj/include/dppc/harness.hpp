#pragma once

// Scenario runner: simulation, sampled report, margins, CSV/SVG output and the reproduction
// suite.

#include "dppc/feasibility.hpp"
#include "dppc/scenario.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace dppc {

struct ReportRow {
    double t = 0.0;
    std::vector<double> y;          // y_i(t)
    std::vector<double> yd;         // y_{d,i}(t)
    std::vector<double> raw;        // y_i(t) - y_{d,i}(t)
    std::vector<double> corrected;  // y_i(t-tau_s) - y_{d,i}(t-tau_s) + I_{i,1}(t)
    std::vector<double> psi1;       // psi_{i,1}(t-tau_s)
    std::vector<double> z;          // m*n row-major, NaN when the controller is off
    std::vector<double> I;          // m*n row-major
    std::vector<double> u;          // m
};

/// Stretch of grid times t at which the uncorrected delayed error left the original envelope,
/// |y_i(t - tau_s) - y_{d,i}(t - tau_s)| >= psi_{i,1}(t - tau_s).
struct ExitWindow {
    double t_begin;
    double t_end;
};

struct RunSummary {
    IntegrationStatus status = IntegrationStatus::Completed;
    double t_final = 0.0;
    long steps = 0;
    long grid_samples = 0;
    double min_margin = 0.0;  // over every grid sample
    double max_abs_z = 0.0;
    double max_u_norm = 0.0;
    double max_abs_I = 0.0;
    bool raw_inside = true;  // |y_i(t) - y_{d,i}(t)| < psi_{i,1}(t) at every grid sample
    std::vector<ExitWindow> raw_exit_windows;
    std::optional<FunnelViolation> violation;
    std::optional<EscapeReport> escape;
    double wall_seconds = 0.0;
};

struct RunReport {
    std::string scenario;
    int m = 1;
    int n = 1;
    double tau_s = 0.0;
    ControlMode mode = ControlMode::Corrected;
    std::vector<ReportRow> rows;
    RunSummary summary;
    std::optional<FeasibilityReport> feasibility;

    bool succeeded() const { return summary.status == IntegrationStatus::Completed; }
};

/// Simulates the scenario as configured (baseline_controller routes to run_baseline).
RunReport run(const Scenario& scenario);

/// Uncorrected law (I = 0) with the baseline gains when given, applied to delayed measurements.
RunReport run_baseline(const Scenario& scenario);

/// Assembles the closed loop a scenario describes.
ClosedLoop make_closed_loop(const Scenario& scenario);

struct MarginSummary {
    double min_margin;  // min over rows and i of psi_{i,1}(t-tau_s) - |corrected_i|
    double t_at_min;
    bool held;          // min_margin > 0
};

/// Margin over the report rows; n = 1 uses psi(t-tau_s) - ||corrected||.
MarginSummary funnel_margin(const RunReport& report);

/// Column names in output order.
std::vector<std::string> csv_header(int m, int n);
void write_csv(const RunReport& report, std::ostream& out);
/// Writes the rows to `path`; throws Error on I/O failure.
void emit_csv(const RunReport& report, const std::filesystem::path& path);

/// Self-contained SVG: raw and corrected error of output 1 against +-psi_{1,1}.
void emit_svg(const RunReport& report, const std::filesystem::path& path);

/// Summary as JSON.
std::string summary_json(const RunReport& report);

/// Exit code for a finished run: 0 success, 2 funnel violation, 3 escape.
int exit_code(const RunReport& report);

struct ReproductionCheck {
    std::string name;
    bool passed;
    std::string detail;
};

/// Runs the shipped scenarios from `scenario_dir` concurrently and evaluates the qualitative
/// outcomes (case 1, case 2, delay-free transparency, blow-up, baseline).
std::vector<ReproductionCheck> reproduce_suite(const std::filesystem::path& scenario_dir,
                                               const std::optional<std::filesystem::path>& out_dir);

}  // namespace dppc
