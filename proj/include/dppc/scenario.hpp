#pragma once

// Scenario files: a JSON object tree describing plant, delays, controller, reference and
// integration settings. Field reference: docs/scenario_schema.md.

#include "dppc/closed_loop.hpp"
#include "dppc/controller.hpp"
#include "dppc/plants.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dppc {

struct BaselineGains {
    Matrix k;
    double k_n = 1.0;
};

struct Scenario {
    std::string name;
    std::string plant;
    MassOnCarParams plant_params;
    std::vector<double> initial_state;  // constant physical history on [-tau_s - tau_u_bar, 0]
    DelaySpec delays;
    ControllerParams controller;
    ControlMode mode = ControlMode::Corrected;
    std::vector<ReferenceSignal> references;

    double t_end = 10.0;
    double h = 1e-3;
    int stride = 10;
    double tolerance = 1e-10;

    bool check_feasibility = false;
    bool record_margins = true;
    bool baseline_controller = false;
    std::optional<BaselineGains> baseline;

    /// Re-checks cross-field invariants (called by the loader and after CLI overrides).
    void validate() const;
};

/// Parses scenario text. `source` names the input in error messages.
/// Throws ConfigError: syntax errors carry line and column, schema errors the field path.
Scenario parse_scenario(const std::string& text, const std::string& source = "<scenario>");

/// Reads and parses a scenario file.
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace dppc
