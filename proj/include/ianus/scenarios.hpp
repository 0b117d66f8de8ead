#pragma once

#include <map>
#include <string>
#include <vector>

#include "ianus/engine.hpp"

namespace ianus {

struct ScenarioOptions {
    std::string out_dir = ".";
    std::vector<std::string> models; // empty = scenario default grid
    std::vector<int64_t> in_tokens;
    std::vector<int64_t> out_tokens;
    std::vector<int64_t> cores;      // sensitivity
    std::vector<int64_t> pim_chips;  // sensitivity
    std::vector<int64_t> devices;    // scaling
    bool regression = true;          // evaluate thresholds; off = explore mode
    std::string expectations_path;   // optional override of built-in thresholds
    HardwareConfig hw;               // base hardware
};

struct ScenarioCheck {
    std::string name;
    bool pass = false;
    double value = 0;
    std::string detail;
};

struct ScenarioResult {
    std::string scenario;
    std::vector<std::string> files;
    std::vector<ScenarioCheck> checks;
    bool passed() const;
};

std::vector<std::string> scenario_names();

// Runs one named scenario, writes its CSV/JSON outputs, and (in regression
// mode) evaluates the embedded thresholds. Throws on unknown names.
ScenarioResult run_scenario(const std::string& name, const ScenarioOptions& opts);

// Threshold table: built-in defaults, optionally overridden from a JSON file
// so the paper-derived tolerances stay reviewable in one place.
std::map<std::string, double> load_expectations(const std::string& path_or_empty);

} // namespace ianus
