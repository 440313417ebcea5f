#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "cyl/config.hpp"
#include "cyl/report.hpp"

namespace cyl {

// One pass/fail line. criterion > 0 refers to the numbered acceptance list;
// 0 marks a suite-internal check.
struct CheckLine {
    int criterion = 0;
    std::string label;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

struct Artifact {
    std::string name;
    std::string content;
};

struct SuiteResult {
    std::string name;
    int exit_code = 0;  // returned when the suite fails
    std::vector<CheckLine> lines;
    std::vector<Artifact> artifacts;
    std::vector<MarginEntry> margins;
    nlohmann::json grids = nlohmann::json::object();
    double seconds = 0.0;
    bool passed() const;
};

// subcommands in exit-code order, without full-report
const std::vector<std::string>& suite_names();
int suite_exit_code(const std::string& name);  // 3, 4, ...
bool is_suite(const std::string& name);

SuiteResult run_suite(const std::string& name, const ExperimentConfig& cfg);

// <name>.json: config hash, grids, margin audit, pass/fail lines (no timings)
nlohmann::json suite_json(const SuiteResult& r, const ExperimentConfig& cfg);
std::string format_line(const CheckLine& l, const std::string& suite);

}  // namespace cyl
