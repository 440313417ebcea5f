#include <CLI11.hpp>
#include <omp.h>

#include <chrono>
#include <filesystem>
#include <iostream>

#include "cyl/config.hpp"
#include "cyl/suites.hpp"

using namespace cyl;

namespace {

constexpr int kConfigError = 2;

std::string commands() {
    std::string s;
    for (const auto& n : suite_names()) s += n + ", ";
    return s + "full-report";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weighted cylinder gluing experiments"};
    std::string command, config_path, out_dir;
    long seed = -1;
    int jobs = 0;
    bool dump = false, quiet = false;
    app.add_option("command", command, "one of: " + commands());
    app.add_option("--config", config_path, "flat key = value config file (defaults when absent)");
    app.add_option("--out", out_dir, "artifact directory (overrides output.dir)");
    app.add_option("--seed", seed, "base seed (overrides seed)")->check(CLI::NonNegativeNumber);
    app.add_option("--jobs", jobs, "OpenMP threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
    app.add_flag("--dump-config", dump, "print the resolved config and exit");
    app.add_flag("--quiet", quiet, "only print the pass/fail lines");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kConfigError;
    }

    ExperimentConfig cfg;
    try {
        if (!config_path.empty()) cfg = ExperimentConfig::load(config_path);
        if (seed >= 0) cfg.set("seed", std::to_string(seed));
        if (!out_dir.empty()) cfg.set("output.dir", out_dir);
        cfg.validate();
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kConfigError;
    }
    if (dump) {
        std::cout << cfg.serialize();
        return 0;
    }

    std::vector<std::string> run;
    if (command == "full-report") {
        run = suite_names();
    } else if (is_suite(command)) {
        run = {command};
    } else {
        std::cerr << (command.empty() ? "missing command" : "unknown command '" + command + "'")
                  << "; expected one of: " << commands() << "\n";
        return kConfigError;
    }
    if (jobs > 0) omp_set_num_threads(jobs);

    // all suites finish before anything is written
    std::vector<SuiteResult> results;
    for (const auto& name : run) {
        if (!quiet) std::cerr << "running " << name << " ...\n";
        results.push_back(run_suite(name, cfg));
        for (const auto& l : results.back().lines) std::cout << format_line(l, name) << "\n";
        std::cout.flush();
    }

    const std::string dir = cfg.text("output.dir");
    nlohmann::json summary = {{"command", command}, {"config_hash", cfg.hash_hex()}, {"suites", nlohmann::json::array()}};
    int rc = 0;
    try {
        write_text(dir, "config.txt", cfg.serialize());
        for (const auto& r : results) {
            for (const auto& a : r.artifacts) write_text(dir + "/" + r.name, a.name, a.content);
            write_text(dir + "/" + r.name, r.name + ".json", suite_json(r, cfg).dump(2) + "\n");
            auto s = suite_json(r, cfg);
            s["seconds"] = r.seconds;
            summary["suites"].push_back(s);
            if (!r.passed() && rc == 0) rc = r.exit_code;
        }
        summary["pass"] = rc == 0;
        summary["exit_code"] = rc;
        write_text(dir, "summary.json", summary.dump(2) + "\n");
    } catch (const std::exception& e) {
        std::cerr << "writing artifacts: " << e.what() << "\n";
        return 1;
    }
    if (!quiet) std::cerr << "artifacts in " << dir << ", config hash " << cfg.hash_hex() << ", exit " << rc << "\n";
    return rc;
}
