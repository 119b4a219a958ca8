#pragma once

#include <map>
#include <string>
#include <vector>

#include "nhsparse/fixtures.hpp"

namespace nhsparse {

struct CheckResult {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double tolerance = 0.0;
    std::string witness;
};

struct SuiteResult {
    std::string name;
    bool pass = true;
    std::map<std::string, double> constants;
    std::vector<CheckResult> checks;
    double wall_ms = 0.0;

    void add(const std::string& check_name, bool ok, double value, double tol,
             const std::string& witness = "");
};

struct ExperimentConfig {
    std::string measure_name = "cantor6";   // fixture name, or empty when a file is given
    std::string measure_file;
    KernelSpec kernel;
    TruncationSpec truncation;
    std::uint64_t grid_seed = 7;
    std::uint64_t run_seed = 1;
    double c_stop = 16.0;
    int q = 1;
    std::vector<double> gammas = {0.125, 0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625,
                                  0.001953125};
    int n_max = 14;
    std::vector<std::string> suites = {"geometry", "haar",   "measure-lemmas", "bumps",
                                       "sparse",   "squarefns", "domination"};
    std::string output_path = "report.json";
    std::string format = "json";
};

ExperimentConfig config_from_json(const std::string& text);

struct RunReport {
    int schema_version = 1;
    bool pass = true;
    std::vector<SuiteResult> suites;
    std::map<std::string, std::string> environment;

    // timing fields live under a key the reproducibility check strips
    std::string to_json(bool include_timings = true) const;
};

SuiteResult run_geometry_suite(const Fixture& fx, const ExperimentConfig& cfg);
SuiteResult run_haar_suite(const Fixture& fx, const ExperimentConfig& cfg);
SuiteResult run_measure_suite(const Fixture& fx, const ExperimentConfig& cfg);
SuiteResult run_bump_suite(const Fixture& fx, const ExperimentConfig& cfg);
SuiteResult run_sparse_suite(const Fixture& fx, const ExperimentConfig& cfg);
SuiteResult run_squarefns_suite(const Fixture& fx, const ExperimentConfig& cfg);
SuiteResult run_domination_suite(const Fixture& fx, const ExperimentConfig& cfg);

RunReport run_experiment(const ExperimentConfig& cfg);

Fixture fixture_for_config(const ExperimentConfig& cfg);

}  // namespace nhsparse
