#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>


namespace z2s {

// Names accepted as the command of an experiment.
const std::vector<std::string>& suite_commands();

struct ExperimentConfig {
    std::string command;
    std::uint64_t seed = 0;
    bool strict = false;
    std::string output_dir = ".";
    nlohmann::json params = nlohmann::json::object();  // fully defaulted, keyed by record name
};

// Parses, fills in defaults and checks every parameter against the preconditions of the module
// it feeds. Throws std::invalid_argument with a message naming the violated constraint.
ExperimentConfig validate_config(const std::string& raw);
ExperimentConfig validate_config(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);

// Defaults of one command, in the shape validate_config expects.
nlohmann::json default_params(const std::string& command);

// pass = (measured relation bound), relation one of "<=", ">=", "==", ">".
struct Check {
    std::string name;
    bool pass = false;
    double measured = 0.0;
    std::string relation = "<=";
    double bound = 0.0;
};

struct SuiteResult {
    std::string command;
    std::vector<Check> checks;
    std::map<std::string, std::string> tables;  // file name -> CSV text
    nlohmann::json data = nlohmann::json::object();
    bool passed() const;
    const Check* find(const std::string& name) const;
};

// Runs the named suite on an already validated configuration.
SuiteResult run_suite(const ExperimentConfig& cfg);

// report.json (sorted keys, config echo, both parameter regimes, every check) and one file per
// table. Throws std::runtime_error when the directory cannot be written.
void emit_report(const ExperimentConfig& cfg, const SuiteResult& result, const std::filesystem::path& dir);
nlohmann::json report_json(const ExperimentConfig& cfg, const SuiteResult& result);

}  // namespace z2s
