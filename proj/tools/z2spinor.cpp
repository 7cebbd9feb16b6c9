#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "z2s/suites.hpp"

namespace {

constexpr int kPass = 0, kCheckFailure = 1, kUsage = 2;

int usage_error(const std::string& msg) {
    std::cerr << "z2spinor: " << msg << "\n";
    return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Experiments on Z/2 harmonic spinors: Bessel modes, the Fredholm map T, squeezing, deformations"};
    std::string command, config_path, out_dir;
    std::uint64_t seed = 0;
    bool strict = false;
    app.add_option("command", command, "Suite to run")
        ->required()
        ->check(CLI::IsMember(z2s::suite_commands()));
    app.add_option("--config", config_path, "JSON configuration file")->required();
    auto* out_opt = app.add_option("--out", out_dir, "Directory for report.json and the CSV files");
    auto* seed_opt = app.add_option("--seed", seed, "Seed, overrides the configuration");
    app.add_flag("--strict", strict, "Use the proof regime T > 512 instead of the desk-scale regime");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    std::ifstream in(config_path);
    if (!in) return usage_error("cannot read config file " + config_path);
    std::stringstream buf;
    buf << in.rdbuf();

    z2s::ExperimentConfig cfg;
    try {
        nlohmann::json j = nlohmann::json::parse(buf.str());
        if (!j.is_object()) return usage_error("config error: configuration must be a JSON object");
        if (j.contains("command") && j["command"] != command)
            return usage_error("config error: config names command '" + j["command"].dump() + "' but '" + command +
                               "' was requested");
        j["command"] = command;
        if (*seed_opt) j["seed"] = seed;
        if (strict) j["strict"] = true;
        if (*out_opt) j["output_dir"] = out_dir;
        cfg = z2s::validate_config(j);
    } catch (const nlohmann::json::parse_error& e) {
        return usage_error(std::string("config error: not valid JSON: ") + e.what());
    } catch (const std::invalid_argument& e) {
        return usage_error(std::string("config error: ") + e.what());
    }

    const auto t0 = std::chrono::steady_clock::now();
    z2s::SuiteResult result;
    try {
        result = z2s::run_suite(cfg);
    } catch (const std::invalid_argument& e) {
        return usage_error(std::string("precondition error: ") + e.what());
    } catch (const std::exception& e) {
        std::cerr << "z2spinor: " << command << " failed: " << e.what() << "\n";
        return kCheckFailure;
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    try {
        z2s::emit_report(cfg, result, cfg.output_dir);
    } catch (const std::exception& e) {
        return usage_error(e.what());
    }
    for (const auto& c : result.checks)
        std::printf("%-4s %-34s %.6g %s %.6g\n", c.pass ? "ok" : "FAIL", c.name.c_str(), c.measured, c.relation.c_str(),
                    c.bound);
    std::printf("%s: %s in %.1f s, report in %s\n", command.c_str(), result.passed() ? "passed" : "FAILED", seconds,
                cfg.output_dir.c_str());
    return result.passed() ? kPass : kCheckFailure;
}
