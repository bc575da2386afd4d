// shiftmon: calibrate, monitor, simulate, evaluate, sweep.
//
//   shiftmon [--config FILE] [--key value ...] <command>
//
// Every configuration key is also a flag with '_' written as '-'. Flags win
// over the file. Exit codes: 0 ok, 1 error, 2 alarm raised.

#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "shiftmon/commands.hpp"

namespace {

std::string flag_name(std::string key) {
    for (char& c : key)
        if (c == '_') c = '-';
    return "--" + key;
}

} // namespace

int main(int argc, char** argv) {
    using namespace shiftmon;

    CLI::App app{"Label-free harmful shift detection"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    app.add_option("--config", config_path, "key = value configuration file");
    std::map<std::string, std::string> flags;
    for (const auto& key : config_keys()) app.add_option(flag_name(key), flags[key], "overrides '" + key + "'");

    auto* calibrate = app.add_subcommand("calibrate", "fit the selector; write grid_report.csv and selector.json");
    auto* monitor = app.add_subcommand("monitor", "stream a production CSV ('-' for stdin); write trajectory.csv");
    auto* simulate = app.add_subcommand("simulate", "write one stream per feature-split scenario");
    auto* evaluate = app.add_subcommand("evaluate", "run the shift suite; write suite.json and runs.json");
    auto* sweep = app.add_subcommand("sweep", "eps_harm and eps_tol tables over one suite run");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? commands::kExitOk : commands::kExitError;
    }

    try {
        std::vector<std::pair<std::string, std::string>> overrides;
        for (const auto& key : config_keys())
            if (app.count(flag_name(key)) > 0) overrides.emplace_back(key, flags[key]);
        const auto cfg = parse_config(config_path, overrides);

        if (calibrate->parsed()) return commands::calibrate_cmd(cfg, std::cout);
        if (monitor->parsed()) return commands::monitor_cmd(cfg, std::cin, std::cout);
        if (simulate->parsed()) return commands::simulate_cmd(cfg, std::cout);
        if (evaluate->parsed()) return commands::evaluate_cmd(cfg, std::cout);
        if (sweep->parsed()) return commands::sweep_cmd(cfg, std::cout);
    } catch (const ConfigError& e) {
        std::cerr << "config error [" << e.key() << "]: " << e.what() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
    }
    return commands::kExitError;
}
