// cflsim: run, sweep and summarize federated learning scenarios.
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cfl/cli.hpp"

namespace {

std::vector<std::string> split_values(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace cfl::cli;

    CLI::App app{"Federated learning simulator over wireless device networks"};
    app.set_version_flag("--version", std::string(tool_version));
    app.require_subcommand(1);

    std::string scenario, out_dir = "out", axis, values, report_dir;
    std::optional<std::uint64_t> seed;
    std::optional<double> target;
    std::size_t workers = 0;

    auto* run_cmd = app.add_subcommand("run", "Run one scenario and write series.csv, manifest.json, summary.json");
    run_cmd->add_option("scenario", scenario, "Scenario YAML (or a manifest.json)")->required();
    run_cmd->add_option("--out", out_dir, "Output directory");
    run_cmd->add_option("--seed", seed, "Override the scenario seed");

    auto* sweep_cmd = app.add_subcommand("sweep", "Run a scenario once per value of one axis");
    sweep_cmd->add_option("scenario", scenario, "Scenario YAML")->required();
    sweep_cmd->add_option("--axis", axis, "topology | r_bits | tx_power | policy | mode")->required();
    sweep_cmd->add_option("--values", values, "Comma-separated values, e.g. 2,4,off")->required();
    sweep_cmd->add_option("--out", out_dir, "Output directory");
    sweep_cmd->add_option("--seed", seed, "Override the scenario seed");
    sweep_cmd->add_option("--workers", workers, "Parallel runs (default: hardware threads)");

    auto* report_cmd = app.add_subcommand("report", "Summarize the artifacts of a finished run");
    report_cmd->add_option("dir", report_dir, "Run output directory")->required();
    report_cmd->add_option("--target", target, "Target loss for the convergence line");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_usage;
    }

    RunOptions opts{out_dir, seed, workers};
    if (*run_cmd) return run(scenario, opts, std::cerr);
    if (*sweep_cmd) {
        const auto vals = split_values(values);
        return sweep(scenario, axis, vals, opts, std::cerr);
    }
    return report(report_dir, target, std::cout, std::cerr);
}
