#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cfl/protocol.hpp"
#include "cfl/report.hpp"

namespace cfl::cli {

inline constexpr std::string_view tool_version = "0.3.0";

enum ExitCode : int {
    exit_ok = 0,
    exit_usage = 1,
    exit_config_error = 2,
    exit_runtime_abort = 3,
    exit_missing_artifacts = 4,
};

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, std::optional<std::size_t> line = std::nullopt)
        : std::runtime_error(line ? "line " + std::to_string(*line) + ": " + what : what), line_(line) {}
    std::optional<std::size_t> line() const noexcept { return line_; }

private:
    std::optional<std::size_t> line_;
};

// Scenario files are YAML. Relative paths resolve against base_dir. A run
// manifest (JSON, which is valid YAML) is accepted too: its resolved_config
// section is used.
ScenarioConfig parse_scenario(std::string_view text, const std::filesystem::path& base_dir = {});
ScenarioConfig load_scenario(const std::filesystem::path& file);

// Fully resolved config; feeding it back through parse_scenario round-trips.
nlohmann::json to_json(const ScenarioConfig& cfg);

inline constexpr std::string_view series_header =
    "round,sim_time_s,avg_model_loss,avg_model_acc,mean_device_loss,participants,"
    "energy_tx_J,energy_comp_J,energy_globaltx_J,energy_agg_J";

std::string series_csv(std::span<const RoundReport> series);

struct SeriesRow {
    std::size_t round = 0;
    double sim_time = 0.0;
    double avg_model_loss = 0.0;
    double avg_model_acc = 0.0;
    double mean_device_loss = 0.0;
    std::size_t participants = 0;
    EnergyLedger energy;
};

std::vector<SeriesRow> parse_series_csv(std::string_view text);

// Apply one sweep value. Axes: topology, r_bits, tx_power, policy, mode.
ScenarioConfig apply_axis(ScenarioConfig cfg, std::string_view axis, std::string_view value);

struct RunOptions {
    std::filesystem::path out = "out";
    std::optional<std::uint64_t> seed;
    std::size_t workers = 0;  // 0: hardware concurrency
};

// Writes series.csv, manifest.json and summary.json into opts.out.
int run(const std::filesystem::path& scenario, const RunOptions& opts, std::ostream& log);
int sweep(const std::filesystem::path& scenario, std::string_view axis, std::span<const std::string> values,
          const RunOptions& opts, std::ostream& log);
int report(const std::filesystem::path& dir, std::optional<double> target_loss, std::ostream& out, std::ostream& err);

}  // namespace cfl::cli
