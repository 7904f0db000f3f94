#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "cfl/cli.hpp"

using namespace cfl;
using namespace cfl::cli;
namespace fs = std::filesystem;

namespace {

const std::string minimal = R"(mode: cfl
rounds: 3
graph:
  topology: path
  devices: 3
data:
  samples_per_device: 20
  dim: 4
  classes: 3
  shards_per_device: 1
  test_samples: 30
model:
  hidden: 5
)";

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

fs::path fresh_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("cfl_cli_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

fs::path write_scenario(const fs::path& dir, const std::string& text) {
    const auto p = dir / "s.scenario";
    std::ofstream(p) << text;
    return p;
}

std::string fig3_variant(const std::string& mode, std::size_t rounds) {
    auto text = slurp(fs::path(CFL_SCENARIO_DIR) / "fig3.scenario");
    text = std::regex_replace(text, std::regex("\nmode: cfl"), "\nmode: " + mode);
    text = std::regex_replace(text, std::regex("\nrounds: [0-9]+"), "\nrounds: " + std::to_string(rounds));
    return text;
}

std::optional<std::size_t> error_line(const std::string& text) {
    try {
        parse_scenario(text);
    } catch (const ConfigError& e) {
        return e.line();
    }
    return std::nullopt;
}

}  // namespace

TEST_CASE("missing mode is a config error naming the field") {
    std::string text = minimal;
    text.erase(0, text.find('\n') + 1);
    try {
        parse_scenario(text);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("'mode'") != std::string::npos);
    }
}

TEST_CASE("unknown keys are rejected with their line") {
    const auto line = error_line(minimal + "modle: cfl\n");
    REQUIRE(line.has_value());
    CHECK(*line == 14);
    CHECK(error_line(minimal + "channel:\n  bandwith_hz: 5\n") == 15);
    CHECK(error_line("mode: cfl\nrounds: [1, 2]\ngraph: {topology: path, devices: 3}\n") == 2);
    CHECK_THROWS_AS(parse_scenario("mode: cfl\nrounds: 0\ngraph: {topology: path, devices: 3}\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario("mode: sideways\nrounds: 1\ngraph: {topology: path, devices: 3}\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario("mode: ofl\nrounds: 1\ngraph: {topology: path, devices: 3}\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario("mode: cfl\nrounds: 1\ngraph: {topology: path}\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario("mode: [cfl\n"), ConfigError);
}

TEST_CASE("off values and quantization forms") {
    auto c = parse_scenario(minimal + "quantization: off\ndelay_budget_s: off\nchannel: off\n");
    CHECK_FALSE(c.quant_bits.has_value());
    CHECK_FALSE(c.delay_budget.has_value());
    CHECK_FALSE(c.channel.has_value());
    c = parse_scenario(minimal + "quantization: 4\n");
    CHECK(c.quant_bits == 4u);
    CHECK(c.quant_rounding == Rounding::nearest);
    c = parse_scenario(minimal + "quantization: {bits: 2, rounding: stochastic}\n");
    CHECK(c.quant_bits == 2u);
    CHECK(c.quant_rounding == Rounding::stochastic);
}

TEST_CASE("resolved config round-trips") {
    for (const char* name : {"fig3.scenario", "fig4.scenario"}) {
        const auto cfg = load_scenario(fs::path(CFL_SCENARIO_DIR) / name);
        const auto j = to_json(cfg);
        const auto back = parse_scenario(j.dump());
        CHECK(to_json(back) == j);
        const auto via_manifest = parse_scenario(nlohmann::json{{"resolved_config", j}}.dump());
        CHECK(to_json(via_manifest) == j);
    }
}

TEST_CASE("series csv round-trips") {
    RoundReport r;
    r.round = 1;
    r.sim_time = 0.125;
    r.avg_model_loss = 1.5;
    r.avg_model_acc = 0.25;
    r.mean_device_loss = 1.25;
    r.participants = 4;
    r.device_energy = {{0.5, 0.25, 0, 0}};
    r.bs_energy = {0, 0, 2, 0.125};
    const std::vector<RoundReport> s = {r};
    const auto text = series_csv(s);
    CHECK(text.substr(0, text.find('\n')) == series_header);
    const auto rows = parse_series_csv(text);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].participants == 4);
    CHECK(rows[0].energy == EnergyLedger{0.5, 0.25, 2, 0.125});
    CHECK_THROWS(parse_series_csv("nope\n"));
}

TEST_CASE("run writes artifacts deterministically and the manifest reproduces them") {
    const auto dir = fresh_dir("run");
    const auto file = write_scenario(dir, minimal);
    std::ostringstream log;
    REQUIRE(run(file, {dir / "a", 7, 1}, log) == exit_ok);
    REQUIRE(run(file, {dir / "b", 7, 1}, log) == exit_ok);
    const auto series_a = slurp(dir / "a" / "series.csv");
    CHECK(series_a == slurp(dir / "b" / "series.csv"));
    CHECK(parse_series_csv(series_a).size() == 3);
    const auto manifest = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
    CHECK(manifest["seed"] == 7);
    CHECK(manifest["tool_version"] == std::string(tool_version));
    CHECK(manifest["resolved_config"]["seed"] == 7);
    CHECK(manifest.contains("wall_clock_s"));
    const auto summary = nlohmann::json::parse(slurp(dir / "a" / "summary.json"));
    CHECK(summary["rounds_completed"] == 3);
    CHECK(summary["aborted"] == false);
    CHECK(summary.contains("final"));

    REQUIRE(run(dir / "a" / "manifest.json", {dir / "c", std::nullopt, 1}, log) == exit_ok);
    CHECK(slurp(dir / "c" / "series.csv") == series_a);
}

TEST_CASE("run exit codes") {
    const auto dir = fresh_dir("codes");
    std::ostringstream log;
    CHECK(run(write_scenario(dir, "rounds: 2\n"), {dir / "o"}, log) == exit_config_error);
    CHECK(run(dir / "missing.scenario", {dir / "o"}, log) == exit_config_error);
    auto diverge = minimal + "  lr: 1.0e308\n";
    diverge = std::regex_replace(diverge, std::regex("rounds: 3"), "rounds: 40");
    CHECK(run(write_scenario(dir, diverge), {dir / "d", std::nullopt, 1}, log) == exit_runtime_abort);
    const auto summary = nlohmann::json::parse(slurp(dir / "d" / "summary.json"));
    CHECK(summary["aborted"] == true);
    CHECK(summary["rounds_completed"].get<std::size_t>() ==
          parse_series_csv(slurp(dir / "d" / "series.csv")).size());
}

TEST_CASE("sweep writes one artifact set per value and a combined summary") {
    const auto dir = fresh_dir("sweep");
    const auto file = write_scenario(dir, minimal);
    std::ostringstream log;
    const std::vector<std::string> values = {"2", "4", "off"};
    REQUIRE(sweep(file, "r_bits", values, {dir / "out", 3, 2}, log) == exit_ok);
    for (const auto& v : values) CHECK(fs::exists(dir / "out" / ("r_bits=" + v) / "series.csv"));
    const auto table = slurp(dir / "out" / "sweep_summary.csv");
    CHECK(std::count(table.begin(), table.end(), '\n') == 4);
    CHECK(nlohmann::json::parse(slurp(dir / "out" / "sweep_summary.json"))["runs"].size() == 3);

    // a single-value sweep matches a plain run
    const std::vector<std::string> one = {"4"};
    REQUIRE(sweep(write_scenario(dir, minimal + "quantization: off\n"), "r_bits", one, {dir / "one", 3, 1}, log) == exit_ok);
    REQUIRE(run(write_scenario(dir, minimal + "quantization: 4\n"), {dir / "plain", 3, 1}, log) == exit_ok);
    CHECK(slurp(dir / "one" / "r_bits=4" / "series.csv") == slurp(dir / "plain" / "series.csv"));

    CHECK(sweep(file, "r_bits", {}, {dir / "x"}, log) == exit_config_error);
    const std::vector<std::string> bad = {"zig"};
    CHECK(sweep(file, "topology", bad, {dir / "x"}, log) == exit_config_error);
    CHECK(sweep(file, "colour", one, {dir / "x"}, log) == exit_config_error);
}

TEST_CASE("sweep axes") {
    const auto base = parse_scenario(minimal);
    auto g = apply_axis(base, "topology", "grid");
    CHECK(g.graph.topology == TopologyKind::grid);
    CHECK(g.graph.grid_rows * g.graph.grid_cols == 3);
    CHECK(apply_axis(base, "tx_power", "0.2").radio.tx_power == 0.2);
    const auto p = apply_axis(base, "policy", "uniform:2").schedule;
    CHECK(p.kind == SchedulePolicy::Kind::uniform_k);
    CHECK(p.k == 2);
    CHECK(apply_axis(base, "policy", "probabilistic:0.5").schedule.p == std::vector<double>{0.5});
    CHECK_THROWS_AS(apply_axis(base, "policy", "uniform:9"), ConfigError);
}

TEST_CASE("report") {
    const auto dir = fresh_dir("report");
    std::ostringstream out, err;
    CHECK(report(dir, std::nullopt, out, err) == exit_missing_artifacts);

    REQUIRE(run(write_scenario(dir, fig3_variant("ofl", 4)), {dir / "ofl", std::nullopt, 1}, err) == exit_ok);
    const auto before_series = slurp(dir / "ofl" / "series.csv");
    const auto before_summary = slurp(dir / "ofl" / "summary.json");
    REQUIRE(report(dir / "ofl", std::nullopt, out, err) == exit_ok);
    CHECK(out.str().find("participants: 4 of 6") != std::string::npos);
    CHECK(out.str().find("convergence: target_loss=0.5") != std::string::npos);
    CHECK(out.str().find("energy (J)") != std::string::npos);
    CHECK(slurp(dir / "ofl" / "series.csv") == before_series);
    CHECK(slurp(dir / "ofl" / "summary.json") == before_summary);
}

TEST_CASE("command-line exit codes") {
    const std::string exe = CFL_CLI_PATH;
    const auto dir = fresh_dir("exe");
    auto code = [](const std::string& cmd) {
        const int st = std::system((cmd + " >/dev/null 2>&1").c_str());
        return WEXITSTATUS(st);
    };
    CHECK(code(exe) == exit_usage);
    CHECK(code(exe + " frobnicate") == exit_usage);
    CHECK(code(exe + " report " + dir.string()) == exit_missing_artifacts);
    const auto file = write_scenario(dir, minimal);
    CHECK(code(exe + " run " + file.string() + " --out " + (dir / "o").string() + " --seed 5") == exit_ok);
    CHECK(code(exe + " report " + (dir / "o").string()) == exit_ok);
    CHECK(code(exe + " sweep " + file.string() + " --axis r_bits --values 2,off --workers 2 --out " +
               (dir / "s").string()) == exit_ok);
    CHECK(code(exe + " run " + write_scenario(dir, minimal + "typo: 1\n").string() + " --out " + (dir / "t").string()) ==
          exit_config_error);
}
