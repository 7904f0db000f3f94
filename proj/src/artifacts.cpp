#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cfl/cli.hpp"
#include "cfl/metrics.hpp"
#include "cfl/parallel.hpp"

namespace cfl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << content;
    if (!f) throw std::runtime_error("write failed for " + p.string());
}

std::optional<std::string> read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) return std::nullopt;
    std::stringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

json ledger_json(const EnergyLedger& e) {
    return {{"tx_J", e.tx}, {"comp_J", e.comp}, {"globaltx_J", e.global_tx}, {"agg_J", e.agg}, {"total_J", e.total()}};
}

// Everything derived from one finished run, shared by run and sweep.
struct RunArtifacts {
    json manifest;
    json summary;
    std::string series;
    bool aborted = false;
};

RunArtifacts execute(const ScenarioConfig& cfg, const fs::path& scenario_file, const fs::path& out_dir) {
    const auto started = std::chrono::steady_clock::now();
    const ExperimentResult res = run_experiment(cfg);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    RunArtifacts a;
    a.series = series_csv(res.rounds);
    a.aborted = res.abort_reason.has_value();

    a.manifest = {{"tool", "cflsim"},
                  {"tool_version", std::string(tool_version)},
                  {"scenario_file", fs::absolute(scenario_file).lexically_normal().string()},
                  {"seed", cfg.seed},
                  {"resolved_config", to_json(cfg)},
                  {"artifacts",
                   {{"series", (out_dir / "series.csv").string()},
                    {"manifest", (out_dir / "manifest.json").string()},
                    {"summary", (out_dir / "summary.json").string()}}},
                  {"wall_clock_s", wall}};

    json s = a.manifest;
    s["devices"] = cfg.graph.build().n_devices();
    s["rounds_configured"] = cfg.rounds;
    s["rounds_completed"] = res.rounds.size();
    s["aborted"] = a.aborted;
    if (res.abort_reason) s["abort_reason"] = *res.abort_reason;
    if (!res.rounds.empty()) {
        const auto& last = res.rounds.back();
        s["final"] = {{"sim_time_s", last.sim_time},
                      {"avg_model_loss", last.avg_model_loss},
                      {"avg_model_acc", last.avg_model_acc},
                      {"mean_device_loss", last.mean_device_loss}};
    }
    if (cfg.target_loss) {
        s["target_loss"] = *cfg.target_loss;
        const auto t = convergence_time(res.rounds, *cfg.target_loss);
        s["convergence_time_s"] = t ? json(*t) : json("not reached");
    }
    const EnergyTotals totals = energy_totals(res.rounds);
    json per_device = json::array();
    for (const auto& e : totals.per_device) per_device.push_back(ledger_json(e));
    s["energy"] = {{"per_device", per_device}, {"bs", ledger_json(totals.bs)}, {"network", ledger_json(totals.network)}};
    json parts = json::array();
    for (const auto& r : res.rounds) parts.push_back(r.participants);
    s["participants_per_round"] = parts;
    a.summary = std::move(s);
    return a;
}

void write_artifacts(const RunArtifacts& a, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    write_file(out_dir / "series.csv", a.series);
    write_file(out_dir / "manifest.json", a.manifest.dump(2) + "\n");
    write_file(out_dir / "summary.json", a.summary.dump(2) + "\n");
}

std::size_t resolve_workers(std::size_t w) { return w == 0 ? default_workers() : w; }

}  // namespace

std::string series_csv(std::span<const RoundReport> series) {
    std::string out(series_header);
    out += '\n';
    for (const auto& r : series) {
        const EnergyLedger e = r.network_energy();
        out += std::to_string(r.round) + ',' + fmt_double(r.sim_time) + ',' + fmt_double(r.avg_model_loss) + ',' +
               fmt_double(r.avg_model_acc) + ',' + fmt_double(r.mean_device_loss) + ',' +
               std::to_string(r.participants) + ',' + fmt_double(e.tx) + ',' + fmt_double(e.comp) + ',' +
               fmt_double(e.global_tx) + ',' + fmt_double(e.agg) + '\n';
    }
    return out;
}

std::vector<SeriesRow> parse_series_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || line != series_header) throw std::runtime_error("series.csv: unexpected header");
    std::vector<SeriesRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() != 10) throw std::runtime_error("series.csv: malformed row '" + line + "'");
        SeriesRow r;
        r.round = std::stoul(cells[0]);
        r.sim_time = std::stod(cells[1]);
        r.avg_model_loss = std::stod(cells[2]);
        r.avg_model_acc = std::stod(cells[3]);
        r.mean_device_loss = std::stod(cells[4]);
        r.participants = std::stoul(cells[5]);
        r.energy = {std::stod(cells[6]), std::stod(cells[7]), std::stod(cells[8]), std::stod(cells[9])};
        rows.push_back(r);
    }
    return rows;
}

ScenarioConfig apply_axis(ScenarioConfig cfg, std::string_view axis, std::string_view value) {
    const std::string v(value);
    try {
        if (axis == "topology") {
            cfg.graph.topology = topology_from_string(v);
            if (cfg.graph.topology == TopologyKind::custom) throw std::invalid_argument("sweep over 'custom' topology");
            cfg.graph.edges.clear();
            cfg.graph.edge_file.reset();
            if (cfg.graph.topology == TopologyKind::grid) {
                const std::size_t n = cfg.graph.devices;
                std::size_t rows = 1;
                for (std::size_t r = 1; r * r <= n; ++r) {
                    if (n % r == 0) rows = r;
                }
                cfg.graph.grid_rows = rows;
                cfg.graph.grid_cols = n / rows;
            }
        } else if (axis == "r_bits") {
            cfg.quant_bits = (v == "off") ? std::nullopt : std::optional<unsigned>(std::stoul(v));
        } else if (axis == "tx_power") {
            cfg.radio.tx_power = std::stod(v);
            cfg.tx_power_per_device.clear();
        } else if (axis == "policy") {
            // all | uniform:k | probabilistic:p | sample_weighted:k
            const auto colon = v.find(':');
            const std::string kind = v.substr(0, colon);
            cfg.schedule = {};
            cfg.schedule.kind = schedule_kind_from_string(kind);
            if (cfg.schedule.kind != SchedulePolicy::Kind::all) {
                if (colon == std::string::npos) throw std::invalid_argument("policy '" + v + "' needs a ':' parameter");
                const std::string arg = v.substr(colon + 1);
                if (cfg.schedule.kind == SchedulePolicy::Kind::probabilistic) {
                    cfg.schedule.p = {std::stod(arg)};
                } else {
                    cfg.schedule.k = std::stoul(arg);
                }
            }
        } else if (axis == "mode") {
            cfg.mode = mode_from_string(v);
        } else {
            throw ConfigError("unknown sweep axis '" + std::string(axis) + "' (topology, r_bits, tx_power, policy, mode)");
        }
        cfg.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError("sweep value '" + v + "' for axis '" + std::string(axis) + "': " + e.what());
    }
    return cfg;
}

int run(const fs::path& scenario, const RunOptions& opts, std::ostream& log) {
    ScenarioConfig cfg;
    try {
        cfg = load_scenario(scenario);
        if (opts.seed) cfg.seed = *opts.seed;
        cfg.graph.build();
    } catch (const std::exception& e) {
        log << "config error: " << e.what() << "\n";
        return exit_config_error;
    }
    try {
        const RunArtifacts a = execute(cfg, scenario, opts.out);
        write_artifacts(a, opts.out);
        if (a.aborted) {
            log << "run aborted: " << a.summary.value("abort_reason", std::string{}) << "\n";
            return exit_runtime_abort;
        }
        log << "wrote " << (opts.out / "series.csv").string() << "\n";
        return exit_ok;
    } catch (const std::exception& e) {
        log << "runtime error: " << e.what() << "\n";
        return exit_runtime_abort;
    }
}

int sweep(const fs::path& scenario, std::string_view axis, std::span<const std::string> values,
          const RunOptions& opts, std::ostream& log) {
    std::vector<ScenarioConfig> cfgs;
    try {
        if (values.empty()) throw ConfigError("sweep needs at least one value");
        ScenarioConfig base = load_scenario(scenario);
        if (opts.seed) base.seed = *opts.seed;
        for (const auto& v : values) {
            cfgs.push_back(apply_axis(base, axis, v));
            cfgs.back().graph.build();
        }
    } catch (const std::exception& e) {
        log << "config error: " << e.what() << "\n";
        return exit_config_error;
    }

    std::vector<RunArtifacts> results(cfgs.size());
    std::vector<std::string> failures(cfgs.size());
    parallel_for(cfgs.size(), resolve_workers(opts.workers), [&](std::size_t i) {
        try {
            results[i] = execute(cfgs[i], scenario, opts.out / (std::string(axis) + "=" + values[i]));
        } catch (const std::exception& e) {
            failures[i] = e.what();
        }
    });

    int status = exit_ok;
    std::string table = "axis,value,rounds_completed,final_sim_time_s,final_avg_model_loss,final_avg_model_acc,"
                        "convergence_time_s,energy_total_J,mean_participants\n";
    json combined = json::object();
    for (std::size_t i = 0; i < cfgs.size(); ++i) {
        const fs::path dir = opts.out / (std::string(axis) + "=" + values[i]);
        if (!failures[i].empty()) {
            log << "runtime error for " << axis << "=" << values[i] << ": " << failures[i] << "\n";
            status = exit_runtime_abort;
            continue;
        }
        write_artifacts(results[i], dir);
        const json& s = results[i].summary;
        if (results[i].aborted) status = exit_runtime_abort;
        const auto parts = s["participants_per_round"].get<std::vector<std::size_t>>();
        double mean_parts = 0.0;
        for (auto p : parts) mean_parts += static_cast<double>(p);
        if (!parts.empty()) mean_parts /= static_cast<double>(parts.size());
        const json fin = s.value("final", json::object());
        std::string conv = "n/a";
        if (s.contains("convergence_time_s")) {
            conv = s["convergence_time_s"].is_number() ? fmt_double(s["convergence_time_s"].get<double>())
                                                       : s["convergence_time_s"].get<std::string>();
        }
        table += std::string(axis) + ',' + values[i] + ',' + std::to_string(s["rounds_completed"].get<std::size_t>()) +
                 ',' + fmt_double(fin.value("sim_time_s", 0.0)) + ',' + fmt_double(fin.value("avg_model_loss", 0.0)) +
                 ',' + fmt_double(fin.value("avg_model_acc", 0.0)) + ',' + conv + ',' +
                 fmt_double(s["energy"]["network"]["total_J"].get<double>()) + ',' + fmt_double(mean_parts) + '\n';
        combined[values[i]] = {{"dir", dir.string()},
                               {"final", fin},
                               {"convergence_time_s", s.value("convergence_time_s", json("n/a"))},
                               {"energy", s["energy"]["network"]},
                               {"mean_participants", mean_parts}};
    }
    fs::create_directories(opts.out);
    write_file(opts.out / "sweep_summary.csv", table);
    write_file(opts.out / "sweep_summary.json", json{{"axis", std::string(axis)}, {"runs", combined}}.dump(2) + "\n");
    log << "wrote " << (opts.out / "sweep_summary.csv").string() << "\n";
    return status;
}

int report(const fs::path& dir, std::optional<double> target_loss, std::ostream& out, std::ostream& err) {
    const auto summary_text = read_file(dir / "summary.json");
    const auto series_text = read_file(dir / "series.csv");
    if (!summary_text || !series_text) {
        err << "report: " << dir.string() << " lacks summary.json or series.csv\n";
        return exit_missing_artifacts;
    }
    json s;
    std::vector<SeriesRow> rows;
    try {
        s = json::parse(*summary_text);
        rows = parse_series_csv(*series_text);
    } catch (const std::exception& e) {
        err << "report: unreadable artifacts: " << e.what() << "\n";
        return exit_missing_artifacts;
    }
    const json& cfg = s["resolved_config"];
    const std::size_t devices = s.value("devices", std::size_t{0});
    out << "run: mode=" << cfg.value("mode", std::string("?")) << " devices=" << devices
        << " rounds=" << rows.size() << "/" << s.value("rounds_configured", std::size_t{0})
        << " seed=" << s.value("seed", std::uint64_t{0}) << (s.value("aborted", false) ? " (aborted)" : "") << "\n";
    if (rows.empty()) {
        out << "no rounds recorded\n";
        return exit_ok;
    }
    const SeriesRow& last = rows.back();
    out << "final: sim_time=" << fmt_double(last.sim_time) << " s  avg_model_loss=" << fmt_double(last.avg_model_loss)
        << "  avg_model_acc=" << fmt_double(last.avg_model_acc)
        << "  mean_device_loss=" << fmt_double(last.mean_device_loss) << "\n";

    if (!target_loss && s.contains("target_loss")) target_loss = s["target_loss"].get<double>();
    if (target_loss) {
        std::optional<double> when;
        for (const auto& r : rows) {
            if (r.avg_model_loss <= *target_loss) {
                when = r.sim_time;
                break;
            }
        }
        out << "convergence: target_loss=" << fmt_double(*target_loss) << " "
            << (when ? "reached at " + fmt_double(*when) + " s" : std::string("not reached")) << "\n";
    }

    EnergyLedger total;
    for (const auto& r : rows) total += r.energy;
    out << "energy (J): tx=" << fmt_double(total.tx) << " comp=" << fmt_double(total.comp)
        << " globaltx=" << fmt_double(total.global_tx) << " agg=" << fmt_double(total.agg)
        << " total=" << fmt_double(total.total()) << "\n";

    const auto [lo, hi] = std::minmax_element(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        return a.participants < b.participants;
    });
    if (lo->participants == hi->participants) {
        out << "participants: " << lo->participants << " of " << devices << " devices every round\n";
    } else {
        out << "participants: " << lo->participants << "-" << hi->participants << " of " << devices << " devices\n";
    }
    out << "participants per round:";
    for (const auto& r : rows) out << ' ' << r.participants;
    out << "\n";
    return exit_ok;
}

}  // namespace cfl::cli
