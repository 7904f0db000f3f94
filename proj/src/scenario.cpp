#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "cfl/cli.hpp"

namespace cfl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::size_t line_of(const YAML::Node& n) { return static_cast<std::size_t>(n.Mark().line) + 1; }

// Walks one mapping, rejecting keys it was not told about.
class Section {
public:
    Section(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.IsMap()) throw ConfigError("'" + path_ + "' must be a mapping", line_of(node_));
    }

    void allow(std::initializer_list<const char*> keys) {
        std::set<std::string> ok(keys.begin(), keys.end());
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (!ok.count(key)) {
                throw ConfigError("unknown key '" + field(key) + "'", line_of(kv.first));
            }
        }
    }

    bool has(const char* key) const { return static_cast<bool>(node_[key]); }
    YAML::Node raw(const char* key) const { return node_[key]; }
    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    template <class T>
    T get(const char* key) const {
        const YAML::Node n = node_[key];
        if (!n) throw ConfigError("missing required field '" + field(key) + "'", line_of(node_));
        return convert<T>(n, field(key));
    }

    template <class T>
    T get(const char* key, T fallback) const {
        const YAML::Node n = node_[key];
        return n ? convert<T>(n, field(key)) : fallback;
    }

    // Scalar that may be the string "off".
    template <class T>
    std::optional<T> get_or_off(const char* key, std::optional<T> fallback) const {
        const YAML::Node n = node_[key];
        if (!n) return fallback;
        if (n.IsScalar() && n.Scalar() == "off") return std::nullopt;
        return convert<T>(n, field(key));
    }

    Section sub(const char* key) const { return Section(node_[key], field(key)); }

    template <class T>
    static T convert(const YAML::Node& n, const std::string& name) {
        try {
            return n.as<T>();
        } catch (const YAML::Exception&) {
            throw ConfigError("field '" + name + "' has the wrong type", line_of(n));
        }
    }

private:
    YAML::Node node_;
    std::string path_;
};

template <class Fn>
auto enum_field(const Section& s, const char* key, Fn&& parse, decltype(parse(std::string_view{})) fallback,
                bool required = false) {
    if (!s.has(key)) {
        if (required) throw ConfigError("missing required field '" + s.field(key) + "'");
        return fallback;
    }
    const auto text = s.get<std::string>(key);
    try {
        return parse(text);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("field '" + s.field(key) + "': " + e.what(), line_of(s.raw(key)));
    }
}

Point point_of(const YAML::Node& n, const std::string& name) {
    if (!n.IsSequence() || n.size() != 2) throw ConfigError("'" + name + "' must be [x, y]", line_of(n));
    return {Section::convert<double>(n[0], name), Section::convert<double>(n[1], name)};
}

std::vector<double> scalar_or_list(const YAML::Node& n, const std::string& name) {
    if (n.IsSequence()) return Section::convert<std::vector<double>>(n, name);
    return {Section::convert<double>(n, name)};
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    if (path.is_relative() && !base.empty()) path = base / path;
    return fs::absolute(path).lexically_normal();
}

void parse_graph(const Section& g, const fs::path& base, ScenarioConfig& cfg) {
    Section s = g;
    s.allow({"topology", "devices", "grid", "edges", "edge_file", "positions", "bs"});
    auto& gs = cfg.graph;
    gs.topology = enum_field(s, "topology", topology_from_string, TopologyKind::complete, true);
    gs.devices = s.get<std::size_t>("devices", 0);
    if (s.has("grid")) {
        const auto dims = s.get<std::vector<std::size_t>>("grid");
        if (dims.size() != 2) throw ConfigError("'graph.grid' must be [rows, cols]", line_of(s.raw("grid")));
        gs.grid_rows = dims[0];
        gs.grid_cols = dims[1];
    }
    if (s.has("edges")) {
        for (const auto& e : s.raw("edges")) {
            const auto pair = Section::convert<std::vector<std::size_t>>(e, "graph.edges");
            if (pair.size() != 2) throw ConfigError("'graph.edges' entries must be [i, j]", line_of(e));
            gs.edges.emplace_back(pair[0], pair[1]);
        }
    }
    if (s.has("edge_file")) gs.edge_file = resolve(base, s.get<std::string>("edge_file"));
    if (s.has("positions")) {
        for (const auto& p : s.raw("positions")) gs.positions.push_back(point_of(p, "graph.positions"));
    }
    if (s.has("bs")) gs.bs = point_of(s.raw("bs"), "graph.bs");
    if (gs.devices == 0 && !gs.edge_file) throw ConfigError("missing required field 'graph.devices'");
}

void parse_channel(const YAML::Node& node, ScenarioConfig& cfg) {
    if (node.IsScalar() && node.Scalar() == "off") {
        cfg.channel.reset();
        return;
    }
    Section s(node, "channel");
    s.allow({"bandwidth_hz", "noise_density_w_per_hz", "pathloss_exponent", "ref_gain", "waterfall_m",
             "bs_tx_power_w", "bs_aggregation_energy_j", "downlink_errors"});
    ChannelConfig c;
    c.params.bandwidth = s.get("bandwidth_hz", c.params.bandwidth);
    c.params.noise_density = s.get("noise_density_w_per_hz", c.params.noise_density);
    c.params.pathloss_exponent = s.get("pathloss_exponent", c.params.pathloss_exponent);
    c.params.ref_gain = s.get("ref_gain", c.params.ref_gain);
    c.params.waterfall_m = s.get("waterfall_m", c.params.waterfall_m);
    c.bs_tx_power = s.get("bs_tx_power_w", c.bs_tx_power);
    c.bs_aggregation_energy = s.get("bs_aggregation_energy_j", c.bs_aggregation_energy);
    c.downlink_errors = s.get("downlink_errors", c.downlink_errors);
    cfg.channel = c;
}

void parse_radio(const Section& s0, ScenarioConfig& cfg) {
    Section s = s0;
    s.allow({"tx_power_w", "cpu_cycles_per_sample", "cpu_freq_hz", "eff_capacitance"});
    if (s.has("tx_power_w")) {
        auto p = scalar_or_list(s.raw("tx_power_w"), "radio.tx_power_w");
        if (p.size() == 1 && !s.raw("tx_power_w").IsSequence()) {
            cfg.radio.tx_power = p[0];
        } else {
            cfg.tx_power_per_device = std::move(p);
        }
    }
    cfg.radio.cpu_cycles_per_sample = s.get("cpu_cycles_per_sample", cfg.radio.cpu_cycles_per_sample);
    cfg.radio.cpu_freq = s.get("cpu_freq_hz", cfg.radio.cpu_freq);
    cfg.radio.eff_capacitance = s.get("eff_capacitance", cfg.radio.eff_capacitance);
}

void parse_data(const Section& s0, const fs::path& base, ScenarioConfig& cfg) {
    Section s = s0;
    s.allow({"source", "seed", "samples_per_device", "dim", "classes", "shards_per_device", "separation",
             "test_samples", "mnist"});
    auto& d = cfg.data;
    d.source = enum_field(
        s, "source",
        [](std::string_view v) {
            if (v == "synthetic") return DataSpec::Source::synthetic;
            if (v == "mnist") return DataSpec::Source::mnist;
            throw std::invalid_argument("unknown data source '" + std::string(v) + "'");
        },
        DataSpec::Source::synthetic);
    d.synth.seed = s.get("seed", d.synth.seed);
    d.synth.n_per_device = s.get("samples_per_device", d.synth.n_per_device);
    d.synth.dim = s.get("dim", d.synth.dim);
    d.synth.classes = s.get("classes", d.synth.classes);
    d.synth.shards_per_device = s.get("shards_per_device", d.synth.shards_per_device);
    d.synth.separation = s.get("separation", d.synth.separation);
    d.synth.test_samples = s.get("test_samples", d.synth.test_samples);
    if (s.has("mnist")) {
        Section m = s.sub("mnist");
        m.allow({"train_images", "train_labels", "test_images", "test_labels"});
        d.train_images = resolve(base, m.get<std::string>("train_images"));
        d.train_labels = resolve(base, m.get<std::string>("train_labels"));
        d.test_images = resolve(base, m.get<std::string>("test_images"));
        d.test_labels = resolve(base, m.get<std::string>("test_labels"));
    } else if (d.source == DataSpec::Source::mnist) {
        throw ConfigError("data.source is mnist but 'data.mnist' paths are missing");
    }
}

void parse_model(const Section& s0, ScenarioConfig& cfg) {
    Section s = s0;
    s.allow({"hidden", "init", "init_seed", "lr", "local_steps"});
    auto& m = cfg.model;
    m.hidden = s.get("hidden", m.hidden);
    m.init = enum_field(s, "init", init_mode_from_string, m.init);
    m.init_seed = s.get("init_seed", m.init_seed);
    m.train.lr = s.get("lr", m.train.lr);
    m.train.local_steps = s.get("local_steps", m.train.local_steps);
}

void parse_schedule(const Section& s0, ScenarioConfig& cfg) {
    Section s = s0;
    s.allow({"policy", "k", "p"});
    auto& p = cfg.schedule;
    p.kind = enum_field(s, "policy", schedule_kind_from_string, p.kind);
    p.k = s.get("k", p.k);
    if (s.has("p")) p.p = scalar_or_list(s.raw("p"), "schedule.p");
}

ScenarioConfig parse_root(const YAML::Node& root, const fs::path& base) {
    Section s(root, "");
    s.allow({"mode", "rounds", "seed", "order", "delay_budget_s", "graph", "mixing", "channel", "radio", "data",
             "model", "quantization", "schedule", "metrics"});
    ScenarioConfig cfg;
    cfg.mode = enum_field(s, "mode", mode_from_string, Mode::cfl, true);
    cfg.rounds = s.get<std::size_t>("rounds");
    cfg.seed = s.get<std::uint64_t>("seed", cfg.seed);
    cfg.order = enum_field(s, "order", order_from_string, cfg.order);
    cfg.delay_budget = s.get_or_off<double>("delay_budget_s", std::nullopt);
    parse_graph(s.sub("graph"), base, cfg);
    cfg.mixing = enum_field(s, "mixing", mixing_from_string, cfg.mixing);
    if (s.has("channel")) parse_channel(s.raw("channel"), cfg);
    if (s.has("radio")) parse_radio(s.sub("radio"), cfg);
    if (s.has("data")) parse_data(s.sub("data"), base, cfg);
    if (s.has("model")) parse_model(s.sub("model"), cfg);
    if (s.has("quantization") && s.raw("quantization").IsMap()) {
        Section q = s.sub("quantization");
        q.allow({"bits", "rounding"});
        cfg.quant_bits = q.get_or_off<unsigned>("bits", std::nullopt);
        cfg.quant_rounding = enum_field(q, "rounding", rounding_from_string, cfg.quant_rounding);
    } else {
        cfg.quant_bits = s.get_or_off<unsigned>("quantization", std::nullopt);
    }
    if (s.has("schedule")) parse_schedule(s.sub("schedule"), cfg);
    if (s.has("metrics")) {
        Section m = s.sub("metrics");
        m.allow({"target_loss"});
        cfg.target_loss = m.get_or_off<double>("target_loss", std::nullopt);
    }
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

}  // namespace

ScenarioConfig parse_scenario(std::string_view text, const fs::path& base_dir) {
    YAML::Node root;
    try {
        root = YAML::Load(std::string(text));
    } catch (const YAML::ParserException& e) {
        throw ConfigError("unparseable scenario: " + e.msg, static_cast<std::size_t>(e.mark.line) + 1);
    }
    if (!root.IsMap()) throw ConfigError("scenario must be a mapping of sections");
    if (root["resolved_config"]) return parse_root(root["resolved_config"], base_dir);
    return parse_root(root, base_dir);
}

ScenarioConfig load_scenario(const fs::path& file) {
    std::ifstream f(file);
    if (!f) throw ConfigError("cannot open scenario file " + file.string());
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_scenario(buf.str(), file.parent_path());
}

json to_json(const ScenarioConfig& cfg) {
    json j;
    j["mode"] = to_string(cfg.mode);
    j["rounds"] = cfg.rounds;
    j["seed"] = cfg.seed;
    j["order"] = to_string(cfg.order);
    j["delay_budget_s"] = cfg.delay_budget ? json(*cfg.delay_budget) : json("off");

    json g;
    g["topology"] = to_string(cfg.graph.topology);
    g["devices"] = cfg.graph.devices;
    if (cfg.graph.topology == TopologyKind::grid) g["grid"] = {cfg.graph.grid_rows, cfg.graph.grid_cols};
    if (!cfg.graph.edges.empty()) {
        g["edges"] = json::array();
        for (const auto& [a, b] : cfg.graph.edges) g["edges"].push_back({a, b});
    }
    if (cfg.graph.edge_file) g["edge_file"] = cfg.graph.edge_file->string();
    if (!cfg.graph.positions.empty()) {
        g["positions"] = json::array();
        for (const auto& p : cfg.graph.positions) g["positions"].push_back({p.x, p.y});
    }
    if (cfg.graph.bs) g["bs"] = {cfg.graph.bs->x, cfg.graph.bs->y};
    j["graph"] = g;
    j["mixing"] = to_string(cfg.mixing);

    if (cfg.channel) {
        const auto& c = *cfg.channel;
        j["channel"] = {{"bandwidth_hz", c.params.bandwidth},
                        {"noise_density_w_per_hz", c.params.noise_density},
                        {"pathloss_exponent", c.params.pathloss_exponent},
                        {"ref_gain", c.params.ref_gain},
                        {"waterfall_m", c.params.waterfall_m},
                        {"bs_tx_power_w", c.bs_tx_power},
                        {"bs_aggregation_energy_j", c.bs_aggregation_energy},
                        {"downlink_errors", c.downlink_errors}};
    } else {
        j["channel"] = "off";
    }
    j["radio"] = {{"tx_power_w", cfg.tx_power_per_device.empty() ? json(cfg.radio.tx_power)
                                                                 : json(cfg.tx_power_per_device)},
                  {"cpu_cycles_per_sample", cfg.radio.cpu_cycles_per_sample},
                  {"cpu_freq_hz", cfg.radio.cpu_freq},
                  {"eff_capacitance", cfg.radio.eff_capacitance}};

    const auto& d = cfg.data;
    json data = {{"source", d.source == DataSpec::Source::synthetic ? "synthetic" : "mnist"},
                 {"seed", d.synth.seed},
                 {"samples_per_device", d.synth.n_per_device},
                 {"dim", d.synth.dim},
                 {"classes", d.synth.classes},
                 {"shards_per_device", d.synth.shards_per_device},
                 {"separation", d.synth.separation},
                 {"test_samples", d.synth.test_samples}};
    if (d.source == DataSpec::Source::mnist) {
        data["mnist"] = {{"train_images", d.train_images.string()},
                         {"train_labels", d.train_labels.string()},
                         {"test_images", d.test_images.string()},
                         {"test_labels", d.test_labels.string()}};
    }
    j["data"] = data;
    j["model"] = {{"hidden", cfg.model.hidden},
                  {"init", to_string(cfg.model.init)},
                  {"init_seed", cfg.model.init_seed},
                  {"lr", cfg.model.train.lr},
                  {"local_steps", cfg.model.train.local_steps}};
    j["quantization"] = {{"bits", cfg.quant_bits ? json(*cfg.quant_bits) : json("off")},
                         {"rounding", to_string(cfg.quant_rounding)}};
    json sched = {{"policy", to_string(cfg.schedule.kind)}, {"k", cfg.schedule.k}};
    if (!cfg.schedule.p.empty()) sched["p"] = cfg.schedule.p;
    j["schedule"] = sched;
    j["metrics"] = {{"target_loss", cfg.target_loss ? json(*cfg.target_loss) : json("off")}};
    return j;
}

}  // namespace cfl::cli
