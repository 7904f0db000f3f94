#include "cfl/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cfl/quant.hpp"
#include "cfl/rng.hpp"

namespace cfl {

std::string_view to_string(Mode m) {
    switch (m) {
        case Mode::cfl: return "cfl";
        case Mode::ofl: return "ofl";
        case Mode::hybrid: return "hybrid";
    }
    return "unknown";
}

Mode mode_from_string(std::string_view s) {
    if (s == "cfl") return Mode::cfl;
    if (s == "ofl") return Mode::ofl;
    if (s == "hybrid") return Mode::hybrid;
    throw std::invalid_argument("unknown mode '" + std::string(s) + "'");
}

std::string_view to_string(UpdateOrder o) {
    return o == UpdateOrder::train_then_mix ? "train_then_mix" : "mix_then_train";
}

UpdateOrder order_from_string(std::string_view s) {
    if (s == "train_then_mix") return UpdateOrder::train_then_mix;
    if (s == "mix_then_train") return UpdateOrder::mix_then_train;
    throw std::invalid_argument("unknown update order '" + std::string(s) + "'");
}

std::string_view to_string(InitMode m) {
    return m == InitMode::shared ? "shared" : "per_device";
}

InitMode init_mode_from_string(std::string_view s) {
    if (s == "shared") return InitMode::shared;
    if (s == "per_device") return InitMode::per_device;
    throw std::invalid_argument("unknown init mode '" + std::string(s) + "'");
}

std::string_view to_string(DropReason r) {
    switch (r) {
        case DropReason::none: return "delivered";
        case DropReason::error: return "error";
        case DropReason::budget: return "budget";
        case DropReason::unscheduled: return "unscheduled";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------

NetworkGraph GraphSpec::build() const {
    NetworkGraph g;
    if (topology == TopologyKind::custom && edge_file) {
        g = load_edge_list(*edge_file);
        if (devices != 0 && g.n_devices() != devices) {
            throw std::invalid_argument("edge file declares " + std::to_string(g.n_devices()) + " devices, scenario " +
                                        std::to_string(devices));
        }
        if (bs && !g.has_bs()) g = g.with_bs(bs);
    } else {
        TopologyParams tp;
        tp.grid_rows = grid_rows;
        tp.grid_cols = grid_cols;
        tp.edges = edges;
        tp.with_bs = bs.has_value();
        g = build_topology(topology, devices, tp);
        if (bs && !g.has_bs()) g = g.with_bs(std::nullopt);
    }
    if (!positions.empty()) {
        if (positions.size() != g.n_devices()) {
            throw std::invalid_argument("graph: " + std::to_string(positions.size()) + " positions for " +
                                        std::to_string(g.n_devices()) + " devices");
        }
        std::vector<Point> all = positions;
        if (g.has_bs()) {
            if (!bs) throw std::invalid_argument("graph: BS vertex needs a position");
            all.push_back(*bs);
        }
        g = g.with_positions(std::move(all));
    }
    return g;
}

DeviceRadio ScenarioConfig::radio_for(std::size_t device) const {
    DeviceRadio r = radio;
    if (!tx_power_per_device.empty()) r.tx_power = tx_power_per_device.at(device);
    return r;
}

void ScenarioConfig::validate() const {
    if (rounds < 1) throw std::invalid_argument("rounds must be >= 1");
    if (graph.devices < 1 && !(graph.topology == TopologyKind::custom && graph.edge_file)) {
        throw std::invalid_argument("graph.devices must be >= 1");
    }
    if ((mode == Mode::ofl || mode == Mode::hybrid) && !graph.bs) {
        throw std::invalid_argument(std::string(to_string(mode)) + " mode requires a BS vertex (graph.bs)");
    }
    if (delay_budget && !(*delay_budget > 0.0)) throw std::invalid_argument("delay_budget must be > 0");
    if (quant_bits && (*quant_bits < 1 || *quant_bits > 32)) throw std::invalid_argument("quantization R must be in [1, 32]");
    if (channel) {
        channel->params.validate();
        if (!(channel->bs_tx_power > 0.0)) throw std::invalid_argument("channel.bs_tx_power must be > 0");
        if (!(channel->bs_aggregation_energy >= 0.0)) throw std::invalid_argument("channel.bs_aggregation_energy must be >= 0");
    }
    radio.validate();
    if (!tx_power_per_device.empty()) {
        if (graph.devices != 0 && tx_power_per_device.size() != graph.devices) {
            throw std::invalid_argument("radio.tx_power needs one value per device");
        }
        for (double p : tx_power_per_device) {
            if (!(p > 0.0)) throw std::invalid_argument("radio.tx_power must be > 0");
        }
    }
    if (model.hidden < 1) throw std::invalid_argument("model.hidden must be >= 1");
    model.train.validate();
    schedule.validate(graph.devices);
    if (target_loss && !(*target_loss >= 0.0)) throw std::invalid_argument("target_loss must be >= 0");
}

// ---------------------------------------------------------------------------

std::vector<double> renormalized_row(const MixingMatrix& w, std::size_t i, std::span<const char> delivered_from) {
    auto src = w.row(i);
    std::vector<double> row(src.begin(), src.end());
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (j == i || row[j] == 0.0 || delivered_from[j]) continue;
        row[i] += row[j];
        row[j] = 0.0;
    }
    return row;
}

ModelParams fedavg(std::span<const ModelParams> models, std::span<const std::size_t> sample_counts) {
    if (models.empty()) throw std::invalid_argument("fedavg: no models");
    if (models.size() != sample_counts.size()) throw std::invalid_argument("fedavg: one sample count per model");
    double total = 0.0;
    for (auto c : sample_counts) total += static_cast<double>(c);
    if (!(total > 0.0)) throw std::invalid_argument("fedavg: zero total samples");
    ModelParams out = ModelParams::zeros(models.front().shapes);
    for (std::size_t m = 0; m < models.size(); ++m) {
        if (models[m].theta.size() != out.theta.size()) throw std::invalid_argument("fedavg: shape mismatch");
        const double a = static_cast<double>(sample_counts[m]) / total;
        for (std::size_t k = 0; k < out.theta.size(); ++k) out.theta[k] += a * models[m].theta[k];
    }
    return out;
}

ModelParams average_model(std::span<const ModelParams> models) {
    if (models.empty()) throw std::invalid_argument("average_model: no models");
    ModelParams out = ModelParams::zeros(models.front().shapes);
    for (const auto& m : models) {
        if (m.theta.size() != out.theta.size()) throw std::invalid_argument("average_model: shape mismatch");
        for (std::size_t k = 0; k < out.theta.size(); ++k) out.theta[k] += m.theta[k];
    }
    const double inv = 1.0 / static_cast<double>(models.size());
    for (double& v : out.theta) v *= inv;
    return out;
}

double disagreement(std::span<const ModelParams> models) {
    const ModelParams mean = average_model(models);
    double sq = 0.0;
    for (const auto& m : models) {
        for (std::size_t k = 0; k < m.theta.size(); ++k) {
            const double d = m.theta[k] - mean.theta[k];
            sq += d * d;
        }
    }
    return std::sqrt(sq);
}

// ---------------------------------------------------------------------------

RoundContext make_context(const ScenarioConfig& cfg, std::vector<Dataset> device_data) {
    cfg.validate();
    const NetworkGraph full = cfg.graph.build();
    const std::size_t n = full.n_devices();
    if (device_data.size() != n) {
        throw std::invalid_argument("expected data for " + std::to_string(n) + " devices, got " +
                                    std::to_string(device_data.size()));
    }

    RoundContext ctx;
    ctx.mode = cfg.mode;
    ctx.n_devices = n;
    switch (cfg.mode) {
        case Mode::cfl:
            ctx.graph = full.devices_only();
            break;
        case Mode::hybrid:
            ctx.graph = full;
            ctx.bs = n;
            if (full.degree(n) == 0) throw std::invalid_argument("hybrid mode needs at least one device-BS link");
            break;
        case Mode::ofl: {
            std::vector<Edge> uplinks;
            for (std::size_t i = 0; i < n; ++i) uplinks.emplace_back(i, n);
            ctx.graph = NetworkGraph(n, std::move(uplinks), true);
            if (full.has_positions()) ctx.graph = ctx.graph.with_positions(full.positions());
            ctx.bs = n;
            break;
        }
    }
    ctx.mixing = cfg.mode == Mode::ofl ? MixingMatrix::identity(ctx.graph.n_vertices())
                                       : mixing_matrix(ctx.graph, cfg.mixing);
    ctx.data = std::move(device_data);
    ctx.train = cfg.model.train;
    ctx.quant_bits = cfg.quant_bits;
    ctx.quant_rounding = cfg.quant_rounding;
    ctx.schedule = cfg.schedule;
    ctx.schedule.validate(n);
    ctx.delay_budget = cfg.delay_budget;
    ctx.order = cfg.order;
    ctx.seed = cfg.seed;
    for (std::size_t i = 0; i < n; ++i) ctx.radios.push_back(cfg.radio_for(i));

    const std::size_t nv = ctx.n_vertices();
    ctx.links.assign(nv * nv, LinkStats{std::numeric_limits<double>::infinity(),
                                        std::numeric_limits<double>::infinity(), 0.0, 0.0});
    if (cfg.channel) {
        ctx.channel = *cfg.channel;
        ctx.ideal_links = false;
        if (!ctx.graph.has_positions()) throw std::invalid_argument("channel model needs device positions");
        const Shapes shapes{ctx.data.front().dim(), cfg.model.hidden, ctx.data.front().classes()};
        const double payload = cfg.quant_bits
                                   ? static_cast<double>(payload_bits(shapes.param_count(), *cfg.quant_bits))
                                   : static_cast<double>(raw_bits_per_param * shapes.param_count());
        for (const auto& [a, b] : ctx.graph.edges()) {
            const double d = distance(ctx.graph.position(a), ctx.graph.position(b));
            for (auto [from, to] : {std::pair{a, b}, std::pair{b, a}}) {
                const double power = (ctx.bs && from == *ctx.bs) ? ctx.channel.bs_tx_power : ctx.radios[from].tx_power;
                ctx.links[from * nv + to] = link_stats(d, power, payload, ctx.channel.params);
            }
        }
    }
    return ctx;
}

NetworkState initial_state(const ScenarioConfig& cfg, const RoundContext& ctx) {
    const Shapes shapes{ctx.data.front().dim(), cfg.model.hidden, ctx.data.front().classes()};
    NetworkState st;
    const std::size_t nv = ctx.n_vertices();
    if (cfg.model.init == InitMode::shared) {
        st.models.assign(nv, init_params(cfg.model.init_seed, shapes));
    } else {
        for (std::size_t v = 0; v < nv; ++v) {
            st.models.push_back(init_params(substream_key(cfg.model.init_seed, Stream::model_init, 0, v), shapes));
        }
    }
    return st;
}

namespace {

struct Transmitter {
    const RoundContext& ctx;
    RoundOutcome& out;
    std::size_t round;
    std::vector<double> max_out;  // slowest transmitted link per vertex

    Transmitter(const RoundContext& c, RoundOutcome& o, std::size_t r)
        : ctx(c), out(o), round(r), max_out(c.n_vertices(), 0.0) {}

    void charge(std::size_t from, double delay) {
        if (ctx.bs && from == *ctx.bs) {
            out.bs_energy.global_tx += tx_energy(ctx.channel.bs_tx_power, delay);
        } else {
            out.device_energy[from].tx += tx_energy(ctx.radios[from].tx_power, delay);
        }
    }

    // One unicast transmission; budget check, energy, then the packet-error draw.
    DropReason send(std::size_t from, std::size_t to, bool budgeted) {
        const std::size_t nv = ctx.n_vertices();
        const std::size_t k = from * nv + to;
        const LinkStats& l = ctx.link(from, to);
        out.link_used[k] = 1;
        if (budgeted && ctx.delay_budget && l.delay > *ctx.delay_budget) {
            return out.link_status[k] = DropReason::budget;
        }
        charge(from, l.delay);
        max_out[from] = std::max(max_out[from], l.delay);
        if (l.per > 0.0 && uniform01(substream_key(ctx.seed, Stream::uplink_error, round, k)) < l.per) {
            return out.link_status[k] = DropReason::error;
        }
        return out.link_status[k] = DropReason::none;
    }
};

RoundOutcome blank_outcome(const NetworkState& state, const RoundContext& ctx) {
    if (ctx.n_devices == 0) throw std::invalid_argument("round on an empty graph");
    RoundOutcome out;
    const std::size_t nv = ctx.n_vertices();
    out.link_status.assign(nv * nv, DropReason::none);
    out.link_used.assign(nv * nv, 0);
    out.device_energy.assign(ctx.n_devices, {});
    std::vector<std::size_t> counts;
    for (const auto& d : ctx.data) counts.push_back(d.size());
    out.scheduled = schedule(ctx.schedule, ctx.n_devices, ctx.seed, state.round, counts);
    return out;
}

ModelParams train_device(const ModelParams& m, std::size_t v, const RoundContext& ctx, RoundOutcome& out) {
    out.device_energy[v].comp += comp_energy(ctx.data[v].size(), ctx.train.local_steps, ctx.radios[v]);
    return gd_steps(m, ctx.data[v], ctx.train);
}

double device_comp_time(std::size_t v, const RoundContext& ctx) {
    return comp_time(ctx.data[v].size(), ctx.train.local_steps, ctx.radios[v]);
}

// What a receiver reconstructs from vertex `sender`'s transmission.
ModelParams on_the_wire(const ModelParams& m, std::size_t sender, std::size_t round, const RoundContext& ctx) {
    if (!ctx.quant_bits) return m;
    if (ctx.quant_rounding == Rounding::stochastic) {
        const auto key = substream_key(ctx.seed, Stream::quantization, round, sender);
        return ModelParams(m.shapes, decode(encode_stochastic(m.theta, *ctx.quant_bits, key)));
    }
    return ModelParams(m.shapes, decode(encode(m.theta, *ctx.quant_bits)));
}

}  // namespace

RoundOutcome cfl_round(const NetworkState& state, const RoundContext& ctx) {
    RoundOutcome out = blank_outcome(state, ctx);
    const std::size_t nv = ctx.n_vertices();
    std::vector<char> active(nv, 0);
    for (auto v : out.scheduled) active[v] = 1;
    if (ctx.bs) active[*ctx.bs] = 1;
    auto is_device = [&](std::size_t v) { return v < ctx.n_devices; };

    std::vector<ModelParams> local = state.models;
    if (ctx.order == UpdateOrder::train_then_mix) {
        for (std::size_t v = 0; v < ctx.n_devices; ++v) {
            if (active[v]) local[v] = train_device(local[v], v, ctx, out);
        }
    }
    std::vector<ModelParams> sent(nv);
    for (std::size_t v = 0; v < nv; ++v) {
        if (active[v]) sent[v] = on_the_wire(local[v], v, state.round, ctx);
    }

    Transmitter tx(ctx, out, state.round);
    for (std::size_t a = 0; a < nv; ++a) {
        for (std::size_t b : ctx.graph.neighbors(a)) {
            if (active[a]) {
                tx.send(a, b, true);
            } else {
                out.link_used[a * nv + b] = 1;
                out.link_status[a * nv + b] = DropReason::unscheduled;
            }
        }
    }

    out.models.reserve(nv);
    std::vector<char> delivered_from(nv, 0);
    for (std::size_t i = 0; i < nv; ++i) {
        for (std::size_t j = 0; j < nv; ++j) delivered_from[j] = out.delivered(j, i, nv);
        const auto row = renormalized_row(ctx.mixing, i, delivered_from);
        ModelParams mixed = ModelParams::zeros(local[i].shapes);
        for (std::size_t j = 0; j < nv; ++j) {
            if (row[j] == 0.0) continue;
            const auto& src = (j == i) ? local[i].theta : sent[j].theta;
            for (std::size_t k = 0; k < mixed.theta.size(); ++k) mixed.theta[k] += row[j] * src[k];
        }
        out.models.push_back(std::move(mixed));
    }
    if (ctx.order == UpdateOrder::mix_then_train) {
        for (std::size_t v = 0; v < ctx.n_devices; ++v) {
            if (active[v]) out.models[v] = train_device(out.models[v], v, ctx, out);
        }
    }

    for (std::size_t v = 0; v < nv; ++v) {
        if (!active[v]) continue;
        const double comp = is_device(v) ? device_comp_time(v, ctx) : 0.0;
        out.duration = std::max(out.duration, comp + tx.max_out[v]);
    }
    for (std::size_t v = 0; v < ctx.n_devices; ++v) {
        bool any = false;
        for (std::size_t b : ctx.graph.neighbors(v)) any = any || out.delivered(v, b, nv);
        out.participants += any;
    }
    if (ctx.bs) out.bs_energy.agg += ctx.channel.bs_aggregation_energy;
    return out;
}

RoundOutcome ofl_round(const NetworkState& state, const RoundContext& ctx) {
    if (!ctx.bs) throw std::invalid_argument("OFL round needs a BS vertex");
    RoundOutcome out = blank_outcome(state, ctx);
    const std::size_t nv = ctx.n_vertices();
    const std::size_t bs = *ctx.bs;

    std::vector<ModelParams> local = state.models;
    Transmitter tx(ctx, out, state.round);
    std::vector<ModelParams> delivered;
    std::vector<std::size_t> delivered_counts;
    double slowest_device = 0.0;
    for (std::size_t v : out.scheduled) {
        local[v] = train_device(local[v], v, ctx, out);
        if (tx.send(v, bs, true) == DropReason::none) {
            delivered.push_back(on_the_wire(local[v], v, state.round, ctx));
            delivered_counts.push_back(ctx.data[v].size());
        }
        slowest_device = std::max(slowest_device, device_comp_time(v, ctx) + tx.max_out[v]);
    }
    for (std::size_t v = 0; v < ctx.n_devices; ++v) {
        if (!std::binary_search(out.scheduled.begin(), out.scheduled.end(), v)) {
            out.link_used[v * nv + bs] = 1;
            out.link_status[v * nv + bs] = DropReason::unscheduled;
        }
    }
    out.participants = delivered.size();

    ModelParams global = state.models[bs];
    if (delivered.empty()) {
        out.aggregation_skipped = true;
    } else {
        global = fedavg(delivered, delivered_counts);
        out.bs_energy.agg += ctx.channel.bs_aggregation_energy;
    }

    // Single broadcast; it lasts as long as the slowest downlink.
    double downlink = 0.0;
    for (std::size_t v = 0; v < ctx.n_devices; ++v) downlink = std::max(downlink, ctx.link(bs, v).delay);
    if (!ctx.ideal_links) out.bs_energy.global_tx += tx_energy(ctx.channel.bs_tx_power, downlink);

    const ModelParams received = on_the_wire(global, bs, state.round, ctx);
    out.models.resize(nv);
    for (std::size_t v = 0; v < ctx.n_devices; ++v) {
        const std::size_t k = bs * nv + v;
        out.link_used[k] = 1;
        const double p = ctx.link(bs, v).per;
        if (ctx.channel.downlink_errors && p > 0.0 &&
            uniform01(substream_key(ctx.seed, Stream::downlink_error, state.round, v)) < p) {
            out.link_status[k] = DropReason::error;
            out.models[v] = std::move(local[v]);
        } else {
            out.models[v] = received;
        }
    }
    out.models[bs] = std::move(global);
    out.duration = slowest_device + downlink;
    return out;
}

RoundOutcome run_round(const NetworkState& state, const RoundContext& ctx) {
    return ctx.mode == Mode::ofl ? ofl_round(state, ctx) : cfl_round(state, ctx);
}

void advance(NetworkState& state, RoundOutcome&& outcome) {
    state.models = std::move(outcome.models);
    state.round += 1;
    state.sim_time += outcome.duration;
}

// ---------------------------------------------------------------------------

FederatedData load_data(const ScenarioConfig& cfg) {
    const std::size_t n = cfg.graph.build().n_devices();
    if (cfg.data.source == DataSpec::Source::synthetic) {
        SynthSpec s = cfg.data.synth;
        s.n_devices = n;
        return synth_data(s);
    }
    const Dataset pool = load_idx(cfg.data.train_images, cfg.data.train_labels);
    FederatedData out;
    out.devices = partition_by_label(pool, n, cfg.data.synth.n_per_device, cfg.data.synth.shards_per_device);
    Dataset test = load_idx(cfg.data.test_images, cfg.data.test_labels);
    if (cfg.data.synth.test_samples > 0 && cfg.data.synth.test_samples < test.size()) {
        std::vector<std::size_t> head(cfg.data.synth.test_samples);
        for (std::size_t i = 0; i < head.size(); ++i) head[i] = i;
        test = test.subset(head);
    }
    out.test = std::move(test);
    return out;
}

Simulation::Simulation(const ScenarioConfig& cfg) : Simulation(cfg, load_data(cfg)) {}

Simulation::Simulation(const ScenarioConfig& cfg, FederatedData data)
    : cfg_(cfg), data_(std::move(data)), ctx_(make_context(cfg, data_.devices)), state_(initial_state(cfg, ctx_)) {}

RoundReport Simulation::step() {
    RoundOutcome outcome = run_round(state_, ctx_);
    RoundReport r;
    r.duration = outcome.duration;
    r.participants = outcome.participants;
    r.device_energy = outcome.device_energy;
    r.bs_energy = outcome.bs_energy;
    last_ = outcome;
    advance(state_, std::move(outcome));
    r.round = state_.round;
    r.sim_time = state_.sim_time;

    const ModelParams avg = average_model(device_models());
    r.avg_model_loss = loss(avg, data_.test);
    r.avg_model_acc = accuracy(avg, data_.test);
    double sum = 0.0;
    for (std::size_t v = 0; v < ctx_.n_devices; ++v) sum += loss(state_.models[v], ctx_.data[v]);
    r.mean_device_loss = sum / static_cast<double>(ctx_.n_devices);
    if (!std::isfinite(r.avg_model_loss) || !std::isfinite(r.mean_device_loss)) {
        throw DivergenceError("training diverged: non-finite loss after round " + std::to_string(r.round));
    }
    return r;
}

ExperimentResult run_experiment(const ScenarioConfig& cfg) {
    return run_experiment(cfg, load_data(cfg));
}

ExperimentResult run_experiment(const ScenarioConfig& cfg, const FederatedData& data) {
    Simulation sim(cfg, data);
    ExperimentResult res;
    res.rounds.reserve(cfg.rounds);
    for (std::size_t t = 0; t < cfg.rounds; ++t) {
        try {
            res.rounds.push_back(sim.step());
        } catch (const DivergenceError& e) {
            res.abort_reason = "round " + std::to_string(t + 1) + ": " + e.what();
            break;
        }
    }
    return res;
}

double equivalence_check(const ScenarioConfig& a, const ScenarioConfig& b) {
    Simulation sa(a), sb(b);
    if (sa.context().n_devices != sb.context().n_devices) {
        throw std::invalid_argument("equivalence_check: device counts differ");
    }
    if (sa.device_models().front().shapes != sb.device_models().front().shapes) {
        throw std::invalid_argument("equivalence_check: model shapes differ");
    }
    const std::size_t rounds = std::min(a.rounds, b.rounds);
    double worst = 0.0;
    for (std::size_t t = 0; t < rounds; ++t) {
        sa.step();
        sb.step();
        auto ma = sa.device_models();
        auto mb = sb.device_models();
        for (std::size_t v = 0; v < ma.size(); ++v) {
            for (std::size_t k = 0; k < ma[v].theta.size(); ++k) {
                worst = std::max(worst, std::abs(ma[v].theta[k] - mb[v].theta[k]));
            }
        }
    }
    return worst;
}

}  // namespace cfl
