#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cfl/channel.hpp"
#include "cfl/graph.hpp"
#include "cfl/model.hpp"
#include "cfl/quant.hpp"
#include "cfl/report.hpp"

namespace cfl {

enum class Mode { cfl, ofl, hybrid };
enum class UpdateOrder { train_then_mix, mix_then_train };
enum class InitMode { shared, per_device };

std::string_view to_string(Mode m);
Mode mode_from_string(std::string_view s);
std::string_view to_string(UpdateOrder o);
UpdateOrder order_from_string(std::string_view s);
std::string_view to_string(InitMode m);
InitMode init_mode_from_string(std::string_view s);

// ---------------------------------------------------------------------------
// Scheduling

struct SchedulePolicy {
    enum class Kind { all, uniform_k, probabilistic, sample_weighted };
    Kind kind = Kind::all;
    std::size_t k = 0;       // uniform_k, sample_weighted
    std::vector<double> p;   // probabilistic: one value for all devices, or one per device

    void validate(std::size_t n) const;
};

std::string_view to_string(SchedulePolicy::Kind k);
SchedulePolicy::Kind schedule_kind_from_string(std::string_view s);

// Sorted device indices scheduled in `round`. sample_counts is only read by
// the sample-weighted policy.
std::vector<std::size_t> schedule(const SchedulePolicy& policy, std::size_t n, std::uint64_t seed, std::size_t round,
                                  std::span<const std::size_t> sample_counts = {});

// ---------------------------------------------------------------------------
// Scenario

struct GraphSpec {
    TopologyKind topology = TopologyKind::complete;
    std::size_t devices = 0;
    std::size_t grid_rows = 0;
    std::size_t grid_cols = 0;
    std::vector<Edge> edges;                 // custom
    std::optional<std::filesystem::path> edge_file;
    std::vector<Point> positions;            // devices only
    std::optional<Point> bs;

    NetworkGraph build() const;
};

struct ChannelConfig {
    ChannelParams params;
    double bs_tx_power = 1.0;         // W
    double bs_aggregation_energy = 0.0;  // J per round
    bool downlink_errors = false;
};

struct DataSpec {
    enum class Source { synthetic, mnist };
    Source source = Source::synthetic;
    SynthSpec synth;
    std::filesystem::path train_images, train_labels, test_images, test_labels;
};

struct ModelSpec {
    std::size_t hidden = 50;
    InitMode init = InitMode::shared;
    std::uint64_t init_seed = 1;
    TrainConfig train;
};

struct ScenarioConfig {
    Mode mode = Mode::cfl;
    std::size_t rounds = 1;
    std::uint64_t seed = 1;  // channel and scheduling randomness only
    UpdateOrder order = UpdateOrder::train_then_mix;
    std::optional<double> delay_budget;  // s per transmission
    GraphSpec graph;
    MixingKind mixing = MixingKind::lazy_metropolis;
    std::optional<ChannelConfig> channel;  // absent: ideal links
    DeviceRadio radio;
    std::vector<double> tx_power_per_device;  // overrides radio.tx_power when set
    DataSpec data;
    ModelSpec model;
    std::optional<unsigned> quant_bits;
    Rounding quant_rounding = Rounding::nearest;
    SchedulePolicy schedule;
    std::optional<double> target_loss;

    void validate() const;
    DeviceRadio radio_for(std::size_t device) const;
};

// ---------------------------------------------------------------------------
// Round engine

enum class DropReason : std::uint8_t { none, error, budget, unscheduled };
std::string_view to_string(DropReason r);

// Everything fixed for the duration of a run.
struct RoundContext {
    Mode mode = Mode::cfl;
    NetworkGraph graph;   // vertices taking part in mixing (BS included in hybrid)
    std::size_t n_devices = 0;
    std::optional<std::size_t> bs;  // vertex index of the BS in ofl/hybrid
    MixingMatrix mixing = MixingMatrix::identity(1);
    std::vector<Dataset> data;      // per device
    TrainConfig train;
    std::optional<unsigned> quant_bits;
    Rounding quant_rounding = Rounding::nearest;
    SchedulePolicy schedule;
    std::optional<double> delay_budget;
    UpdateOrder order = UpdateOrder::train_then_mix;
    std::uint64_t seed = 1;
    std::vector<DeviceRadio> radios;  // per device
    ChannelConfig channel;
    bool ideal_links = true;
    // links[from * n_vertices + to]; precomputed for the fixed payload size
    std::vector<LinkStats> links;

    std::size_t n_vertices() const noexcept { return n_devices + (bs ? 1 : 0); }
    const LinkStats& link(std::size_t from, std::size_t to) const { return links[from * n_vertices() + to]; }
};

struct NetworkState {
    std::vector<ModelParams> models;  // per vertex (devices, then BS)
    std::size_t round = 0;            // completed rounds
    double sim_time = 0.0;
};

struct RoundOutcome {
    std::vector<ModelParams> models;
    std::vector<std::size_t> scheduled;
    // Directed link status, indexed [from * n_vertices + to]; only links that
    // exist in the round's topology are meaningful.
    std::vector<DropReason> link_status;
    std::vector<char> link_used;
    double duration = 0.0;
    std::vector<EnergyLedger> device_energy;
    EnergyLedger bs_energy;
    std::size_t participants = 0;
    bool aggregation_skipped = false;  // OFL round with no delivered uplink

    bool delivered(std::size_t from, std::size_t to, std::size_t n_vertices) const {
        const std::size_t k = from * n_vertices + to;
        return link_used[k] && link_status[k] == DropReason::none;
    }
};

// Drop-renormalized row: weights of undelivered neighbours move onto the diagonal.
std::vector<double> renormalized_row(const MixingMatrix& w, std::size_t i, std::span<const char> delivered_from);

// Sample-count weighted average of the delivered models.
ModelParams fedavg(std::span<const ModelParams> models, std::span<const std::size_t> sample_counts);

RoundContext make_context(const ScenarioConfig& cfg, std::vector<Dataset> device_data);
NetworkState initial_state(const ScenarioConfig& cfg, const RoundContext& ctx);

RoundOutcome cfl_round(const NetworkState& state, const RoundContext& ctx);
RoundOutcome ofl_round(const NetworkState& state, const RoundContext& ctx);
RoundOutcome run_round(const NetworkState& state, const RoundContext& ctx);
void advance(NetworkState& state, RoundOutcome&& outcome);

// ---------------------------------------------------------------------------
// Experiment driver

FederatedData load_data(const ScenarioConfig& cfg);

ModelParams average_model(std::span<const ModelParams> models);

// sqrt(sum_i ||w_i - mean||^2): Euclidean disagreement across devices.
double disagreement(std::span<const ModelParams> models);

class Simulation {
public:
    explicit Simulation(const ScenarioConfig& cfg);
    Simulation(const ScenarioConfig& cfg, FederatedData data);

    RoundReport step();
    const RoundOutcome& last_outcome() const { return last_; }

    std::span<const ModelParams> device_models() const {
        return {state_.models.data(), ctx_.n_devices};
    }
    const NetworkState& state() const noexcept { return state_; }
    const RoundContext& context() const noexcept { return ctx_; }
    const FederatedData& data() const noexcept { return data_; }

private:
    ScenarioConfig cfg_;
    FederatedData data_;
    RoundContext ctx_;
    NetworkState state_;
    RoundOutcome last_;
};

struct ExperimentResult {
    std::vector<RoundReport> rounds;
    std::optional<std::string> abort_reason;
};

ExperimentResult run_experiment(const ScenarioConfig& cfg);
ExperimentResult run_experiment(const ScenarioConfig& cfg, const FederatedData& data);

// Max over rounds and devices of the L-infinity distance between the two
// runs' device models.
double equivalence_check(const ScenarioConfig& a, const ScenarioConfig& b);

}  // namespace cfl
