#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cfl/model.hpp"
#include "cfl/protocol.hpp"
#include "cfl/report.hpp"

namespace cfl {

// First cumulative simulated time at which the network-average model's loss
// is <= target; nullopt when never reached.
std::optional<double> convergence_time(std::span<const RoundReport> series, double target_loss);

struct EnergyTotals {
    std::vector<EnergyLedger> per_device;
    EnergyLedger bs;
    EnergyLedger network;  // sum of devices and BS
};

EnergyTotals energy_totals(std::span<const RoundReport> series);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

// Wilson score interval; z = 1.959964 gives 95%.
Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.959963984540054);

struct ReliabilityEstimate {
    double target_loss = 0.0;
    double time_budget = 0.0;
    std::size_t n_trials = 0;
    std::size_t successes = 0;
    std::size_t aborted = 0;
    double estimate = 0.0;
    Interval ci95;
    std::vector<char> outcomes;  // per trial, in seed order
};

// Trial t runs cfg with seed base_seed + t. Data and model init stay fixed so
// only channel and scheduling randomness varies across trials.
ReliabilityEstimate reliability(const ScenarioConfig& cfg, double target_loss, double time_budget,
                                std::size_t n_trials, std::uint64_t base_seed, std::size_t workers = 1);

struct Evaluation {
    double loss = 0.0;
    double accuracy = 0.0;
};

Evaluation evaluate_model(const ModelParams& p, const Dataset& test);

struct NetworkEvaluation {
    Evaluation average;               // the network-average model
    std::vector<Evaluation> devices;  // each device's own model
};

NetworkEvaluation evaluate_network(std::span<const ModelParams> device_models, const Dataset& test);

}  // namespace cfl
