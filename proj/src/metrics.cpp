#include "cfl/metrics.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

#include "cfl/parallel.hpp"

namespace cfl {

std::optional<double> convergence_time(std::span<const RoundReport> series, double target_loss) {
    for (const auto& r : series) {
        if (r.avg_model_loss <= target_loss) return r.sim_time;
    }
    return std::nullopt;
}

EnergyTotals energy_totals(std::span<const RoundReport> series) {
    EnergyTotals t;
    for (const auto& r : series) {
        if (t.per_device.size() < r.device_energy.size()) t.per_device.resize(r.device_energy.size());
        for (std::size_t i = 0; i < r.device_energy.size(); ++i) t.per_device[i] += r.device_energy[i];
        t.bs += r.bs_energy;
    }
    t.network = t.bs;
    for (const auto& d : t.per_device) t.network += d;
    return t;
}

Interval wilson_interval(std::size_t successes, std::size_t trials, double z) {
    if (trials == 0) throw std::invalid_argument("wilson_interval: zero trials");
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double centre = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, std::min(p, centre - half)), std::min(1.0, std::max(p, centre + half))};
}

ReliabilityEstimate reliability(const ScenarioConfig& cfg, double target_loss, double time_budget,
                                std::size_t n_trials, std::uint64_t base_seed, std::size_t workers) {
    if (n_trials < 1) throw std::invalid_argument("reliability needs at least one trial");
    cfg.validate();
    const FederatedData data = load_data(cfg);

    ReliabilityEstimate est;
    est.target_loss = target_loss;
    est.time_budget = time_budget;
    est.n_trials = n_trials;
    est.outcomes.assign(n_trials, 0);
    std::vector<char> aborted(n_trials, 0);

    parallel_for(n_trials, workers, [&](std::size_t t) {
        ScenarioConfig trial = cfg;
        trial.seed = base_seed + t;
        const ExperimentResult res = run_experiment(trial, data);
        if (res.abort_reason) {
            aborted[t] = 1;
            std::cerr << "reliability: trial " << t << " aborted (" << *res.abort_reason << ")\n";
            return;
        }
        const auto when = convergence_time(res.rounds, target_loss);
        est.outcomes[t] = when && *when <= time_budget;
    });

    for (std::size_t t = 0; t < n_trials; ++t) {
        est.successes += est.outcomes[t] ? 1 : 0;
        est.aborted += aborted[t] ? 1 : 0;
    }
    est.estimate = static_cast<double>(est.successes) / static_cast<double>(n_trials);
    est.ci95 = wilson_interval(est.successes, n_trials);
    return est;
}

Evaluation evaluate_model(const ModelParams& p, const Dataset& test) {
    return {loss(p, test), accuracy(p, test)};
}

NetworkEvaluation evaluate_network(std::span<const ModelParams> device_models, const Dataset& test) {
    NetworkEvaluation out;
    out.average = evaluate_model(average_model(device_models), test);
    for (const auto& m : device_models) out.devices.push_back(evaluate_model(m, test));
    return out;
}

}  // namespace cfl
