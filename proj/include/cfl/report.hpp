#pragma once

#include <cstddef>
#include <vector>

namespace cfl {

// Energy in joules, split by where it is spent.
struct EnergyLedger {
    double tx = 0.0;         // local model transmission (devices)
    double comp = 0.0;       // local model update (devices)
    double global_tx = 0.0;  // global model transmission (BS)
    double agg = 0.0;        // global model aggregation (BS)

    double total() const noexcept { return tx + comp + global_tx + agg; }
    EnergyLedger& operator+=(const EnergyLedger& o) noexcept {
        tx += o.tx;
        comp += o.comp;
        global_tx += o.global_tx;
        agg += o.agg;
        return *this;
    }
    bool operator==(const EnergyLedger&) const = default;
};

struct RoundReport {
    std::size_t round = 0;        // 1-based
    double sim_time = 0.0;        // cumulative simulated seconds
    double duration = 0.0;        // this round only
    double avg_model_loss = 0.0;  // network-average model on held-out data
    double avg_model_acc = 0.0;
    double mean_device_loss = 0.0;  // each device's model on its own training data
    std::size_t participants = 0;
    std::vector<EnergyLedger> device_energy;  // this round, per device
    EnergyLedger bs_energy;                   // this round

    EnergyLedger network_energy() const {
        EnergyLedger e = bs_energy;
        for (const auto& d : device_energy) e += d;
        return e;
    }
};

}  // namespace cfl
