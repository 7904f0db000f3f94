#include "cfl/model.hpp"

#include <cmath>
#include <deque>
#include <random>

namespace cfl {

namespace {

std::vector<std::uint32_t> device_labels(std::size_t device, std::size_t shards, std::size_t classes) {
    std::vector<std::uint32_t> labels;
    for (std::size_t t = 0; t < shards; ++t) {
        labels.push_back(static_cast<std::uint32_t>((device * shards + t) % classes));
    }
    return labels;
}

void check_shards(std::size_t shards, std::size_t classes) {
    if (shards == 0 || shards > classes) {
        throw std::invalid_argument("infeasible shard allocation: " + std::to_string(shards) +
                                    " shards per device with " + std::to_string(classes) + " classes");
    }
}

}  // namespace

FederatedData synth_data(const SynthSpec& spec) {
    check_shards(spec.shards_per_device, spec.classes);
    if (spec.n_devices == 0) throw std::invalid_argument("synth_data: need at least one device");
    if (spec.dim < spec.classes) {
        throw std::invalid_argument("synth_data: dim must be >= classes to place class means on a simplex");
    }
    const double sep = spec.separation > 0.0 ? spec.separation : 4.0 * std::sqrt(static_cast<double>(spec.dim));

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    auto draw = [&](std::uint32_t label, std::vector<double>& f) {
        for (std::size_t k = 0; k < spec.dim; ++k) {
            f.push_back(noise(rng) + (k == label ? sep : 0.0));
        }
    };

    FederatedData out;
    for (std::size_t i = 0; i < spec.n_devices; ++i) {
        const auto labels = device_labels(i, spec.shards_per_device, spec.classes);
        std::vector<double> f;
        std::vector<std::uint32_t> l;
        f.reserve(spec.n_per_device * spec.dim);
        for (std::size_t t = 0; t < spec.n_per_device; ++t) {
            const auto y = labels[t % labels.size()];
            draw(y, f);
            l.push_back(y);
        }
        out.devices.emplace_back(spec.dim, spec.classes, std::move(f), std::move(l));
    }
    std::vector<double> f;
    std::vector<std::uint32_t> l;
    for (std::size_t t = 0; t < spec.test_samples; ++t) {
        const auto y = static_cast<std::uint32_t>(t % spec.classes);
        draw(y, f);
        l.push_back(y);
    }
    out.test = Dataset(spec.dim, spec.classes, std::move(f), std::move(l));
    return out;
}

std::vector<Dataset> partition_by_label(const Dataset& pool, std::size_t n_devices, std::size_t n_per_device,
                                        std::size_t shards_per_device) {
    check_shards(shards_per_device, pool.classes());
    std::vector<std::deque<std::size_t>> by_label(pool.classes());
    for (std::size_t n = 0; n < pool.size(); ++n) by_label[pool.label(n)].push_back(n);

    std::vector<Dataset> out;
    for (std::size_t i = 0; i < n_devices; ++i) {
        const auto labels = device_labels(i, shards_per_device, pool.classes());
        std::vector<std::size_t> picked;
        for (std::size_t t = 0; t < n_per_device; ++t) {
            auto& q = by_label[labels[t % labels.size()]];
            if (q.empty()) {
                throw std::invalid_argument("infeasible shard allocation: pool ran out of label " +
                                            std::to_string(labels[t % labels.size()]));
            }
            picked.push_back(q.front());
            q.pop_front();
        }
        out.push_back(pool.subset(picked));
    }
    return out;
}

}  // namespace cfl
