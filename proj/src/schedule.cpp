#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "cfl/protocol.hpp"
#include "cfl/rng.hpp"

namespace cfl {

std::string_view to_string(SchedulePolicy::Kind k) {
    switch (k) {
        case SchedulePolicy::Kind::all: return "all";
        case SchedulePolicy::Kind::uniform_k: return "uniform";
        case SchedulePolicy::Kind::probabilistic: return "probabilistic";
        case SchedulePolicy::Kind::sample_weighted: return "sample_weighted";
    }
    return "unknown";
}

SchedulePolicy::Kind schedule_kind_from_string(std::string_view s) {
    if (s == "all") return SchedulePolicy::Kind::all;
    if (s == "uniform" || s == "uniform_k") return SchedulePolicy::Kind::uniform_k;
    if (s == "probabilistic") return SchedulePolicy::Kind::probabilistic;
    if (s == "sample_weighted") return SchedulePolicy::Kind::sample_weighted;
    throw std::invalid_argument("unknown schedule policy '" + std::string(s) + "'");
}

void SchedulePolicy::validate(std::size_t n) const {
    switch (kind) {
        case Kind::all:
            break;
        case Kind::uniform_k:
        case Kind::sample_weighted:
            if (k > n) {
                throw std::invalid_argument("schedule: k = " + std::to_string(k) + " exceeds " + std::to_string(n) +
                                            " devices");
            }
            break;
        case Kind::probabilistic:
            if (p.size() != 1 && p.size() != n) {
                throw std::invalid_argument("schedule: p needs one value or one per device");
            }
            for (double v : p) {
                if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("schedule: p must lie in [0, 1]");
            }
            break;
    }
}

std::vector<std::size_t> schedule(const SchedulePolicy& policy, std::size_t n, std::uint64_t seed, std::size_t round,
                                  std::span<const std::size_t> sample_counts) {
    policy.validate(n);
    std::vector<std::size_t> out;
    switch (policy.kind) {
        case SchedulePolicy::Kind::all:
            out.resize(n);
            std::iota(out.begin(), out.end(), std::size_t{0});
            break;
        case SchedulePolicy::Kind::uniform_k: {
            std::vector<std::size_t> ids(n);
            std::iota(ids.begin(), ids.end(), std::size_t{0});
            auto rng = substream(seed, Stream::schedule, round);
            for (std::size_t i = 0; i < policy.k; ++i) {
                std::uniform_int_distribution<std::size_t> pick(i, n - 1);
                std::swap(ids[i], ids[pick(rng)]);
            }
            out.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(policy.k));
            break;
        }
        case SchedulePolicy::Kind::probabilistic:
            for (std::size_t i = 0; i < n; ++i) {
                const double p = policy.p.size() == 1 ? policy.p[0] : policy.p[i];
                if (uniform01(substream_key(seed, Stream::schedule, round, i)) < p) out.push_back(i);
            }
            break;
        case SchedulePolicy::Kind::sample_weighted: {
            if (sample_counts.size() != n) {
                throw std::invalid_argument("schedule: sample_weighted needs one sample count per device");
            }
            std::vector<double> weight(sample_counts.begin(), sample_counts.end());
            auto rng = substream(seed, Stream::schedule, round);
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            for (std::size_t draw = 0; draw < policy.k; ++draw) {
                const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
                std::size_t chosen = n;
                if (total > 0.0) {
                    double u = unit(rng) * total;
                    for (std::size_t i = 0; i < n; ++i) {
                        if (weight[i] <= 0.0) continue;
                        chosen = i;
                        if (u < weight[i]) break;
                        u -= weight[i];
                    }
                } else {
                    // Only zero-weight devices remain; take them in index order.
                    for (std::size_t i = 0; i < n; ++i) {
                        if (weight[i] == 0.0) {
                            chosen = i;
                            break;
                        }
                    }
                }
                out.push_back(chosen);
                weight[chosen] = -1.0;
            }
            break;
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace cfl
