#include "cfl/graph.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>

namespace cfl {

double distance(const Point& a, const Point& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

std::string_view to_string(TopologyKind kind) {
    switch (kind) {
        case TopologyKind::path: return "path";
        case TopologyKind::complete: return "complete";
        case TopologyKind::star: return "star";
        case TopologyKind::grid: return "grid";
        case TopologyKind::custom: return "custom";
    }
    return "unknown";
}

TopologyKind topology_from_string(std::string_view name) {
    if (name == "path") return TopologyKind::path;
    if (name == "complete") return TopologyKind::complete;
    if (name == "star") return TopologyKind::star;
    if (name == "grid") return TopologyKind::grid;
    if (name == "custom") return TopologyKind::custom;
    throw std::invalid_argument("unknown topology '" + std::string(name) + "'");
}

NetworkGraph::NetworkGraph(std::size_t n_devices, std::vector<Edge> edges, bool has_bs)
    : n_devices_(n_devices), has_bs_(has_bs) {
    const std::size_t nv = n_vertices();
    for (auto& [a, b] : edges) {
        if (a == b) {
            throw std::invalid_argument("self-loop at vertex " + std::to_string(a));
        }
        if (a >= nv || b >= nv) {
            throw std::invalid_argument("edge (" + std::to_string(a) + "," + std::to_string(b) +
                                        ") references a vertex outside [0," + std::to_string(nv) + ")");
        }
        if (a > b) std::swap(a, b);
    }
    std::sort(edges.begin(), edges.end());
    if (auto dup = std::adjacent_find(edges.begin(), edges.end()); dup != edges.end()) {
        throw std::invalid_argument("duplicate edge (" + std::to_string(dup->first) + "," +
                                    std::to_string(dup->second) + ")");
    }
    edges_ = std::move(edges);
    adjacency_.assign(nv, {});
    for (const auto& [a, b] : edges_) {
        adjacency_[a].push_back(b);
        adjacency_[b].push_back(a);
    }
    for (auto& nb : adjacency_) std::sort(nb.begin(), nb.end());
}

std::size_t NetworkGraph::bs_index() const {
    if (!has_bs_) throw std::logic_error("graph has no BS vertex");
    return n_devices_;
}

bool NetworkGraph::has_edge(std::size_t a, std::size_t b) const {
    if (a > b) std::swap(a, b);
    return std::binary_search(edges_.begin(), edges_.end(), Edge{a, b});
}

NetworkGraph NetworkGraph::with_positions(std::vector<Point> positions) const {
    if (!positions.empty() && positions.size() != n_vertices()) {
        throw std::invalid_argument("expected " + std::to_string(n_vertices()) + " positions, got " +
                                    std::to_string(positions.size()));
    }
    NetworkGraph g = *this;
    g.positions_ = std::move(positions);
    return g;
}

NetworkGraph NetworkGraph::with_bs(std::optional<Point> bs_position) const {
    if (has_bs_) throw std::logic_error("graph already has a BS vertex");
    NetworkGraph g(n_devices_, edges_, true);
    if (!positions_.empty()) {
        g.positions_ = positions_;
        g.positions_.push_back(bs_position.value_or(Point{}));
    }
    return g;
}

NetworkGraph NetworkGraph::devices_only() const {
    if (!has_bs_) return *this;
    std::vector<Edge> kept;
    for (const auto& e : edges_) {
        if (e.second < n_devices_) kept.push_back(e);
    }
    NetworkGraph g(n_devices_, std::move(kept), false);
    if (!positions_.empty()) {
        g.positions_.assign(positions_.begin(), positions_.begin() + static_cast<std::ptrdiff_t>(n_devices_));
    }
    return g;
}

NetworkGraph build_topology(TopologyKind kind, std::size_t n, const TopologyParams& params) {
    if (n < 1) throw std::invalid_argument("topology needs at least one device");
    std::vector<Edge> edges;
    switch (kind) {
        case TopologyKind::path:
            for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
            break;
        case TopologyKind::complete:
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j) edges.emplace_back(i, j);
            break;
        case TopologyKind::star:
            for (std::size_t i = 1; i < n; ++i) edges.emplace_back(0, i);
            break;
        case TopologyKind::grid: {
            const std::size_t r = params.grid_rows, c = params.grid_cols;
            if (r * c != n) {
                throw std::invalid_argument("grid " + std::to_string(r) + "x" + std::to_string(c) +
                                            " does not hold " + std::to_string(n) + " devices");
            }
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    const std::size_t v = i * c + j;
                    if (j + 1 < c) edges.emplace_back(v, v + 1);
                    if (i + 1 < r) edges.emplace_back(v, v + c);
                }
            }
            break;
        }
        case TopologyKind::custom:
            return NetworkGraph(n, params.edges, params.with_bs);
    }
    return NetworkGraph(n, std::move(edges));
}

bool is_connected(const NetworkGraph& g) {
    const std::size_t nv = g.n_vertices();
    if (nv == 0) return false;
    std::vector<char> seen(nv, 0);
    std::queue<std::size_t> frontier;
    frontier.push(0);
    seen[0] = 1;
    std::size_t reached = 1;
    while (!frontier.empty()) {
        const std::size_t v = frontier.front();
        frontier.pop();
        for (std::size_t u : g.neighbors(v)) {
            if (!seen[u]) {
                seen[u] = 1;
                ++reached;
                frontier.push(u);
            }
        }
    }
    return reached == nv;
}

std::string_view to_string(MixingKind kind) {
    switch (kind) {
        case MixingKind::metropolis: return "metropolis";
        case MixingKind::lazy_metropolis: return "lazy_metropolis";
        case MixingKind::uniform: return "uniform";
    }
    return "unknown";
}

MixingKind mixing_from_string(std::string_view name) {
    if (name == "metropolis") return MixingKind::metropolis;
    if (name == "lazy_metropolis" || name == "lazy-metropolis") return MixingKind::lazy_metropolis;
    if (name == "uniform") return MixingKind::uniform;
    throw std::invalid_argument("unknown mixing kind '" + std::string(name) + "'");
}

MixingMatrix::MixingMatrix(std::size_t n, std::vector<double> weights, MixingKind kind)
    : n_(n), weights_(std::move(weights)), kind_(kind) {
    if (weights_.size() != n_ * n_) {
        throw std::invalid_argument("mixing matrix needs n*n weights");
    }
}

MixingMatrix MixingMatrix::identity(std::size_t n, MixingKind kind) {
    std::vector<double> w(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) w[i * n + i] = 1.0;
    return MixingMatrix(n, std::move(w), kind);
}

std::vector<double> MixingMatrix::apply(std::span<const double> x) const {
    if (x.size() != n_) throw std::invalid_argument("vector length does not match mixing matrix");
    std::vector<double> y(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n_; ++j) acc += weights_[i * n_ + j] * x[j];
        y[i] = acc;
    }
    return y;
}

namespace {

// Off-diagonal weights from an edge rule; the diagonal absorbs 1 - row sum.
template <class EdgeWeight>
MixingMatrix from_edge_rule(const NetworkGraph& g, MixingKind kind, EdgeWeight&& edge_weight) {
    const std::size_t n = g.n_vertices();
    std::vector<double> w(n * n, 0.0);
    for (const auto& [a, b] : g.edges()) {
        const double v = edge_weight(a, b);
        w[a * n + b] = v;
        w[b * n + a] = v;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double off = 0.0;
        for (std::size_t j : g.neighbors(i)) off += w[i * n + j];
        w[i * n + i] = 1.0 - off;
    }
    return MixingMatrix(n, std::move(w), kind);
}

}  // namespace

MixingMatrix metropolis_weights(const NetworkGraph& g) {
    if (g.n_vertices() > 1 && !is_connected(g)) {
        std::cerr << "warning: building Metropolis weights on a disconnected graph\n";
    }
    return from_edge_rule(g, MixingKind::metropolis, [&](std::size_t a, std::size_t b) {
        return 1.0 / (1.0 + static_cast<double>(std::max(g.degree(a), g.degree(b))));
    });
}

MixingMatrix uniform_weights(const NetworkGraph& g) {
    std::size_t max_degree = 0;
    for (std::size_t v = 0; v < g.n_vertices(); ++v) max_degree = std::max(max_degree, g.degree(v));
    const double v = 1.0 / (1.0 + static_cast<double>(max_degree));
    return from_edge_rule(g, MixingKind::uniform, [v](std::size_t, std::size_t) { return v; });
}

MixingMatrix lazify(const MixingMatrix& w) {
    const std::size_t n = w.size();
    std::vector<double> out(w.data());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double& x = out[i * n + j];
            x = (i == j) ? 0.5 + 0.5 * x : 0.5 * x;
        }
    }
    return MixingMatrix(n, std::move(out), MixingKind::lazy_metropolis);
}

MixingMatrix mixing_matrix(const NetworkGraph& g, MixingKind kind) {
    switch (kind) {
        case MixingKind::metropolis: return metropolis_weights(g);
        case MixingKind::lazy_metropolis: return lazify(metropolis_weights(g));
        case MixingKind::uniform: return uniform_weights(g);
    }
    throw std::invalid_argument("unknown mixing kind");
}

std::size_t iteration_bound(const BoundParams& p) {
    if (!(p.eps > 0.0)) throw std::invalid_argument("iteration bound needs eps > 0");
    if (!(p.constant > 0.0)) throw std::invalid_argument("iteration bound needs C > 0");
    if (p.g0_dist < 0.0 || p.grad_bound < 0.0 || p.p_n < 0.0) {
        throw std::invalid_argument("iteration bound inputs must be nonnegative");
    }
    const double g4 = std::pow(p.g0_dist, 4);
    const double l4p2 = std::pow(p.grad_bound, 4) * p.p_n * p.p_n;
    const double k = p.constant * std::max(g4, l4p2) / (p.eps * p.eps);
    // Shave a few ulps so exact quotients like 1/0.1^2 do not round up to 101.
    const double shaved = k * (1.0 - 8.0 * std::numeric_limits<double>::epsilon());
    const double ceiled = std::ceil(shaved);
    if (!std::isfinite(ceiled)) throw std::overflow_error("iteration bound overflows");
    return std::max<std::size_t>(1, static_cast<std::size_t>(ceiled));
}

double initial_average_distance(std::span<const std::vector<double>> initial_models,
                                std::span<const double> optimum) {
    if (initial_models.empty()) throw std::invalid_argument("no initial models");
    const std::size_t len = optimum.size();
    std::vector<double> mean(len, 0.0);
    for (const auto& m : initial_models) {
        if (m.size() != len) throw std::invalid_argument("model length mismatch");
        for (std::size_t k = 0; k < len; ++k) mean[k] += m[k];
    }
    double sq = 0.0;
    const double inv = 1.0 / static_cast<double>(initial_models.size());
    for (std::size_t k = 0; k < len; ++k) {
        const double d = mean[k] * inv - optimum[k];
        sq += d * d;
    }
    return std::sqrt(sq);
}

}  // namespace cfl
