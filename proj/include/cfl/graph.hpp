#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cfl {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

double distance(const Point& a, const Point& b);

using Edge = std::pair<std::size_t, std::size_t>;

enum class TopologyKind { path, complete, star, grid, custom };

std::string_view to_string(TopologyKind kind);
TopologyKind topology_from_string(std::string_view name);

struct TopologyParams {
    std::size_t grid_rows = 0;
    std::size_t grid_cols = 0;
    std::vector<Edge> edges;  // custom only
    bool with_bs = false;     // custom only: edges may reference vertex n (the BS)
};

// Undirected device graph with an optional base-station vertex. When present
// the BS is vertex index n_devices() and holds no data.
class NetworkGraph {
public:
    NetworkGraph() = default;

    // Edges are canonicalised to (min, max), sorted, and validated: no
    // self-loops, no duplicates, endpoints inside the vertex set.
    NetworkGraph(std::size_t n_devices, std::vector<Edge> edges, bool has_bs = false);

    std::size_t n_devices() const noexcept { return n_devices_; }
    std::size_t n_vertices() const noexcept { return n_devices_ + (has_bs_ ? 1 : 0); }
    bool has_bs() const noexcept { return has_bs_; }
    std::size_t bs_index() const;

    const std::vector<Edge>& edges() const noexcept { return edges_; }
    bool has_edge(std::size_t a, std::size_t b) const;
    const std::vector<std::size_t>& neighbors(std::size_t v) const { return adjacency_.at(v); }
    std::size_t degree(std::size_t v) const { return adjacency_.at(v).size(); }

    bool has_positions() const noexcept { return !positions_.empty(); }
    // One position per vertex (BS last, when present).
    const std::vector<Point>& positions() const noexcept { return positions_; }
    const Point& position(std::size_t v) const { return positions_.at(v); }
    NetworkGraph with_positions(std::vector<Point> positions) const;

    // Adds a BS vertex (no edges) at the given position; device positions must
    // already be set or be supplied later through with_positions.
    NetworkGraph with_bs(std::optional<Point> bs_position) const;

    // Induced subgraph over devices only (drops the BS vertex and its links).
    NetworkGraph devices_only() const;

private:
    std::size_t n_devices_ = 0;
    bool has_bs_ = false;
    std::vector<Edge> edges_;
    std::vector<std::vector<std::size_t>> adjacency_;
    std::vector<Point> positions_;
};

NetworkGraph build_topology(TopologyKind kind, std::size_t n, const TopologyParams& params = {});

bool is_connected(const NetworkGraph& g);

// Edge-list text format:
//   # comment
//   devices <n>            optional, otherwise max index + 1
//   bs                     optional, declares BS vertex at index n
//   <i> <j>                one undirected link per line
//   positions              switches to the positions section
//   <i> <x> <y>            meters; "bs <x> <y>" places the BS
NetworkGraph parse_edge_list(std::string_view text);
NetworkGraph load_edge_list(const std::filesystem::path& path);

enum class MixingKind { metropolis, lazy_metropolis, uniform };

std::string_view to_string(MixingKind kind);
MixingKind mixing_from_string(std::string_view name);

// Dense row-major n x n aggregation weights.
class MixingMatrix {
public:
    MixingMatrix(std::size_t n, std::vector<double> weights, MixingKind kind);

    static MixingMatrix identity(std::size_t n, MixingKind kind = MixingKind::metropolis);

    std::size_t size() const noexcept { return n_; }
    MixingKind kind() const noexcept { return kind_; }
    double operator()(std::size_t i, std::size_t j) const { return weights_[i * n_ + j]; }
    std::span<const double> row(std::size_t i) const { return {weights_.data() + i * n_, n_}; }
    const std::vector<double>& data() const noexcept { return weights_; }

    // y = W x for a vector of per-vertex scalars.
    std::vector<double> apply(std::span<const double> x) const;

private:
    std::size_t n_;
    std::vector<double> weights_;
    MixingKind kind_;
};

// w_ij = 1 / (1 + max(deg_i, deg_j)) on edges, diagonal takes the remainder.
// Prints a warning to stderr when g is disconnected.
MixingMatrix metropolis_weights(const NetworkGraph& g);

// Max-degree rule: w_ij = 1 / (1 + max degree) on edges. All 1/n on a
// complete graph.
MixingMatrix uniform_weights(const NetworkGraph& g);

// (I + W) / 2
MixingMatrix lazify(const MixingMatrix& w);

MixingMatrix mixing_matrix(const NetworkGraph& g, MixingKind kind);

struct EigenOptions {
    std::size_t max_iterations = 10000;
    double tolerance = 1e-10;
};

// Largest |lambda| of a symmetric doubly stochastic W on the complement of the
// all-ones vector. Results within the tolerance of 1 are reported as exactly 1.
double second_eigenvalue(const MixingMatrix& w, const EigenOptions& opts = {});

// Inverse spectral gap 1 / (1 - sigma2). Throws on a disconnected graph.
double spectral_pn(const MixingMatrix& w, const EigenOptions& opts = {});

struct BoundParams {
    double g0_dist = 0.0;  // Euclidean distance between the initial average model and w*
    double grad_bound = 0.0;
    double p_n = 0.0;
    double eps = 1.0;
    double constant = 1.0;
};

// ceil(C * max(g0^4, L^4 P_n^2) / eps^2), at least 1.
std::size_t iteration_bound(const BoundParams& p);

// || (1/n) sum_i w_i - w* ||_2
double initial_average_distance(std::span<const std::vector<double>> initial_models,
                                std::span<const double> optimum);

}  // namespace cfl
