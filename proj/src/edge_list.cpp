#include "cfl/graph.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace cfl {

namespace {

[[noreturn]] void fail(std::size_t line_no, const std::string& what) {
    throw std::invalid_argument("edge list line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

NetworkGraph parse_edge_list(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    bool in_positions = false;
    bool has_bs = false;
    std::optional<std::size_t> declared;
    std::vector<Edge> edges;
    std::map<std::size_t, Point> device_pos;
    std::optional<Point> bs_pos;

    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        std::string head;
        if (!(fields >> head)) continue;

        if (head == "positions") {
            in_positions = true;
            continue;
        }
        if (head == "devices") {
            std::size_t n = 0;
            if (!(fields >> n)) fail(line_no, "expected 'devices <n>'");
            declared = n;
            continue;
        }
        if (head == "bs") {
            has_bs = true;
            if (in_positions) {
                Point p;
                if (!(fields >> p.x >> p.y)) fail(line_no, "expected 'bs <x> <y>'");
                bs_pos = p;
            }
            continue;
        }

        std::size_t i = 0;
        try {
            std::size_t used = 0;
            i = std::stoul(head, &used);
            if (used != head.size()) throw std::invalid_argument(head);
        } catch (const std::exception&) {
            fail(line_no, "unrecognised token '" + head + "'");
        }
        if (in_positions) {
            Point p;
            if (!(fields >> p.x >> p.y)) fail(line_no, "expected '<i> <x> <y>'");
            device_pos[i] = p;
        } else {
            std::size_t j = 0;
            if (!(fields >> j)) fail(line_no, "expected '<i> <j>'");
            edges.emplace_back(i, j);
        }
        std::string extra;
        if (fields >> extra) fail(line_no, "trailing token '" + extra + "'");
    }

    std::size_t n = 0;
    if (declared) {
        n = *declared;
    } else {
        for (const auto& [a, b] : edges) n = std::max({n, a + 1, b + 1});
        for (const auto& [i, p] : device_pos) n = std::max(n, i + 1);
        // The highest index is the BS when one is declared without a device count.
        if (has_bs && n > 0) n -= 1;
    }
    if (n == 0) throw std::invalid_argument("edge list declares no devices");

    NetworkGraph g(n, std::move(edges), has_bs);
    if (!device_pos.empty() || bs_pos) {
        if (device_pos.size() != n) {
            throw std::invalid_argument("positions section covers " + std::to_string(device_pos.size()) +
                                        " of " + std::to_string(n) + " devices");
        }
        if (has_bs && !bs_pos) throw std::invalid_argument("positions section lacks 'bs <x> <y>'");
        std::vector<Point> pos;
        for (std::size_t i = 0; i < n; ++i) {
            auto it = device_pos.find(i);
            if (it == device_pos.end()) throw std::invalid_argument("no position for device " + std::to_string(i));
            pos.push_back(it->second);
        }
        if (has_bs) pos.push_back(*bs_pos);
        g = g.with_positions(std::move(pos));
    }
    return g;
}

NetworkGraph load_edge_list(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open edge list " + path.string());
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_edge_list(buf.str());
}

}  // namespace cfl
