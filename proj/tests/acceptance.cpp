// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "cfl/cli.hpp"
#include "cfl/metrics.hpp"
#include "cfl/parallel.hpp"
#include "cfl/quant.hpp"
#include "oracles.hpp"

using namespace cfl;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

ScenarioConfig scenario(const char* name) { return cli::load_scenario(fs::path(CFL_SCENARIO_DIR) / name); }

ScenarioConfig reseeded(ScenarioConfig c, std::uint64_t s) {
    c.seed = s;
    c.data.synth.seed = s;
    c.model.init_seed = s;
    return c;
}

NetworkGraph topology(TopologyKind kind, std::size_t n) {
    TopologyParams p;
    if (kind == TopologyKind::grid) {
        std::size_t rows = 1;
        for (std::size_t r = 1; r * r <= n; ++r) {
            if (n % r == 0) rows = r;
        }
        p.grid_rows = rows;
        p.grid_cols = n / rows;
    }
    return build_topology(kind, n, p);
}

// Zero-gradient consensus run on a canonical topology.
ScenarioConfig consensus_cfg(TopologyKind kind, std::size_t n, std::size_t rounds) {
    ScenarioConfig c;
    c.rounds = rounds;
    c.graph.topology = kind;
    c.graph.devices = n;
    if (kind == TopologyKind::grid) {
        c.graph.grid_rows = 4;
        c.graph.grid_cols = n / 4;
    }
    c.mixing = MixingKind::lazy_metropolis;
    c.data.synth.n_per_device = 10;
    c.data.synth.dim = 4;
    c.data.synth.classes = 3;
    c.data.synth.shards_per_device = 1;
    c.data.synth.test_samples = 10;
    c.model.hidden = 5;
    c.model.init = InitMode::per_device;
    c.model.train = {0.0, 1};
    return c;
}

// Criterion 1
Verdict mixing_suite() {
    Verdict v;
    std::size_t checked = 0;
    double worst_row = 0.0;
    for (auto kind : {TopologyKind::path, TopologyKind::grid, TopologyKind::star, TopologyKind::complete}) {
        for (std::size_t n = 2; n <= 64; ++n) {
            const auto g = topology(kind, n);
            for (auto mk : {MixingKind::metropolis, MixingKind::lazy_metropolis}) {
                const auto w = mixing_matrix(g, mk);
                for (std::size_t i = 0; i < n; ++i) {
                    double sum = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        sum += w(i, j);
                        if (w(i, j) != w(j, i) || w(i, j) < 0.0) v.pass = false;
                        if (i != j && w(i, j) > 0.0 && !g.has_edge(i, j)) v.pass = false;
                    }
                    worst_row = std::max(worst_row, std::abs(sum - 1.0));
                    if (mk == MixingKind::lazy_metropolis && w(i, i) < 0.5) v.pass = false;
                }
                const double s2 = second_eigenvalue(w);
                if (mk == MixingKind::lazy_metropolis && !(s2 < 1.0)) v.pass = false;
                if (std::abs(s2 - oracle::sigma2(w)) > 1e-6) v.pass = false;
                ++checked;
            }
        }
    }
    if (worst_row > 1e-12) v.pass = false;
    // disconnected graphs must report sigma2 = 1
    for (std::size_t n = 2; n <= 64; n += 7) {
        std::vector<Edge> edges;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (i + 1 != n / 2) edges.emplace_back(i, i + 1);
        }
        const NetworkGraph split(n, edges);
        if (second_eigenvalue(lazify(metropolis_weights(split))) != 1.0 || is_connected(split)) v.pass = false;
    }
    v.detail = std::to_string(checked) + " matrices, max row-sum error " + fmt("%.2e", worst_row);
    return v;
}

// Criterion 2
Verdict contraction() {
    Verdict v;
    const auto c = consensus_cfg(TopologyKind::path, 10, 200);
    Simulation sim(c);
    const double s2 = second_eigenvalue(sim.context().mixing);
    const auto mean0 = average_model(sim.device_models());
    double prev = disagreement(sim.device_models());
    double worst_factor = 0.0, drift = 0.0;
    for (int t = 0; t < 200; ++t) {
        sim.step();
        const double spread = disagreement(sim.device_models());
        worst_factor = std::max(worst_factor, spread / prev);
        prev = spread;
        const auto mean = average_model(sim.device_models());
        for (std::size_t k = 0; k < mean.theta.size(); ++k) drift = std::max(drift, std::abs(mean.theta[k] - mean0.theta[k]));
    }
    v.pass = worst_factor <= s2 + 1e-6 && drift < 1e-10;
    v.detail = "sigma2 " + fmt("%.6f", s2) + ", worst per-round factor " + fmt("%.6f", worst_factor) +
               ", mean drift " + fmt("%.1e", drift);
    return v;
}

// Criterion 3
Verdict topology_ordering() {
    Verdict v;
    const TopologyKind kinds[] = {TopologyKind::complete, TopologyKind::grid, TopologyKind::path};
    std::size_t rounds[3] = {0, 0, 0};
    std::size_t bound[3] = {0, 0, 0};
    for (int i = 0; i < 3; ++i) {
        auto c = consensus_cfg(kinds[i], 16, 1);
        Simulation sim(c);
        const double spread0 = disagreement(sim.device_models());
        while (disagreement(sim.device_models()) > 1e-3 * spread0 && rounds[i] < 100000) {
            sim.step();
            ++rounds[i];
        }
        bound[i] = iteration_bound({1.0, 1.0, spectral_pn(sim.context().mixing), 0.1, 1.0});
    }
    v.pass = rounds[0] < rounds[1] && rounds[1] < rounds[2] && bound[0] < bound[1] && bound[1] < bound[2];
    v.detail = "rounds complete/grid/path = " + std::to_string(rounds[0]) + "/" + std::to_string(rounds[1]) + "/" +
               std::to_string(rounds[2]) + ", bound = " + std::to_string(bound[0]) + "/" + std::to_string(bound[1]) +
               "/" + std::to_string(bound[2]);
    return v;
}

// Criterion 4
Verdict ofl_equivalence() {
    Verdict v;
    ScenarioConfig c;
    c.rounds = 50;
    c.graph.topology = TopologyKind::complete;
    c.graph.devices = 6;
    c.graph.bs = Point{0, 0};
    c.mixing = MixingKind::uniform;
    c.model.init = InitMode::per_device;
    c.model.train = {0.5, 1};
    auto ofl = c;
    ofl.mode = Mode::ofl;
    const double dev = equivalence_check(c, ofl);
    v.pass = dev < 1e-9;
    v.detail = "max L-inf deviation over 50 rounds " + fmt("%.2e", dev);
    return v;
}

// Criterion 5
Verdict gradient_check() {
    Verdict v;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g(0, 1);
        std::vector<double> x(20 * 4);
        for (auto& e : x) e = g(rng);
        std::vector<std::uint32_t> y(20);
        for (auto& l : y) l = static_cast<std::uint32_t>(rng() % 3);
        const Dataset d(4, 3, x, y);
        const auto p = init_params(seed + 77, {4, 5, 3});
        const auto analytic = grad(p, d);
        double num = 0, den = 0;
        for (std::size_t i = 0; i < p.theta.size(); ++i) {
            ModelParams a = p, b = p;
            a.theta[i] += 1e-5;
            b.theta[i] -= 1e-5;
            const double fd = (loss(a, d) - loss(b, d)) / 2e-5;
            num += (analytic[i] - fd) * (analytic[i] - fd);
            den += fd * fd;
        }
        worst = std::max(worst, std::sqrt(num / den));
    }
    v.pass = worst < 1e-4;
    v.detail = "worst relative L2 error over 10 seeds " + fmt("%.2e", worst);
    return v;
}

// Held-out accuracy of the last round that finishes by `horizon`.
double accuracy_at(const std::vector<RoundReport>& s, double horizon) {
    double acc = 0.0;
    for (const auto& r : s) {
        if (r.sim_time > horizon) break;
        acc = r.avg_model_acc;
    }
    return acc;
}

// Criterion 6
Verdict fig3() {
    Verdict v;
    const auto base = scenario("fig3.scenario");
    const std::size_t seeds = 5;
    std::vector<ExperimentResult> cfl(seeds), ofl(seeds);
    parallel_for(2 * seeds, default_workers(), [&](std::size_t job) {
        auto c = reseeded(base, 1 + job / 2);
        if (job % 2) {
            c.mode = Mode::ofl;
            ofl[job / 2] = run_experiment(c);
        } else {
            cfl[job / 2] = run_experiment(c);
        }
    });
    double acc_cfl = 0, acc_ofl = 0;
    bool four_of_six = true;
    for (std::size_t s = 0; s < seeds; ++s) {
        const double horizon = std::min(cfl[s].rounds.back().sim_time, ofl[s].rounds.back().sim_time);
        acc_cfl += accuracy_at(cfl[s].rounds, horizon) / seeds;
        acc_ofl += accuracy_at(ofl[s].rounds, horizon) / seeds;
        for (const auto& r : ofl[s].rounds) four_of_six = four_of_six && r.participants == 4;
        if (cfl[s].abort_reason || ofl[s].abort_reason) v.pass = false;
    }
    v.pass = v.pass && four_of_six && acc_cfl >= acc_ofl;
    v.detail = "mean held-out accuracy CFL " + fmt("%.4f", acc_cfl) + " vs OFL " + fmt("%.4f", acc_ofl) +
               " at equal simulated time, OFL participants 4 of 6 every round: " + (four_of_six ? "yes" : "no");
    return v;
}

// Criterion 7
Verdict fig4() {
    Verdict v;
    const auto base = scenario("fig4.scenario");
    const std::size_t seeds = 5;
    const std::optional<unsigned> bits[] = {2u, 4u, std::nullopt};
    std::vector<double> acc(3 * seeds);
    parallel_for(3 * seeds, default_workers(), [&](std::size_t job) {
        auto c = reseeded(base, 1 + job / 3);
        c.quant_bits = bits[job % 3];
        const auto res = run_experiment(c);
        acc[job] = res.abort_reason ? 0.0 : res.rounds.back().avg_model_acc;
    });
    double a2 = 0, a4 = 0, aoff = 0;
    for (std::size_t s = 0; s < seeds; ++s) {
        a2 += acc[3 * s] / seeds;
        a4 += acc[3 * s + 1] / seeds;
        aoff += acc[3 * s + 2] / seeds;
    }
    const Shapes shapes{base.data.synth.dim, base.model.hidden, base.data.synth.classes};
    const std::size_t len = shapes.param_count();
    const std::uint64_t q = payload_bits(len, 4);
    const std::uint64_t header = q - 4 * len;
    const bool eightfold = raw_bits_per_param * len == 8 * (q - header) && header <= 112;
    v.pass = std::abs(a4 - aoff) <= 0.02 && a2 < a4 && eightfold;
    v.detail = "mean accuracy R=2 " + fmt("%.4f", a2) + ", R=4 " + fmt("%.4f", a4) + ", off " + fmt("%.4f", aoff) +
               "; payload R=4 " + std::to_string(q) + " bits vs raw " + std::to_string(raw_bits_per_param * len) +
               " (header " + std::to_string(header) + ")";
    return v;
}

// Criterion 8
Verdict quantizer_bound() {
    Verdict v;
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g(0, 1);
    std::uniform_real_distribution<double> scale(-6, 6);
    double worst_ratio = 0.0;
    std::size_t elements = 0;
    std::vector<double> x(16);
    for (int t = 0; t < 100000; ++t) {
        const double s = std::pow(10.0, scale(rng));
        for (auto& e : x) e = s * g(rng);
        for (unsigned r : {1u, 2u, 4u, 8u, 16u}) {
            const auto b = encode(x, r);
            const auto d = decode(b);
            const double bound = (b.hi() - b.lo()) / (2.0 * static_cast<double>(b.levels()));
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double err = std::abs(d[i] - x[i]);
                if (err > bound) worst_ratio = std::max(worst_ratio, err / bound);
                ++elements;
            }
        }
    }
    v.pass = worst_ratio == 0.0;
    v.detail = std::to_string(elements) + " elements over 1e5 vectors, violations: " + (v.pass ? "none" : fmt("worst %.3g x bound", worst_ratio));
    return v;
}

// Criterion 9
Verdict reliability_monotone() {
    Verdict v;
    auto c = scenario("fig3.scenario");
    c.channel->params.waterfall_m = 700.0;
    c.rounds = 60;
    const double target = 0.5, budget = 7.8;
    const std::size_t trials = 20;
    auto at = [&](double p) {
        auto x = c;
        x.radio.tx_power = p;
        return reliability(x, target, budget, trials, 1000, default_workers());
    };
    const auto lo = at(0.1), hi = at(0.2);
    v.pass = hi.estimate >= lo.estimate;
    v.detail = "P=0.1 W: " + fmt("%.2f", lo.estimate) + " [" + fmt("%.2f", lo.ci95.lo) + ", " + fmt("%.2f", lo.ci95.hi) +
               "], 2P: " + fmt("%.2f", hi.estimate) + " [" + fmt("%.2f", hi.ci95.lo) + ", " + fmt("%.2f", hi.ci95.hi) +
               "], " + std::to_string(trials) + " paired trials";
    return v;
}

// Criterion 10
Verdict determinism() {
    Verdict v;
    const auto dir = fs::temp_directory_path() / "cfl_acceptance_determinism";
    fs::remove_all(dir);
    std::ostringstream log;
    const auto file = fs::path(CFL_SCENARIO_DIR) / "fig3.scenario";
    const int a = cli::run(file, {dir / "a", 42, 1}, log);
    const int b = cli::run(file, {dir / "b", 42, 1}, log);
    auto slurp = [](const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        std::stringstream s;
        s << f.rdbuf();
        return s.str();
    };
    const auto sa = slurp(dir / "a" / "series.csv");
    const auto sb = slurp(dir / "b" / "series.csv");
    v.pass = a == 0 && b == 0 && !sa.empty() && sa == sb;
    v.detail = "fig3 seed 42 twice: " + std::to_string(sa.size()) + " bytes, " + (sa == sb ? "identical" : "different");
    fs::remove_all(dir);
    return v;
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<Verdict()>> criteria[] = {
        {"mixing-matrix suite", mixing_suite},
        {"consensus contraction", contraction},
        {"topology ordering", topology_ordering},
        {"OFL equivalence", ofl_equivalence},
        {"gradient correctness", gradient_check},
        {"fig3: CFL vs OFL under the delay budget", fig3},
        {"fig4: quantized exchange", fig4},
        {"quantizer error bound", quantizer_bound},
        {"reliability monotone in tx power", reliability_monotone},
        {"determinism", determinism},
    };
    int failed = 0;
    int index = 0;
    for (const auto& [name, fn] : criteria) {
        ++index;
        const auto started = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        std::printf("%s criterion %d (%s): %s [%.1fs]\n", v.pass ? "PASS" : "FAIL", index, name, v.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !v.pass;
    }
    std::printf("%d of %d criteria passed\n", index - failed, index);
    return failed == 0 ? 0 : 1;
}
