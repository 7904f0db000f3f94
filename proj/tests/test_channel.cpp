#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "cfl/channel.hpp"

using namespace cfl;

namespace {

ChannelParams params(double b, double n0, double alpha, double ref, double m = 0.0) {
    ChannelParams cp;
    cp.bandwidth = b;
    cp.noise_density = n0;
    cp.pathloss_exponent = alpha;
    cp.ref_gain = ref;
    cp.waterfall_m = m;
    return cp;
}

}  // namespace

TEST_CASE("path gain") {
    CHECK(path_gain(1, params(1, 1, 2, 1)) == 1.0);
    CHECK(path_gain(10, params(1, 1, 2, 1)) == doctest::Approx(0.01).epsilon(1e-15));
    CHECK(path_gain(2, params(1, 1, 3, 0.5)) == 0.0625);
    CHECK_THROWS_AS(path_gain(0, params(1, 1, 2, 1)), std::invalid_argument);
}

TEST_CASE("snr and rate") {
    const auto cp = params(1e6, 1e-12, 2, 1);  // N0 B = 1e-6
    CHECK(snr(1e-3, 1e-3, cp) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(snr(2e-3, 1e-3, cp) == doctest::Approx(2 * snr(1e-3, 1e-3, cp)).epsilon(1e-15));
    CHECK_THROWS(snr(1e-3, 0.0, cp));
    CHECK(rate(1, cp) == 1e6);
    CHECK(rate(3, cp) == 2e6);
    CHECK(rate(0, cp) == 0.0);
}

TEST_CASE("tx delay") {
    CHECK(tx_delay(320000, 1e6) == doctest::Approx(0.32).epsilon(1e-15));
    CHECK(tx_delay(0, 1e6) == 0.0);
    CHECK(tx_delay(40096, 1e6) == doctest::Approx(0.04).epsilon(0.01));
    CHECK(tx_delay(1000, 0.0) == unusable_delay);
}

TEST_CASE("packet error rate") {
    CHECK(per(5.0, params(1, 1, 2, 1, 0.0)) == 0.0);
    CHECK(per(3.0, params(1, 1, 2, 1, 3.0)) == doctest::Approx(1 - std::exp(-1.0)).epsilon(1e-12));
    CHECK(per(3.0, params(1, 1, 2, 1, 3.0)) == doctest::Approx(0.63212).epsilon(1e-5));
    CHECK(per(1e300, params(1, 1, 2, 1, 3.0)) < 1e-290);
    CHECK_THROWS(per(0.0, params(1, 1, 2, 1, 3.0)));
}

TEST_CASE("energy and compute time") {
    CHECK(tx_energy(0.1, 0.32) == doctest::Approx(0.032).epsilon(1e-15));
    DeviceRadio r;
    r.cpu_cycles_per_sample = 1e4;
    r.cpu_freq = 1e9;
    r.eff_capacitance = 1e-28;
    CHECK(comp_time(500, 1, r) == doctest::Approx(5e-3).epsilon(1e-15));
    CHECK(comp_energy(500, 1, r) == doctest::Approx(5e-4).epsilon(1e-12));
    CHECK(comp_energy(500, 3, r) == doctest::Approx(3 * comp_energy(500, 1, r)).epsilon(1e-15));
}

TEST_CASE("parameter validation") {
    CHECK_THROWS(params(0, 1, 2, 1).validate());
    CHECK_THROWS(params(1, 0, 2, 1).validate());
    CHECK_THROWS(params(1, 1, 0.5, 1).validate());
    CHECK_THROWS(params(1, 1, 2, 0).validate());
    CHECK_THROWS(params(1, 1, 2, 1, -1).validate());
    DeviceRadio r;
    r.tx_power = 0;
    CHECK_THROWS(r.validate());
}

TEST_CASE("property: monotone and finite link statistics") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 2000; ++t) {
        const auto cp = params(1e3 + 1e7 * u(rng), 1e-22 + 1e-19 * u(rng), 1 + 3 * u(rng), 1e-6 + u(rng), 10 * u(rng));
        const double d = 1 + 500 * u(rng);
        const double p = 1e-3 + u(rng);
        const double bits = 1e3 + 1e6 * u(rng);
        const auto a = link_stats(d, p, bits, cp);
        const auto b = link_stats(d, 2 * p, bits, cp);
        CHECK(std::isfinite(a.snr));
        CHECK(std::isfinite(a.delay));
        CHECK(a.per >= 0.0);
        CHECK(a.per <= 1.0);
        CHECK(b.per <= a.per);
        CHECK(b.rate >= a.rate);
        CHECK(b.delay <= a.delay);
        const auto far = link_stats(d * 2, p, bits, cp);
        CHECK(far.per >= a.per);
        CHECK(far.delay >= a.delay);
    }
}

TEST_CASE("link stats compose the primitives") {
    const auto cp = params(1e6, 4e-21, 2, 1e-3, 2.0);
    const auto s = link_stats(100, 0.1, 43520, cp);
    const double g = path_gain(100, cp);
    CHECK(s.snr == snr(0.1, g, cp));
    CHECK(s.rate == rate(s.snr, cp));
    CHECK(s.delay == tx_delay(43520, s.rate));
    CHECK(s.per == per(s.snr, cp));
}
