#pragma once

#include <cstddef>
#include <limits>

namespace cfl {

// Log-distance path loss, Shannon rate, waterfall packet errors. No fading,
// no interference; units are SI throughout.
struct ChannelParams {
    double bandwidth = 1e6;          // Hz
    double noise_density = 4e-21;    // W/Hz
    double pathloss_exponent = 2.0;
    double ref_gain = 1e-3;          // gain at 1 m
    double waterfall_m = 0.0;        // 0 disables packet errors

    void validate() const;
};

struct DeviceRadio {
    double tx_power = 0.1;                // W
    double cpu_cycles_per_sample = 1e4;   // cycles
    double cpu_freq = 1e9;                // Hz
    double eff_capacitance = 1e-28;       // kappa, J s^2 / cycle^3

    void validate() const;
};

struct LinkStats {
    double snr = 0.0;
    double rate = 0.0;   // bit/s
    double delay = 0.0;  // s, for the payload the stats were built with
    double per = 0.0;
};

inline constexpr double unusable_delay = std::numeric_limits<double>::infinity();

double path_gain(double distance_m, const ChannelParams& cp);
double snr(double tx_power, double gain, const ChannelParams& cp);
double rate(double snr, const ChannelParams& cp);
// Returns unusable_delay when rate is 0 and payload nonzero.
double tx_delay(double payload_bits, double rate_bps);
double per(double snr, const ChannelParams& cp);

double tx_energy(double tx_power, double delay_s);
double comp_time(std::size_t samples, std::size_t steps, const DeviceRadio& r);
double comp_energy(std::size_t samples, std::size_t steps, const DeviceRadio& r);

LinkStats link_stats(double distance_m, double tx_power, double payload_bits, const ChannelParams& cp);

}  // namespace cfl
