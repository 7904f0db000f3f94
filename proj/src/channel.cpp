#include "cfl/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace cfl {

void ChannelParams::validate() const {
    if (!(bandwidth > 0.0)) throw std::invalid_argument("channel: bandwidth must be > 0");
    if (!(noise_density > 0.0)) throw std::invalid_argument("channel: noise_density must be > 0");
    if (!(pathloss_exponent >= 1.0)) throw std::invalid_argument("channel: pathloss_exponent must be >= 1");
    if (!(ref_gain > 0.0)) throw std::invalid_argument("channel: ref_gain must be > 0");
    if (!(waterfall_m >= 0.0)) throw std::invalid_argument("channel: waterfall_m must be >= 0");
}

void DeviceRadio::validate() const {
    if (!(tx_power > 0.0) || !(cpu_cycles_per_sample > 0.0) || !(cpu_freq > 0.0) || !(eff_capacitance > 0.0)) {
        throw std::invalid_argument("radio: tx_power, cpu_cycles_per_sample, cpu_freq, eff_capacitance must be > 0");
    }
}

double path_gain(double distance_m, const ChannelParams& cp) {
    if (!(distance_m > 0.0)) throw std::invalid_argument("path_gain: distance must be > 0");
    return cp.ref_gain * std::pow(distance_m, -cp.pathloss_exponent);
}

double snr(double tx_power, double gain, const ChannelParams& cp) {
    if (!(tx_power > 0.0) || !(gain > 0.0)) throw std::invalid_argument("snr: power and gain must be > 0");
    return tx_power * gain / (cp.noise_density * cp.bandwidth);
}

double rate(double snr, const ChannelParams& cp) {
    if (!(snr >= 0.0)) throw std::invalid_argument("rate: snr must be >= 0");
    return cp.bandwidth * std::log2(1.0 + snr);
}

double tx_delay(double payload_bits, double rate_bps) {
    if (payload_bits < 0.0 || rate_bps < 0.0) throw std::invalid_argument("tx_delay: negative input");
    if (payload_bits == 0.0) return 0.0;
    if (rate_bps == 0.0) return unusable_delay;
    return payload_bits / rate_bps;
}

double per(double snr, const ChannelParams& cp) {
    if (!(snr > 0.0)) throw std::invalid_argument("per: snr must be > 0");
    if (cp.waterfall_m == 0.0) return 0.0;
    return 1.0 - std::exp(-cp.waterfall_m / snr);
}

double tx_energy(double tx_power, double delay_s) {
    return tx_power * delay_s;
}

double comp_time(std::size_t samples, std::size_t steps, const DeviceRadio& r) {
    return r.cpu_cycles_per_sample * static_cast<double>(samples) * static_cast<double>(steps) / r.cpu_freq;
}

double comp_energy(std::size_t samples, std::size_t steps, const DeviceRadio& r) {
    return r.eff_capacitance * r.cpu_freq * r.cpu_freq * r.cpu_cycles_per_sample *
           static_cast<double>(samples) * static_cast<double>(steps);
}

LinkStats link_stats(double distance_m, double tx_power, double payload_bits, const ChannelParams& cp) {
    LinkStats s;
    s.snr = snr(tx_power, path_gain(distance_m, cp), cp);
    s.rate = rate(s.snr, cp);
    s.delay = tx_delay(payload_bits, s.rate);
    s.per = per(s.snr, cp);
    return s;
}

}  // namespace cfl
