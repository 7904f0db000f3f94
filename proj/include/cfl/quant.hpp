#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace cfl {

enum class Rounding { nearest, stochastic };

// R-bit uniform quantization of a whole model vector over [min, max].
class QuantizedBlob {
public:
    QuantizedBlob() = default;
    QuantizedBlob(double lo, double hi, unsigned r_bits, std::size_t len, std::vector<std::uint8_t> packed);

    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }
    unsigned r_bits() const noexcept { return r_bits_; }
    std::size_t size() const noexcept { return len_; }
    const std::vector<std::uint8_t>& packed() const noexcept { return packed_; }

    std::uint32_t code(std::size_t i) const;
    std::uint64_t levels() const noexcept { return (std::uint64_t{1} << r_bits_) - 1; }

    static std::size_t packed_bytes(std::size_t len, unsigned r_bits);

private:
    double lo_ = 0.0;
    double hi_ = 0.0;
    unsigned r_bits_ = 1;
    std::size_t len_ = 0;
    std::vector<std::uint8_t> packed_;  // LSB-first, r_bits per code
};

// code = round-half-away((x - lo) / (hi - lo) * (2^R - 1)); hi == lo gives all zeros.
QuantizedBlob encode(std::span<const double> v, unsigned r_bits);
// Unbiased variant: rounds up with probability equal to the fractional part,
// drawing from the substream `key`. Error per element is below one step.
QuantizedBlob encode_stochastic(std::span<const double> v, unsigned r_bits, std::uint64_t key);
std::vector<double> decode(const QuantizedBlob& b);

// Wire size in bits: codes + two float32 range values + 16-bit R/flag word +
// 16-bit length (32-bit when len > 65535).
std::uint64_t payload_bits(const QuantizedBlob& b);
std::uint64_t payload_bits(std::size_t len, unsigned r_bits);

std::string_view to_string(Rounding r);
Rounding rounding_from_string(std::string_view s);

inline constexpr std::uint64_t raw_bits_per_param = 32;

// Little-endian: u16 (R | 0x8000 if wide), u16 or u32 len, f32 lo, f32 hi, codes.
std::vector<std::uint8_t> serialize(const QuantizedBlob& b);
QuantizedBlob deserialize(std::span<const std::uint8_t> bytes);

}  // namespace cfl
