#include "cfl/quant.hpp"

#include "cfl/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace cfl {

namespace {

constexpr std::size_t narrow_len_max = 65535;
constexpr std::uint16_t wide_flag = 0x8000;

void check_bits(unsigned r_bits) {
    if (r_bits < 1 || r_bits > 32) throw std::invalid_argument("quantizer needs 1 <= R <= 32, got " + std::to_string(r_bits));
}

void put_code(std::vector<std::uint8_t>& packed, std::size_t index, unsigned r_bits, std::uint32_t code) {
    std::size_t bit = index * r_bits;
    for (unsigned t = 0; t < r_bits; ++t, ++bit) {
        if ((code >> t) & 1u) packed[bit / 8] |= static_cast<std::uint8_t>(1u << (bit % 8));
    }
}

template <class T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    for (std::size_t k = 0; k < sizeof(T); ++k) out.push_back(static_cast<std::uint8_t>(value >> (8 * k)));
}

template <class T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t& offset) {
    if (bytes.size() < offset + sizeof(T)) throw std::invalid_argument("quantized blob: truncated header");
    T v = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k) v |= static_cast<T>(T{bytes[offset + k]} << (8 * k));
    offset += sizeof(T);
    return v;
}

}  // namespace

QuantizedBlob::QuantizedBlob(double lo, double hi, unsigned r_bits, std::size_t len, std::vector<std::uint8_t> packed)
    : lo_(lo), hi_(hi), r_bits_(r_bits), len_(len), packed_(std::move(packed)) {
    check_bits(r_bits_);
    if (!(lo_ <= hi_)) throw std::invalid_argument("quantized blob: lo > hi");
}

std::size_t QuantizedBlob::packed_bytes(std::size_t len, unsigned r_bits) {
    return (len * r_bits + 7) / 8;
}

std::uint32_t QuantizedBlob::code(std::size_t i) const {
    std::size_t bit = i * r_bits_;
    std::uint32_t c = 0;
    for (unsigned t = 0; t < r_bits_; ++t, ++bit) {
        c |= static_cast<std::uint32_t>((packed_[bit / 8] >> (bit % 8)) & 1u) << t;
    }
    return c;
}

namespace {

// round_fn maps (index, scaled value in [0, levels]) to a level.
template <class RoundFn>
QuantizedBlob encode_with(std::span<const double> v, unsigned r_bits, RoundFn&& round_fn) {
    check_bits(r_bits);
    for (double x : v) {
        if (std::isnan(x)) throw std::invalid_argument("encode: NaN in input");
        if (!std::isfinite(x)) throw std::invalid_argument("encode: non-finite input");
    }
    std::vector<std::uint8_t> packed(QuantizedBlob::packed_bytes(v.size(), r_bits), 0);
    if (v.empty()) return QuantizedBlob(0.0, 0.0, r_bits, 0, std::move(packed));

    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    const double lo = *mn, hi = *mx;
    const double levels = static_cast<double>((std::uint64_t{1} << r_bits) - 1);
    if (hi > lo) {
        const double range = hi - lo;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double scaled = (v[i] - lo) / range * levels;
            const double rounded = std::clamp(round_fn(i, scaled), 0.0, levels);
            put_code(packed, i, r_bits, static_cast<std::uint32_t>(rounded));
        }
    }
    return QuantizedBlob(lo, hi, r_bits, v.size(), std::move(packed));
}

}  // namespace

QuantizedBlob encode(std::span<const double> v, unsigned r_bits) {
    return encode_with(v, r_bits, [](std::size_t, double scaled) { return std::round(scaled); });
}

QuantizedBlob encode_stochastic(std::span<const double> v, unsigned r_bits, std::uint64_t key) {
    return encode_with(v, r_bits, [key](std::size_t i, double scaled) {
        const double base = std::floor(scaled);
        return base + (uniform01(splitmix64(key ^ i)) < scaled - base ? 1.0 : 0.0);
    });
}

std::vector<double> decode(const QuantizedBlob& b) {
    if (b.packed().size() != QuantizedBlob::packed_bytes(b.size(), b.r_bits())) {
        throw std::invalid_argument("decode: packed length " + std::to_string(b.packed().size()) +
                                    " does not match " + std::to_string(b.size()) + " codes of " +
                                    std::to_string(b.r_bits()) + " bits");
    }
    std::vector<double> out(b.size(), b.lo());
    if (b.hi() == b.lo()) return out;
    const double levels = static_cast<double>(b.levels());
    for (std::size_t i = 0; i < b.size(); ++i) {
        // Interpolating form keeps both endpoints exact, so decode is a fixed point of encode.
        const double t = static_cast<double>(b.code(i)) / levels;
        out[i] = b.lo() * (1.0 - t) + b.hi() * t;
    }
    return out;
}

std::uint64_t payload_bits(std::size_t len, unsigned r_bits) {
    check_bits(r_bits);
    const std::uint64_t header = 16 + (len > narrow_len_max ? 32 : 16) + 64;
    return std::uint64_t{len} * r_bits + header;
}

std::uint64_t payload_bits(const QuantizedBlob& b) {
    return payload_bits(b.size(), b.r_bits());
}

std::string_view to_string(Rounding r) {
    return r == Rounding::stochastic ? "stochastic" : "nearest";
}

Rounding rounding_from_string(std::string_view s) {
    if (s == "nearest") return Rounding::nearest;
    if (s == "stochastic") return Rounding::stochastic;
    throw std::invalid_argument("unknown rounding '" + std::string(s) + "' (nearest, stochastic)");
}

std::vector<std::uint8_t> serialize(const QuantizedBlob& b) {
    std::vector<std::uint8_t> out;
    const bool wide = b.size() > narrow_len_max;
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(b.r_bits() | (wide ? wide_flag : 0)));
    if (wide) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(b.size()));
    } else {
        put_le<std::uint16_t>(out, static_cast<std::uint16_t>(b.size()));
    }
    put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(b.lo())));
    put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(b.hi())));
    out.insert(out.end(), b.packed().begin(), b.packed().end());
    return out;
}

QuantizedBlob deserialize(std::span<const std::uint8_t> bytes) {
    std::size_t off = 0;
    const auto word = get_le<std::uint16_t>(bytes, off);
    const bool wide = (word & wide_flag) != 0;
    const unsigned r_bits = word & 0x7fffu;
    check_bits(r_bits);
    const std::size_t len = wide ? get_le<std::uint32_t>(bytes, off) : get_le<std::uint16_t>(bytes, off);
    const float lo = std::bit_cast<float>(get_le<std::uint32_t>(bytes, off));
    const float hi = std::bit_cast<float>(get_le<std::uint32_t>(bytes, off));
    const std::size_t need = QuantizedBlob::packed_bytes(len, r_bits);
    if (bytes.size() - off != need) {
        throw std::invalid_argument("quantized blob: expected " + std::to_string(need) + " code bytes, got " +
                                    std::to_string(bytes.size() - off));
    }
    return QuantizedBlob(lo, hi, r_bits, len, {bytes.begin() + static_cast<std::ptrdiff_t>(off), bytes.end()});
}

}  // namespace cfl
