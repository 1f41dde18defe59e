#pragma once

// IEEE binary16 and bfloat16 codecs. Encoding rounds once, to nearest-even,
// directly from double.

#include <cmath>
#include <cstdint>

namespace divlab {

namespace detail {

template <int ExpBits, int ManBits>
struct MiniFloat {
    static constexpr int bias = (1 << (ExpBits - 1)) - 1;
    static constexpr int emin = 1 - bias;
    static constexpr std::uint32_t exp_all_ones = (1u << ExpBits) - 1u;
    static constexpr std::uint32_t sign_bit = 1u << (ExpBits + ManBits);

    static double decode(std::uint16_t bits) {
        const bool neg = (bits & sign_bit) != 0;
        const std::uint32_t e = (bits >> ManBits) & exp_all_ones;
        const std::uint32_t m = bits & ((1u << ManBits) - 1u);
        double v;
        if (e == exp_all_ones) {
            v = m == 0 ? INFINITY : NAN;
        } else if (e == 0) {
            v = std::ldexp(static_cast<double>(m), emin - ManBits);
        } else {
            v = std::ldexp(static_cast<double>((1u << ManBits) | m), static_cast<int>(e) - bias - ManBits);
        }
        return neg ? -v : v;
    }

    static std::uint16_t encode(double v) {
        const std::uint32_t sign = std::signbit(v) ? sign_bit : 0u;
        if (std::isnan(v)) return static_cast<std::uint16_t>(sign | (exp_all_ones << ManBits) | (1u << (ManBits - 1)));
        const double a = std::fabs(v);
        if (std::isinf(a)) return static_cast<std::uint16_t>(sign | (exp_all_ones << ManBits));
        if (a == 0.0) return static_cast<std::uint16_t>(sign);

        int e2 = 0;
        std::frexp(a, &e2);
        int exponent = e2 - 1;  // a = 1.f * 2^exponent
        if (exponent < emin) {
            // Subnormal: count units of the smallest subnormal. A carry into
            // 2^ManBits lands exactly on the smallest normal encoding.
            const double units = std::nearbyint(std::ldexp(a, ManBits - emin));
            return static_cast<std::uint16_t>(sign | static_cast<std::uint32_t>(units));
        }
        double sig = std::nearbyint(std::ldexp(a, ManBits - exponent));
        if (sig == std::ldexp(1.0, ManBits + 1)) {
            sig = std::ldexp(1.0, ManBits);
            ++exponent;
        }
        if (exponent > bias) return static_cast<std::uint16_t>(sign | (exp_all_ones << ManBits));
        const auto field = static_cast<std::uint32_t>(exponent + bias);
        const auto mant = static_cast<std::uint32_t>(sig) - (1u << ManBits);
        return static_cast<std::uint16_t>(sign | (field << ManBits) | mant);
    }
};

using Binary16 = MiniFloat<5, 10>;
using BFloat16 = MiniFloat<8, 7>;

}  // namespace detail

inline double f16_to_double(std::uint16_t bits) { return detail::Binary16::decode(bits); }
inline std::uint16_t double_to_f16(double v) { return detail::Binary16::encode(v); }
inline double bf16_to_double(std::uint16_t bits) { return detail::BFloat16::decode(bits); }
inline std::uint16_t double_to_bf16(double v) { return detail::BFloat16::encode(v); }

}  // namespace divlab
