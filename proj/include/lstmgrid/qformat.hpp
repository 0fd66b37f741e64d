#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lstmgrid {

/// Raised for inconsistent formats, shapes, or options.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Signed 8-bit fixed-point format. LSB = 2^-frac_bits.
struct QFormat {
    static constexpr int total_bits = 8;
    int frac_bits = 5;

    constexpr bool valid() const { return frac_bits >= 0 && frac_bits <= 7; }
    double lsb() const;
    double min_value() const;
    double max_value() const;
    std::string name() const;  // e.g. "Q2.5"

    friend constexpr bool operator==(QFormat a, QFormat b) { return a.frac_bits == b.frac_bits; }
};

/// "Qm.n" with m + n = 7; throws ConfigError otherwise.
QFormat parse_qformat(const std::string& text);

inline constexpr QFormat kQ2_5{5};
inline constexpr QFormat kQ0_7{7};

struct Q8 {
    std::int8_t code = 0;
    QFormat format{};
};

/// 16-bit accumulator. The value is scaled by 2^-frac_bits; `saturated`
/// latches once any operation on this accumulator clamped.
struct Acc16 {
    std::int16_t value = 0;
    int frac_bits = 0;
    bool saturated = false;
};

inline constexpr std::int32_t kAccMin = -32768;
inline constexpr std::int32_t kAccMax = 32767;

/// Round-half-away-from-zero arithmetic right shift of an exact integer.
std::int64_t round_shift_right(std::int64_t v, int shift);

std::int8_t clamp_code(std::int64_t v);

Q8 quantize(double v, QFormat fmt);
double dequantize(Q8 q);

/// acc + a*b with 16-bit saturation. Product scale is a.frac + b.frac and must
/// match acc.frac_bits.
Acc16 mac(Acc16 acc, Q8 a, Q8 b);

/// Saturating sum of two accumulators at the same scale.
Acc16 sat_add(Acc16 a, Acc16 b);

/// Adds a Q8 value aligned (left-shifted) to the accumulator scale.
Acc16 add_aligned(Acc16 acc, Q8 v);

/// Rescales an accumulator to `frac_bits` (rounding on right shifts,
/// saturating on left shifts).
Acc16 rescale(Acc16 acc, int frac_bits);

/// 16 -> 8 bit reduction: rounding right shift, then clamp to [-128, 127].
Q8 requantize(Acc16 acc, QFormat target);

/// Exact product of two codes as an accumulator at frac_a + frac_b.
inline Acc16 product(Q8 a, Q8 b) { return mac(Acc16{0, a.format.frac_bits + b.format.frac_bits, false}, a, b); }

}  // namespace lstmgrid
