#include "lstmgrid/qformat.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace lstmgrid {

double QFormat::lsb() const { return std::ldexp(1.0, -frac_bits); }
double QFormat::min_value() const { return -128.0 * lsb(); }
double QFormat::max_value() const { return 127.0 * lsb(); }

std::string QFormat::name() const {
    return "Q" + std::to_string(total_bits - 1 - frac_bits) + "." + std::to_string(frac_bits);
}

QFormat parse_qformat(const std::string& text) {
    int m = -1, n = -1;
    char tail = 0;
    if (std::sscanf(text.c_str(), "Q%d.%d%c", &m, &n, &tail) != 2 || m < 0 || n < 0 ||
        m + n != QFormat::total_bits - 1)
        throw ConfigError("bad Q-format '" + text + "' (expected Qm.n with m+n=7)");
    return QFormat{n};
}

std::int64_t round_shift_right(std::int64_t v, int shift) {
    if (shift <= 0) return v;
    const std::int64_t half = std::int64_t{1} << (shift - 1);
    const std::int64_t mag = v < 0 ? -v : v;
    const std::int64_t r = (mag + half) >> shift;
    return v < 0 ? -r : r;
}

std::int8_t clamp_code(std::int64_t v) {
    return static_cast<std::int8_t>(std::clamp<std::int64_t>(v, -128, 127));
}

namespace {

Acc16 saturate(std::int64_t v, int frac_bits, bool already_saturated) {
    const bool clamp = v < kAccMin || v > kAccMax;
    return Acc16{static_cast<std::int16_t>(std::clamp<std::int64_t>(v, kAccMin, kAccMax)), frac_bits,
                 already_saturated || clamp};
}

}  // namespace

Q8 quantize(double v, QFormat fmt) {
    if (!fmt.valid()) throw ConfigError("invalid Q format: frac_bits=" + std::to_string(fmt.frac_bits));
    if (std::isnan(v)) return Q8{0, fmt};
    // std::round is half-away-from-zero.
    const double scaled = std::round(std::ldexp(v, fmt.frac_bits));
    const double clamped = std::clamp(scaled, -128.0, 127.0);
    return Q8{static_cast<std::int8_t>(clamped), fmt};
}

double dequantize(Q8 q) { return std::ldexp(static_cast<double>(q.code), -q.format.frac_bits); }

Acc16 mac(Acc16 acc, Q8 a, Q8 b) {
    if (a.format.frac_bits + b.format.frac_bits != acc.frac_bits)
        throw ConfigError("mac: product scale " + std::to_string(a.format.frac_bits + b.format.frac_bits) +
                          " does not match accumulator scale " + std::to_string(acc.frac_bits));
    const std::int64_t wide = std::int64_t{acc.value} + std::int64_t{a.code} * std::int64_t{b.code};
    return saturate(wide, acc.frac_bits, acc.saturated);
}

Acc16 sat_add(Acc16 a, Acc16 b) {
    if (a.frac_bits != b.frac_bits) throw ConfigError("sat_add: accumulator scales differ");
    return saturate(std::int64_t{a.value} + std::int64_t{b.value}, a.frac_bits, a.saturated || b.saturated);
}

Acc16 rescale(Acc16 acc, int frac_bits) {
    const int shift = acc.frac_bits - frac_bits;
    std::int64_t v = acc.value;
    if (shift > 0) {
        v = round_shift_right(v, shift);
    } else if (shift < 0) {
        v = v * (std::int64_t{1} << -shift);
    }
    return saturate(v, frac_bits, acc.saturated);
}

Acc16 add_aligned(Acc16 acc, Q8 v) {
    if (v.format.frac_bits > acc.frac_bits) throw ConfigError("add_aligned: operand finer than accumulator");
    const Acc16 aligned = rescale(Acc16{v.code, v.format.frac_bits, false}, acc.frac_bits);
    return sat_add(acc, aligned);
}

Q8 requantize(Acc16 acc, QFormat target) {
    if (acc.frac_bits < target.frac_bits) throw ConfigError("requantize: target finer than accumulator");
    return Q8{clamp_code(round_shift_right(acc.value, acc.frac_bits - target.frac_bits)), target};
}

}  // namespace lstmgrid
