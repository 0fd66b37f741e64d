#pragma once

#include <cstdint>
#include <random>

#include "lstmgrid/network.hpp"

namespace lstmgrid {

/// Platform-independent draws on top of mt19937_64 (the standard
/// distributions are implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    /// Uniform integer in [lo, hi].
    std::int64_t integer(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(eng_() % span);
    }
    /// Uniform real in [0, 1).
    double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

private:
    std::mt19937_64 eng_;
};

/// Code magnitude limits for generated fixed-point networks. Small limits
/// keep every accumulator in range; full-range codes force saturation.
struct CodeRanges {
    int weight = 127;
    int bias = 127;
    int input = 127;

    static CodeRanges small() { return {6, 16, 24}; }
    static CodeRanges full() { return {127, 127, 127}; }
};

QNetworkParams random_qparams(const NetworkSpec& spec, Rng& rng, const CodeRanges& ranges = {});
QMatrix random_qfeatures(const NetworkSpec& spec, std::size_t steps, Rng& rng, const CodeRanges& ranges = {});

FloatNetworkParams random_float_params(const NetworkSpec& spec, Rng& rng, double scale);
Matrix<double> random_float_features(const NetworkSpec& spec, std::size_t steps, Rng& rng, double scale);

}  // namespace lstmgrid
