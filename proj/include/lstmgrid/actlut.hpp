#pragma once

#include <array>
#include <iosfwd>
#include <span>

#include "lstmgrid/qformat.hpp"

namespace lstmgrid {

enum class Activation { sigmoid, tanh };

double activate(Activation kind, double x);
const char* to_string(Activation kind);

/// 256-entry activation table indexed by the input code reinterpreted as
/// an unsigned byte.
class Lut256 {
public:
    Lut256(Activation kind, QFormat in_format, QFormat out_format);

    Activation kind() const { return kind_; }
    QFormat in_format() const { return in_; }
    QFormat out_format() const { return out_; }

    /// Throws ConfigError when x is not in the table's input format.
    Q8 apply(Q8 x) const;
    std::int8_t at(std::int8_t code) const { return table_[static_cast<std::uint8_t>(code)]; }

    /// One line per code: "code,input,output_code,output".
    void dump_csv(std::ostream& os) const;

private:
    Activation kind_;
    QFormat in_;
    QFormat out_;
    std::array<std::int8_t, 256> table_{};
};

inline Lut256 build_lut(Activation kind, QFormat in_format, QFormat out_format) {
    return Lut256(kind, in_format, out_format);
}

struct LutErrorStats {
    double mse = 0.0;
    double max_se = 0.0;
    double mean = 0.0;  // mean signed error
    double std = 0.0;   // std-dev of the squared error
    std::size_t count = 0;
};

/// Error of the quantize -> lookup -> dequantize pipeline against the exact
/// activation. Throws std::invalid_argument on an empty sample set.
LutErrorStats lut_error_stats(const Lut256& lut, std::span<const double> samples);

}  // namespace lstmgrid
