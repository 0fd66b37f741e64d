#include "lstmgrid/actlut.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace lstmgrid {

double activate(Activation kind, double x) {
    switch (kind) {
        case Activation::sigmoid:
            return 1.0 / (1.0 + std::exp(-x));
        case Activation::tanh:
            return std::tanh(x);
    }
    return 0.0;
}

const char* to_string(Activation kind) { return kind == Activation::sigmoid ? "sigmoid" : "tanh"; }

Lut256::Lut256(Activation kind, QFormat in_format, QFormat out_format) : kind_(kind), in_(in_format), out_(out_format) {
    if (!in_.valid() || !out_.valid()) throw ConfigError("build_lut: invalid format");
    for (int code = -128; code <= 127; ++code) {
        const double x = dequantize(Q8{static_cast<std::int8_t>(code), in_});
        table_[static_cast<std::uint8_t>(code)] = quantize(activate(kind_, x), out_).code;
    }
}

Q8 Lut256::apply(Q8 x) const {
    if (!(x.format == in_))
        throw ConfigError(std::string(to_string(kind_)) + " LUT expects " + in_.name() + " input, got " +
                          x.format.name());
    return Q8{at(x.code), out_};
}

void Lut256::dump_csv(std::ostream& os) const {
    os << "code,input,output_code,output\n";
    for (int code = -128; code <= 127; ++code) {
        const auto c = static_cast<std::int8_t>(code);
        os << code << ',' << dequantize(Q8{c, in_}) << ',' << int{at(c)} << ',' << dequantize(Q8{at(c), out_}) << '\n';
    }
}

LutErrorStats lut_error_stats(const Lut256& lut, std::span<const double> samples) {
    if (samples.empty()) throw std::invalid_argument("lut_error_stats: empty sample set");
    LutErrorStats s;
    s.count = samples.size();
    double sum_err = 0.0;
    double sum_se = 0.0;
    double sum_se2 = 0.0;
    for (double x : samples) {
        const double approx = dequantize(lut.apply(quantize(x, lut.in_format())));
        const double err = approx - activate(lut.kind(), x);
        const double se = err * err;
        sum_err += err;
        sum_se += se;
        sum_se2 += se * se;
        s.max_se = std::max(s.max_se, se);
    }
    const auto n = static_cast<double>(s.count);
    s.mean = sum_err / n;
    s.mse = sum_se / n;
    s.std = std::sqrt(std::max(0.0, sum_se2 / n - s.mse * s.mse));
    return s;
}

}  // namespace lstmgrid
