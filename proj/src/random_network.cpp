#include "lstmgrid/random_network.hpp"

namespace lstmgrid {

namespace {

QMatrix codes(QFormat f, std::size_t r, std::size_t c, int lim, Rng& rng) {
    QMatrix m(f, r, c);
    for (auto& v : m.codes.data()) v = static_cast<std::int8_t>(rng.integer(-lim, lim));
    return m;
}

QVector codes(QFormat f, std::size_t n, int lim, Rng& rng) {
    QVector v(f, n);
    for (auto& c : v.codes) c = static_cast<std::int8_t>(rng.integer(-lim, lim));
    return v;
}

Matrix<double> reals(std::size_t r, std::size_t c, double scale, Rng& rng) {
    Matrix<double> m(r, c);
    for (auto& v : m.data()) v = rng.uniform(-scale, scale);
    return m;
}

std::vector<double> reals(std::size_t n, double scale, Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-scale, scale);
    return v;
}

}  // namespace

QNetworkParams random_qparams(const NetworkSpec& spec, Rng& rng, const CodeRanges& ranges) {
    spec.validate();
    const FormatSet& f = spec.formats;
    QNetworkParams p;
    for (const auto& s : spec.layers) {
        QLayerParams l;
        for (int k = 0; k < 4; ++k) {
            l.w_x[k] = codes(f.weight, s.n_hidden, s.n_in, ranges.weight, rng);
            l.w_h[k] = codes(f.weight, s.n_hidden, s.n_hidden, ranges.weight, rng);
            l.bias[k] = codes(f.bias, s.n_hidden, ranges.bias, rng);
        }
        for (int k = 0; k < 3; ++k) l.w_c[k] = codes(f.peephole, s.n_hidden, s.peephole ? ranges.weight : 0, rng);
        p.layers.push_back(std::move(l));
    }
    if (spec.n_out)
        p.fc = QFcParams{codes(f.weight, *spec.n_out, spec.layers.back().n_hidden, ranges.weight, rng),
                         codes(f.bias, *spec.n_out, ranges.bias, rng)};
    return p;
}

QMatrix random_qfeatures(const NetworkSpec& spec, std::size_t steps, Rng& rng, const CodeRanges& ranges) {
    return codes(spec.formats.input, steps, spec.n_in(), ranges.input, rng);
}

FloatNetworkParams random_float_params(const NetworkSpec& spec, Rng& rng, double scale) {
    spec.validate();
    FloatNetworkParams p;
    for (const auto& s : spec.layers) {
        FloatLayerParams l;
        for (int k = 0; k < 4; ++k) {
            l.w_x[k] = reals(s.n_hidden, s.n_in, scale, rng);
            l.w_h[k] = reals(s.n_hidden, s.n_hidden, scale, rng);
            l.bias[k] = reals(s.n_hidden, scale, rng);
        }
        for (int k = 0; k < 3; ++k) l.w_c[k] = reals(s.n_hidden, s.peephole ? scale : 0.0, rng);
        p.layers.push_back(std::move(l));
    }
    if (spec.n_out)
        p.fc = FloatFcParams{reals(*spec.n_out, spec.layers.back().n_hidden, scale, rng),
                             reals(*spec.n_out, scale, rng)};
    return p;
}

Matrix<double> random_float_features(const NetworkSpec& spec, std::size_t steps, Rng& rng, double scale) {
    return reals(steps, spec.n_in(), scale, rng);
}

}  // namespace lstmgrid
