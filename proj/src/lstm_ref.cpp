#include "lstmgrid/lstm_ref.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lstmgrid {

TileSplit TileSplit::even(std::size_t tiles, std::size_t n_x, std::size_t n_h) {
    if (tiles == 0) throw ConfigError("TileSplit: zero tiles");
    return {tiles, (n_x + tiles - 1) / tiles, (n_h + tiles - 1) / tiles};
}

namespace {

double sigmoid(double v) { return activate(Activation::sigmoid, v); }

void expect_len(std::size_t got, std::size_t want, const char* what) {
    if (got != want)
        throw ConfigError(std::string(what) + ": length " + std::to_string(got) + ", expected " + std::to_string(want));
}

double dot_row(const Matrix<double>& m, std::size_t r, std::span<const double> v) {
    double acc = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) acc += m(r, k) * v[k];
    return acc;
}

struct Segment {
    std::size_t x_begin, x_end, h_begin, h_end;
};

Segment segment(const TileSplit& split, std::size_t j, std::size_t n_x, std::size_t n_h) {
    if (split.tiles <= 1) return {0, n_x, 0, n_h};
    const auto clip = [](std::size_t v, std::size_t n) { return std::min(v, n); };
    return {clip(j * split.x_tile, n_x), clip((j + 1) * split.x_tile, n_x), clip(j * split.h_tile, n_h),
            clip((j + 1) * split.h_tile, n_h)};
}

void check_split(const TileSplit& split, std::size_t n_x, std::size_t n_h) {
    if (split.tiles <= 1) return;
    if (split.x_tile * split.tiles < n_x || split.h_tile * split.tiles < n_h)
        throw ConfigError("TileSplit: segments do not cover the operands");
}

/// Row r of W_x*x + W_h*h accumulated segment by segment.
Acc16 dot_fixed(const QMatrix& wx, const QMatrix& wh, std::size_t r, const QVector& x, const QVector& h,
                const TileSplit& split, int acc_frac) {
    Acc16 acc{0, acc_frac, false};
    const std::size_t tiles = std::max<std::size_t>(split.tiles, 1);
    for (std::size_t j = 0; j < tiles; ++j) {
        const Segment s = segment(split, j, x.size(), h.size());
        Acc16 part{0, acc_frac, false};
        for (std::size_t k = s.x_begin; k < s.x_end; ++k) part = mac(part, wx.at(r, k), x.at(k));
        for (std::size_t k = s.h_begin; k < s.h_end; ++k) part = mac(part, wh.at(r, k), h.at(k));
        acc = sat_add(acc, part);
    }
    return acc;
}

void record(SaturationStats* stats, const Acc16& acc) {
    if (!stats) return;
    ++stats->accumulators;
    if (acc.saturated) ++stats->saturated;
}

}  // namespace

FloatState cell_step_float(const FloatLayerParams& p, const FloatState& s, std::span<const double> x,
                           bool peephole) {
    const std::size_t n_h = p.b(Gate::input).size();
    expect_len(x.size(), p.wx(Gate::input).cols(), "cell_step_float x");
    expect_len(s.h.size(), n_h, "cell_step_float h");
    expect_len(s.c.size(), n_h, "cell_step_float c");
    const double pk = peephole ? 1.0 : 0.0;
    FloatState out = FloatState::zeros(n_h);
    std::vector<double> o_pre(n_h);
    for (std::size_t r = 0; r < n_h; ++r) {
        auto pre = [&](Gate g) { return dot_row(p.wx(g), r, x) + dot_row(p.wh(g), r, s.h) + p.b(g)[r]; };
        const double i = sigmoid(pre(Gate::input) + pk * p.w_c[0][r] * s.c[r]);
        const double f = sigmoid(pre(Gate::forget) + pk * p.w_c[1][r] * s.c[r]);
        const double cand = std::tanh(pre(Gate::cell));
        out.c[r] = f * s.c[r] + i * cand;
        const double o = sigmoid(pre(Gate::output) + pk * p.w_c[2][r] * out.c[r]);
        out.h[r] = o * std::tanh(out.c[r]);
    }
    return out;
}

std::vector<double> fc_step_float(const FloatFcParams& p, std::span<const double> h) {
    expect_len(h.size(), p.w_y.cols(), "fc_step_float h");
    std::vector<double> y(p.w_y.rows());
    for (std::size_t r = 0; r < y.size(); ++r) y[r] = sigmoid(dot_row(p.w_y, r, h) + p.b_y[r]);
    return y;
}

QState cell_step_fixed(const QLayerParams& p, const QState& s, const QVector& x, const LutSet& luts,
                       const FormatSet& f, bool peephole, const TileSplit& split, SaturationStats* stats) {
    const std::size_t n_h = p.b(Gate::input).size();
    expect_len(x.size(), p.wx(Gate::input).cols(), "cell_step_fixed x");
    expect_len(s.h.size(), n_h, "cell_step_fixed h");
    expect_len(s.c.size(), n_h, "cell_step_fixed c");
    if (!(x.format == f.input) || !(s.h.format == f.input) || !(s.c.format == f.cell))
        throw ConfigError("cell_step_fixed: state or input format mismatch");
    check_split(split, x.size(), n_h);

    const int acc_frac = f.acc_frac();
    QState out = QState::zeros(n_h, f);
    for (std::size_t r = 0; r < n_h; ++r) {
        auto gate = [&](Gate g, const Q8& c_peep, const Lut256& lut) {
            Acc16 acc = dot_fixed(p.wx(g), p.wh(g), r, x, s.h, split, acc_frac);
            if (peephole && g != Gate::cell) acc = mac(acc, p.w_c[peephole_index(g)].at(r), c_peep);
            acc = add_aligned(acc, p.b(g).at(r));
            record(stats, acc);
            return lut.apply(requantize(acc, f.gate_pre));
        };
        const Q8 c_prev = s.c.at(r);
        const Q8 i = gate(Gate::input, c_prev, luts.sigmoid);
        const Q8 fg = gate(Gate::forget, c_prev, luts.sigmoid);
        const Q8 cand = gate(Gate::cell, c_prev, luts.tanh);

        const Acc16 keep = product(fg, c_prev);
        const Acc16 write = rescale(product(i, cand), keep.frac_bits);
        const Q8 c_new = requantize(sat_add(keep, write), f.cell);
        out.c.codes[r] = c_new.code;

        const Q8 o = gate(Gate::output, c_new, luts.sigmoid);
        out.h.codes[r] = requantize(product(o, luts.tanh.apply(c_new)), f.input).code;
    }
    return out;
}

QVector fc_step_fixed(const QFcParams& p, const QVector& h, const LutSet& luts, const FormatSet& f,
                      const TileSplit& split, SaturationStats* stats) {
    expect_len(h.size(), p.w_y.cols(), "fc_step_fixed h");
    if (!(h.format == f.input)) throw ConfigError("fc_step_fixed: hidden state format mismatch");
    check_split({split.tiles, 0, split.h_tile}, 0, h.size());
    const QMatrix no_x(f.weight, p.w_y.rows(), 0);
    const QVector empty(f.input, 0);
    QVector y(f.gate_out, p.w_y.rows());
    for (std::size_t r = 0; r < y.size(); ++r) {
        Acc16 acc = dot_fixed(no_x, p.w_y, r, empty, h, {split.tiles, 0, split.h_tile}, f.acc_frac());
        acc = add_aligned(acc, p.b_y.at(r));
        record(stats, acc);
        y.codes[r] = luts.sigmoid.apply(requantize(acc, f.gate_pre)).code;
    }
    return y;
}

Matrix<double> network_infer_float(const NetworkSpec& spec, const FloatNetworkParams& p,
                                   const Matrix<double>& features) {
    check_params(spec, p);
    if (features.rows() > 0) expect_len(features.cols(), spec.n_in(), "network_infer_float features");
    Matrix<double> out(features.rows(), spec.output_width());
    std::vector<FloatState> states;
    for (const auto& l : spec.layers) states.push_back(FloatState::zeros(l.n_hidden));
    for (std::size_t t = 0; t < features.rows(); ++t) {
        std::vector<double> x(features.row(t).begin(), features.row(t).end());
        for (std::size_t l = 0; l < spec.layers.size(); ++l) {
            states[l] = cell_step_float(p.layers[l], states[l], x, spec.layers[l].peephole);
            x = states[l].h;
        }
        if (p.fc) x = fc_step_float(*p.fc, x);
        std::copy(x.begin(), x.end(), out.row(t).begin());
    }
    return out;
}

QMatrix network_infer_fixed(const NetworkSpec& spec, const QNetworkParams& p, const QMatrix& features,
                            const AccumulationPlan* plan, SaturationStats* stats) {
    check_params(spec, p);
    const FormatSet& f = spec.formats;
    if (features.rows() > 0) expect_len(features.cols(), spec.n_in(), "network_infer_fixed features");
    if (features.rows() > 0 && !(features.format == f.input))
        throw ConfigError("network_infer_fixed: features must be " + f.input.name());
    if (plan && plan->layers.size() != spec.layers.size())
        throw ConfigError("network_infer_fixed: accumulation plan does not match layer count");
    const LutSet luts(f);
    QMatrix out(spec.n_out ? f.gate_out : f.input, features.rows(), spec.output_width());
    std::vector<QState> states;
    for (const auto& l : spec.layers) states.push_back(QState::zeros(l.n_hidden, f));
    for (std::size_t t = 0; t < features.rows(); ++t) {
        QVector x(f.input, std::vector<std::int8_t>(features.codes.row(t).begin(), features.codes.row(t).end()));
        for (std::size_t l = 0; l < spec.layers.size(); ++l) {
            const TileSplit split = plan ? plan->layers[l] : TileSplit{};
            states[l] = cell_step_fixed(p.layers[l], states[l], x, luts, f, spec.layers[l].peephole, split, stats);
            x = states[l].h;
        }
        if (p.fc) x = fc_step_fixed(*p.fc, x, luts, f, plan ? plan->fc : TileSplit{}, stats);
        std::copy(x.codes.begin(), x.codes.end(), out.codes.row(t).begin());
    }
    return out;
}

QMatrix quantize_symmetric(const Matrix<double>& m, QFormat fmt) {
    QMatrix q = quantize_matrix(m, fmt);
    for (auto& c : q.codes.data()) c = std::max<std::int8_t>(c, -127);
    return q;
}

QVector quantize_symmetric(std::span<const double> v, QFormat fmt) {
    QVector q = quantize_vector(v, fmt);
    for (auto& c : q.codes) c = std::max<std::int8_t>(c, -127);
    return q;
}

QLayerParams quantize_params_uniform(const FloatLayerParams& p, const FormatSet& f) {
    QLayerParams q;
    for (int k = 0; k < 4; ++k) {
        q.w_x[k] = quantize_symmetric(p.w_x[k], f.weight);
        q.w_h[k] = quantize_symmetric(p.w_h[k], f.weight);
        q.bias[k] = quantize_symmetric(p.bias[k], f.bias);
    }
    for (int k = 0; k < 3; ++k) q.w_c[k] = quantize_symmetric(p.w_c[k], f.peephole);
    return q;
}

QNetworkParams quantize_params_uniform(const FloatNetworkParams& p, const FormatSet& f) {
    QNetworkParams q;
    for (const auto& l : p.layers) q.layers.push_back(quantize_params_uniform(l, f));
    if (p.fc) q.fc = QFcParams{quantize_symmetric(p.fc->w_y, f.weight), quantize_symmetric(p.fc->b_y, f.bias)};
    return q;
}

}  // namespace lstmgrid
