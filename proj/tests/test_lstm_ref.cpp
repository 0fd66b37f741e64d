#include <cmath>
#include <vector>

#include "doctest.h"
#include "lstmgrid/lstm_ref.hpp"
#include "lstmgrid/random_network.hpp"

using namespace lstmgrid;

namespace {

double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Scalar float reference with explicit per-gate index loops.
FloatState scalar_float(const FloatLayerParams& p, const FloatState& s, const std::vector<double>& x) {
    const std::size_t nh = s.h.size(), ni = x.size();
    std::vector<double> z[4];
    for (int g = 0; g < 4; ++g) {
        z[g].assign(nh, 0.0);
        for (std::size_t r = 0; r < nh; ++r) {
            double a = p.bias[g][r];
            for (std::size_t k = 0; k < ni; ++k) a += p.w_x[g](r, k) * x[k];
            for (std::size_t k = 0; k < nh; ++k) a += p.w_h[g](r, k) * s.h[k];
            z[g][r] = a;
        }
    }
    FloatState o{std::vector<double>(nh), std::vector<double>(nh)};
    for (std::size_t r = 0; r < nh; ++r) {
        const double ig = sig(z[0][r] + p.w_c[0][r] * s.c[r]);
        const double fg = sig(z[1][r] + p.w_c[1][r] * s.c[r]);
        o.c[r] = fg * s.c[r] + ig * std::tanh(z[2][r]);
        const double og = sig(z[3][r] + p.w_c[2][r] * o.c[r]);
        o.h[r] = og * std::tanh(o.c[r]);
    }
    return o;
}

// Golden fixed-point step: raw codes and qformat primitives only, segments
// combined in ascending order.
struct Golden {
    const QLayerParams& p;
    const FormatSet& f;
    Lut256 sg{Activation::sigmoid, f.gate_pre, f.gate_out};
    Lut256 th{Activation::tanh, f.gate_pre, f.tanh_out};
    std::size_t tiles = 1, xt = 0, ht = 0;

    Acc16 pre(int g, std::size_t r, const QVector& x, const QVector& h) const {
        const int af = f.weight.frac_bits + f.input.frac_bits;
        const std::size_t ni = x.size(), nh = h.size();
        const std::size_t xs = tiles == 1 ? ni : xt, hs = tiles == 1 ? nh : ht;
        Acc16 total{0, af, false};
        for (std::size_t j = 0; j < tiles; ++j) {
            Acc16 part{0, af, false};
            for (std::size_t k = j * xs; k < std::min((j + 1) * xs, ni); ++k)
                part = mac(part, Q8{p.w_x[g].codes(r, k), f.weight}, Q8{x.codes[k], f.input});
            for (std::size_t k = j * hs; k < std::min((j + 1) * hs, nh); ++k)
                part = mac(part, Q8{p.w_h[g].codes(r, k), f.weight}, Q8{h.codes[k], f.input});
            total = sat_add(total, part);
        }
        return total;
    }

    QState step(const QState& s, const QVector& x) const {
        const std::size_t nh = s.h.size();
        QState o{QVector(f.input, nh), QVector(f.cell, nh)};
        for (std::size_t r = 0; r < nh; ++r) {
            const Q8 c0{s.c.codes[r], f.cell};
            Q8 a[4];
            for (int g = 0; g < 3; ++g) {
                Acc16 acc = pre(g, r, x, s.h);
                if (g != 2) acc = mac(acc, Q8{p.w_c[g].codes[r], f.peephole}, c0);
                acc = add_aligned(acc, Q8{p.bias[g].codes[r], f.bias});
                const Q8 q = requantize(acc, f.gate_pre);
                a[g] = g == 2 ? th.apply(q) : sg.apply(q);
            }
            const Acc16 fc = mac(Acc16{0, f.gate_out.frac_bits + f.cell.frac_bits, false}, a[1], c0);
            Acc16 ic = mac(Acc16{0, f.gate_out.frac_bits + f.tanh_out.frac_bits, false}, a[0], a[2]);
            ic = rescale(ic, fc.frac_bits);
            const Q8 c1 = requantize(sat_add(fc, ic), f.cell);
            Acc16 acc = pre(3, r, x, s.h);
            acc = mac(acc, Q8{p.w_c[2].codes[r], f.peephole}, c1);
            acc = add_aligned(acc, Q8{p.bias[3].codes[r], f.bias});
            const Q8 og = sg.apply(requantize(acc, f.gate_pre));
            const Acc16 hh = mac(Acc16{0, f.gate_out.frac_bits + f.tanh_out.frac_bits, false}, og, th.apply(c1));
            o.c.codes[r] = c1.code;
            o.h.codes[r] = requantize(hh, f.input).code;
        }
        return o;
    }
};

QVector row(const QMatrix& m, std::size_t t) {
    return QVector(m.format, std::vector<std::int8_t>(m.codes.row(t).begin(), m.codes.row(t).end()));
}

}  // namespace

TEST_CASE("float cell: zero instance") {
    const auto spec = NetworkSpec::uniform(1, 3, 2);
    Rng rng(1);
    auto p = random_float_params(spec, rng, 0.0).layers[0];
    const auto s = cell_step_float(p, FloatState::zeros(3), std::vector<double>{0.0, 0.0});
    for (double v : s.h) CHECK(v == 0.0);
    for (double v : s.c) CHECK(v == 0.0);
}

TEST_CASE("float cell: saturated forget gate keeps the cell") {
    const auto spec = NetworkSpec::uniform(1, 2, 2);
    Rng rng(1);
    auto p = random_float_params(spec, rng, 0.0).layers[0];
    p.bias[1] = {60.0, 60.0};
    p.bias[0] = {-60.0, -60.0};
    const FloatState s0{{0.0, 0.0}, {0.7, -1.3}};
    const auto s = cell_step_float(p, s0, std::vector<double>{0.0, 0.0});
    CHECK(s.c[0] == doctest::Approx(0.7));
    CHECK(s.c[1] == doctest::Approx(-1.3));
}

TEST_CASE("float cell matches scalar oracle, with and without peephole") {
    for (bool peep : {true, false}) {
        const auto spec = NetworkSpec::uniform(1, 3, 3, std::nullopt, peep);
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            Rng rng(seed);
            const auto p = random_float_params(spec, rng, 1.0).layers[0];
            FloatState s{{0.1, -0.2, 0.3}, {0.5, -0.4, 1.1}};
            const std::vector<double> x{0.3, -0.9, 0.6};
            const auto a = cell_step_float(p, s, x, peep);
            const auto b = scalar_float(p, s, x);
            for (std::size_t r = 0; r < 3; ++r) {
                REQUIRE(a.h[r] == doctest::Approx(b.h[r]).epsilon(1e-12));
                REQUIRE(a.c[r] == doctest::Approx(b.c[r]).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("fixed cell: zero instance") {
    const auto spec = NetworkSpec::uniform(1, 4, 3);
    Rng rng(3);
    const auto p = random_qparams(spec, rng, {0, 0, 0}).layers[0];
    const FormatSet f;
    const auto s = cell_step_fixed(p, QState::zeros(4, f), QVector(f.input, 3), LutSet(f), f);
    for (auto c : s.h.codes) CHECK(c == 0);
    for (auto c : s.c.codes) CHECK(c == 0);
}

TEST_CASE("fixed cell: single neuron hand trace") {
    const auto spec = NetworkSpec::uniform(1, 1, 1);
    Rng rng(3);
    auto p = random_qparams(spec, rng, {0, 0, 0}).layers[0];
    const FormatSet f;
    p.w_x[2].codes(0, 0) = 32;  // W_xc = 1.0
    QVector x(f.input, std::vector<std::int8_t>{32});
    const auto s = cell_step_fixed(p, QState::zeros(1, f), x, LutSet(f), f);
    // i = f = o = 64; cand: 32*32 >> 5 = 32 -> tanh(1.0)*128 = 97.5 -> 97.
    // c: 64*97 = 6208 @14 -> 1552 @12 -> 1552/128 = 12.125 -> 12.
    // h: tanh(0.375)*128 = 45.9 -> 46; 64*46 = 2944 @14 -> 2944/512 = 5.75 -> 6.
    CHECK(s.c.codes[0] == 12);
    CHECK(s.h.codes[0] == 6);
}

TEST_CASE("fixed cell matches golden oracle on random 4x4 instances") {
    const FormatSet f;
    const LutSet luts(f);
    for (bool peep : {true, false})
        for (const auto& ranges : {CodeRanges::small(), CodeRanges::full()}) {
            const auto spec = NetworkSpec::uniform(1, 4, 4, std::nullopt, peep);
            std::size_t sat = 0;
            for (std::uint64_t seed = 0; seed < 200; ++seed) {
                Rng rng(seed);
                const auto p = random_qparams(spec, rng, ranges).layers[0];
                const auto xs = random_qfeatures(spec, 3, rng, ranges);
                const Golden g{p, f};
                QState a = QState::zeros(4, f), b = a;
                for (std::size_t t = 0; t < 3; ++t) {
                    SaturationStats st;
                    a = cell_step_fixed(p, a, row(xs, t), luts, f, peep, {}, &st);
                    b = g.step(b, row(xs, t));
                    REQUIRE(a == b);
                    sat += st.saturated;
                }
            }
            if (ranges.weight == 127) CHECK(sat > 0);
            if (ranges.weight == CodeRanges::small().weight) CHECK(sat == 0);
        }
}

TEST_CASE("segmented accumulation") {
    const FormatSet f;
    const LutSet luts(f);
    const auto spec = NetworkSpec::uniform(1, 7, 5);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng rng(seed);
        const bool full = seed % 2 == 1;
        const auto p = random_qparams(spec, rng, full ? CodeRanges::full() : CodeRanges::small()).layers[0];
        const auto xs = random_qfeatures(spec, 2, rng, full ? CodeRanges::full() : CodeRanges::small());
        const TileSplit split = TileSplit::even(3, 5, 7);
        CHECK(split.x_tile == 2);
        CHECK(split.h_tile == 3);
        Golden g{p, f};
        g.tiles = 3;
        g.xt = 2;
        g.ht = 3;
        QState a = QState::zeros(7, f), b = a, m = a;
        for (std::size_t t = 0; t < 2; ++t) {
            a = cell_step_fixed(p, a, row(xs, t), luts, f, true, split);
            b = g.step(b, row(xs, t));
            REQUIRE(a == b);
            m = cell_step_fixed(p, m, row(xs, t), luts, f);
            if (!full) REQUIRE(a == m);
        }
    }
}

TEST_CASE("segment order matters once a partial sum saturates") {
    const FormatSet f;
    const LutSet luts(f);
    const auto spec = NetworkSpec::uniform(1, 7, 5);
    Rng rng(0);
    auto p = random_qparams(spec, rng, {0, 0, 0}).layers[0];
    for (auto& c : p.w_x[2].codes.data()) c = 127;
    for (auto& c : p.w_h[2].codes.data()) c = 127;
    const QVector x(f.input, std::vector<std::int8_t>{127, 127, -127, -127, 0});
    QState s = QState::zeros(7, f);
    s.h.codes[0] = 127;
    // Listing order: x sums to 0, h adds 16129 -> candidate clamps high.
    // Segments: (x0,x1,h0) saturates at 32767, then (x2,x3) adds -32258.
    Golden g{p, f};
    g.tiles = 3;
    g.xt = 2;
    g.ht = 3;
    const auto split = cell_step_fixed(p, s, x, luts, f, true, TileSplit::even(3, 5, 7));
    const auto mono = cell_step_fixed(p, s, x, luts, f);
    CHECK(split == g.step(s, x));
    CHECK_FALSE(split == mono);
}

TEST_CASE("fc step") {
    const FormatSet f;
    const LutSet luts(f);
    const auto spec = NetworkSpec::uniform(1, 3, 2, 2);
    Rng rng(5);
    auto fp = random_qparams(spec, rng, {0, 0, 0});
    const QVector h(f.input, std::vector<std::int8_t>{10, -20, 30});
    for (auto c : fc_step_fixed(*fp.fc, h, luts, f).codes) CHECK(c == 64);

    FloatFcParams ff{Matrix<double>(1, 1, 0.5), {0.25}};
    const auto y = fc_step_float(ff, std::vector<double>{0.8});
    CHECK(y[0] == doctest::Approx(sig(0.5 * 0.8 + 0.25)));

    QFcParams one{QMatrix(f.weight, 1, 1), QVector(f.bias, std::vector<std::int8_t>{8})};
    one.w_y.codes(0, 0) = 16;
    // 16*32 = 512 @10, + 8<<5 = 768 -> 24 @5 (0.75) -> sigmoid(0.75)*128 = 86.9 -> 87
    CHECK(fc_step_fixed(one, QVector(f.input, std::vector<std::int8_t>{32}), luts, f).codes[0] == 87);

    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng r(seed);
        const auto spec2 = NetworkSpec::uniform(1, 6, 2, 4);
        const auto p = random_qparams(spec2, r, CodeRanges::full());
        const auto hv = random_qfeatures(NetworkSpec::uniform(1, 1, 6), 1, r, CodeRanges::full());
        const QVector hx = row(hv, 0);
        const auto got = fc_step_fixed(*p.fc, hx, luts, f, TileSplit::even(2, 0, 6));
        for (std::size_t o = 0; o < 4; ++o) {
            Acc16 total{0, 10, false};
            for (std::size_t j = 0; j < 2; ++j) {
                Acc16 part{0, 10, false};
                for (std::size_t k = 3 * j; k < 3 * j + 3; ++k)
                    part = mac(part, Q8{p.fc->w_y.codes(o, k), f.weight}, Q8{hx.codes[k], f.input});
                total = sat_add(total, part);
            }
            total = add_aligned(total, Q8{p.fc->b_y.codes[o], f.bias});
            REQUIRE(got.codes[o] == luts.sigmoid.at(requantize(total, f.gate_pre).code));
        }
    }
}

TEST_CASE("network inference") {
    const FormatSet f;
    SUBCASE("T = 0") {
        const auto spec = NetworkSpec::uniform(2, 4, 3, 2);
        Rng rng(1);
        const auto p = random_qparams(spec, rng);
        const auto out = network_infer_fixed(spec, p, QMatrix(f.input, 0, 3));
        CHECK(out.rows() == 0);
        const auto fo = network_infer_float(spec, random_float_params(spec, rng, 0.5), Matrix<double>(0, 3));
        CHECK(fo.rows() == 0);
    }
    SUBCASE("single unit over two steps") {
        const auto spec = NetworkSpec::uniform(1, 1, 1);
        Rng rng(3);
        auto p = random_qparams(spec, rng, {0, 0, 0});
        p.layers[0].w_x[2].codes(0, 0) = 32;
        QMatrix xs(f.input, 2, 1);
        xs.codes(0, 0) = 32;
        xs.codes(1, 0) = 32;
        const auto out = network_infer_fixed(spec, p, xs);
        CHECK(out.codes(0, 0) == 6);
        // step 2: f*c = 64*12 = 768 @12, i*cand = 1552 @12 -> 2320/128 = 18.1 -> 18;
        // tanh(0.5625)*128 = 65.3 -> 65; 64*65 = 4160 @14 -> 8.125 -> 8.
        CHECK(out.codes(1, 0) == 8);
    }
    SUBCASE("state threads through steps") {
        const auto spec = NetworkSpec::uniform(2, 5, 3);
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            Rng rng(seed);
            const auto p = random_qparams(spec, rng, CodeRanges::small());
            const auto xs = random_qfeatures(spec, 4, rng, CodeRanges::small());
            const auto out = network_infer_fixed(spec, p, xs);
            const LutSet luts(f);
            QState s0 = QState::zeros(5, f), s1 = s0;
            for (std::size_t t = 0; t < 4; ++t) {
                s0 = cell_step_fixed(p.layers[0], s0, row(xs, t), luts, f);
                s1 = cell_step_fixed(p.layers[1], s1, s0.h, luts, f);
                REQUIRE(row(out, t) == s1.h);
            }
        }
    }
    SUBCASE("shape errors") {
        const auto spec = NetworkSpec::uniform(1, 4, 3);
        Rng rng(1);
        const auto p = random_qparams(spec, rng);
        CHECK_THROWS_AS(network_infer_fixed(spec, p, QMatrix(f.input, 2, 4)), ConfigError);
        CHECK_THROWS_AS(network_infer_fixed(NetworkSpec::uniform(1, 5, 3), p, QMatrix(f.input, 2, 3)), ConfigError);
    }
}

TEST_CASE("float and fixed agree within the propagated LSB bound") {
    // One step from an exactly shared state with the dequantized fixed
    // parameters, so the only error sources are requantization and LUT
    // rounding.
    const FormatSet f;
    const LutSet luts(f);
    const double pre = 0.5 / 32, out = 0.5 / 128;
    const double es = 0.25 * pre + out, et = pre + out;
    const auto spec = NetworkSpec::uniform(1, 6, 6);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng rng(seed);
        const auto q = random_qparams(spec, rng, {4, 8, 32}).layers[0];
        FloatLayerParams fl;
        for (int k = 0; k < 4; ++k) {
            fl.w_x[k] = dequantize_matrix(q.w_x[k]);
            fl.w_h[k] = dequantize_matrix(q.w_h[k]);
            fl.bias[k] = dequantize_vector(q.bias[k]);
        }
        for (int k = 0; k < 3; ++k) fl.w_c[k] = dequantize_vector(q.w_c[k]);
        const auto xq = row(random_qfeatures(spec, 1, rng, {4, 8, 32}), 0);
        const auto hq = row(random_qfeatures(spec, 1, rng, {4, 8, 32}), 0);
        const auto cq = row(random_qfeatures(spec, 1, rng, {4, 8, 32}), 0);
        const QState sq{hq, cq};
        SaturationStats st;
        const auto a = cell_step_fixed(q, sq, xq, luts, f, true, {}, &st);
        REQUIRE(st.saturated == 0);
        const auto b = cell_step_float(fl, {dequantize_vector(hq), dequantize_vector(cq)}, dequantize_vector(xq));
        for (std::size_t r = 0; r < 6; ++r) {
            const double c_prev = std::abs(dequantize(cq.at(r)));
            const double ec = es * (c_prev + 1.0) + et + es * et + std::ldexp(0.5, -12) + pre;
            const double eo = 0.25 * (std::abs(dequantize(q.w_c[2].at(r))) * ec + pre) + out;
            const double etc = ec + out;
            const double eh = eo + etc + eo * etc + pre;
            REQUIRE(std::abs(dequantize(a.c.at(r)) - b.c[r]) <= ec);
            REQUIRE(std::abs(dequantize(a.h.at(r)) - b.h[r]) <= eh);
        }
    }
}

TEST_CASE("uniform post-training quantization") {
    const FormatSet f;
    Matrix<double> z(3, 3, 0.0);
    const auto zq = quantize_symmetric(z, f.weight);
    for (auto c : zq.codes.data()) CHECK(c == 0);
    Matrix<double> exact(1, 3);
    exact(0, 0) = 0.5;
    exact(0, 1) = -1.25;
    exact(0, 2) = 3.96875;
    CHECK(dequantize_matrix(quantize_symmetric(exact, f.weight)) == exact);

    Rng rng(11);
    Matrix<double> m(40, 40);
    for (auto& v : m.data()) v = rng.uniform(-5.0, 5.0);
    const auto q = quantize_symmetric(m, f.weight);
    for (std::size_t k = 0; k < m.data().size(); ++k) {
        const int c = q.codes.data()[k];
        REQUIRE(c >= -127);
        const double exact_code = m.data()[k] * 32.0;
        if (exact_code > -127.5 && exact_code < 127.5) REQUIRE(std::abs(c - exact_code) <= 0.5);
        else REQUIRE(std::abs(c) == 127);
    }

    const auto spec = NetworkSpec::uniform(2, 4, 3, 2);
    const auto fp = random_float_params(spec, rng, 3.0);
    const auto qp = quantize_params_uniform(fp, f);
    CHECK_NOTHROW(check_params(spec, qp));
}
