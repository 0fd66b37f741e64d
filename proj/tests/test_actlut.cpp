#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "lstmgrid/actlut.hpp"

using namespace lstmgrid;

namespace {

std::vector<double> dense_grid(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n);
    return v;
}

double exact(Activation a, double x) { return a == Activation::sigmoid ? 1.0 / (1.0 + std::exp(-x)) : std::tanh(x); }

}  // namespace

TEST_CASE("examples") {
    const Lut256 th(Activation::tanh, kQ2_5, kQ0_7);
    const Lut256 sg(Activation::sigmoid, kQ2_5, kQ0_7);
    CHECK(th.apply(Q8{0, kQ2_5}).code == 0);
    CHECK(th.at(127) == 127);
    CHECK(sg.apply(Q8{0, kQ2_5}).code == 64);
    // sigmoid(-4) = 0.01799 -> round(2.30) = 2
    CHECK(sg.at(-128) == 2);
    CHECK_THROWS_AS(th.apply(Q8{0, kQ0_7}), ConfigError);
}

TEST_CASE("exhaustive table scan against the construction rule") {
    for (auto kind : {Activation::sigmoid, Activation::tanh})
        for (int in = 0; in <= 7; ++in)
            for (int out = 0; out <= 7; ++out) {
                const Lut256 lut(kind, QFormat{in}, QFormat{out});
                for (int c = -128; c <= 127; ++c) {
                    const double x = c / std::ldexp(1.0, in);
                    double y = std::round(std::ldexp(exact(kind, x), out));
                    y = std::min(127.0, std::max(-128.0, y));
                    REQUIRE(lut.at(static_cast<std::int8_t>(c)) == static_cast<int>(y));
                }
            }
}

TEST_CASE("monotone and tanh odd within one code") {
    const Lut256 th(Activation::tanh, kQ2_5, kQ0_7);
    const Lut256 sg(Activation::sigmoid, kQ2_5, kQ0_7);
    for (int c = -128; c < 127; ++c) {
        REQUIRE(th.at(c) <= th.at(c + 1));
        REQUIRE(sg.at(c) <= sg.at(c + 1));
    }
    for (int c = -127; c <= 127; ++c) REQUIRE(std::abs(th.at(c) + th.at(-c)) <= 1);
}

TEST_CASE("error stats on a uniform grid are frozen") {
    const auto grid = dense_grid(-4.0, 4.0, 1 << 20);
    const auto th = lut_error_stats(Lut256(Activation::tanh, kQ2_5, kQ0_7), grid);
    const auto sg = lut_error_stats(Lut256(Activation::sigmoid, kQ2_5, kQ0_7), grid);
    CHECK(th.count == grid.size());
    CHECK(th.max_se == doctest::Approx(3.374e-4).epsilon(0.01));
    CHECK(th.mse == doctest::Approx(2.18e-5).epsilon(0.02));
    CHECK(sg.max_se == doctest::Approx(5.20e-5).epsilon(0.01));
    CHECK(sg.max_se <= 1.0e-4);
    CHECK(th.max_se <= 4.0e-4);
}

TEST_CASE("exactly representable samples are bounded by output rounding") {
    const Lut256 th(Activation::tanh, kQ2_5, kQ0_7);
    std::vector<double> xs;
    // Skip inputs whose activation lies beyond the largest output code.
    for (int c = -128; c <= 127; ++c)
        if (std::abs(std::tanh(c / 32.0)) * 128.0 < 127.5) xs.push_back(c / 32.0);
    CHECK(xs.size() == 199);
    const auto s = lut_error_stats(th, xs);
    CHECK(s.max_se <= std::pow(0.5 / 128.0, 2) + 1e-18);
}

TEST_CASE("triangle bound on arbitrary inputs") {
    for (auto kind : {Activation::sigmoid, Activation::tanh}) {
        const Lut256 lut(kind, kQ2_5, kQ0_7);
        const double slope = kind == Activation::sigmoid ? 0.25 : 1.0;
        const double bound = 0.5 / 32.0 * slope + 0.5 / 128.0;
        for (double x : dense_grid(-3.98, 3.98, 100000)) {
            const double y = dequantize(lut.apply(quantize(x, kQ2_5)));
            REQUIRE(std::abs(y - exact(kind, x)) <= bound + 1e-12);
        }
    }
}

TEST_CASE("empty sample set is rejected") {
    const Lut256 th(Activation::tanh, kQ2_5, kQ0_7);
    CHECK_THROWS_AS(lut_error_stats(th, std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("csv dump has 256 rows") {
    std::ostringstream os;
    Lut256(Activation::sigmoid, kQ2_5, kQ0_7).dump_csv(os);
    const std::string s = os.str();
    CHECK(std::count(s.begin(), s.end(), '\n') == 257);
    CHECK(s.rfind("code,input,output_code,output\n-128,-4,2,0.015625\n", 0) == 0);
}
