#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "lstmgrid/tensor.hpp"

namespace lstmgrid {

/// Gate order used everywhere: parameter layout, compute and reduction phases.
enum class Gate : int { input = 0, forget = 1, cell = 2, output = 3 };
inline constexpr std::array<Gate, 4> kGateOrder{Gate::input, Gate::forget, Gate::cell, Gate::output};
const char* to_string(Gate g);

/// Index of a gate's peephole vector (input, forget, output); cell has none.
inline constexpr int peephole_index(Gate g) { return g == Gate::input ? 0 : g == Gate::forget ? 1 : 2; }

/// Q-format per tensor role.
///
/// The gate pre-activation dot product mixes W_x*x, W_h*h and w_c.c, so
/// weight+input and peephole+cell must land on the same accumulator scale.
/// The tanh LUT serves both the cell candidate and tanh(c_t), so gate_pre
/// and cell share a format.
struct FormatSet {
    QFormat weight = kQ2_5;
    QFormat bias = kQ2_5;
    QFormat peephole = kQ2_5;
    QFormat input = kQ2_5;  // x_t and h_t
    QFormat cell = kQ2_5;
    QFormat gate_pre = kQ2_5;  // LUT input
    QFormat gate_out = kQ0_7;  // sigmoid output (i, f, o, y)
    QFormat tanh_out = kQ0_7;

    int acc_frac() const { return weight.frac_bits + input.frac_bits; }
    void validate() const;

    /// Defaults with every Q2.5 role moved to `frac_bits`.
    static FormatSet with_state_frac(int frac_bits);

    friend bool operator==(const FormatSet&, const FormatSet&) = default;
};

struct LayerShape {
    std::size_t n_in = 0;
    std::size_t n_hidden = 0;
    bool peephole = true;

    friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

struct NetworkSpec {
    std::vector<LayerShape> layers;
    std::optional<std::size_t> n_out;  // fully-connected sigmoid output layer
    FormatSet formats{};

    std::size_t n_in() const { return layers.empty() ? 0 : layers.front().n_in; }
    std::size_t output_width() const;
    void validate() const;

    /// L identical layers with N_I = n_in for the first and N_H thereafter.
    static NetworkSpec uniform(std::size_t layers, std::size_t n_hidden, std::size_t n_in,
                               std::optional<std::size_t> n_out = std::nullopt, bool peephole = true);
};

template <class Mat, class Vec>
struct BasicLayerParams {
    std::array<Mat, 4> w_x;    // N_H x N_I, indexed by Gate
    std::array<Mat, 4> w_h;    // N_H x N_H
    std::array<Vec, 3> w_c;    // peephole i, f, o
    std::array<Vec, 4> bias;   // N_H

    const Mat& wx(Gate g) const { return w_x[static_cast<int>(g)]; }
    const Mat& wh(Gate g) const { return w_h[static_cast<int>(g)]; }
    const Vec& b(Gate g) const { return bias[static_cast<int>(g)]; }

    friend bool operator==(const BasicLayerParams&, const BasicLayerParams&) = default;
};

template <class Mat, class Vec>
struct BasicFcParams {
    Mat w_y;  // N_O x N_H
    Vec b_y;

    friend bool operator==(const BasicFcParams&, const BasicFcParams&) = default;
};

template <class Mat, class Vec>
struct BasicNetworkParams {
    std::vector<BasicLayerParams<Mat, Vec>> layers;
    std::optional<BasicFcParams<Mat, Vec>> fc;

    friend bool operator==(const BasicNetworkParams&, const BasicNetworkParams&) = default;
};

using FloatLayerParams = BasicLayerParams<Matrix<double>, std::vector<double>>;
using QLayerParams = BasicLayerParams<QMatrix, QVector>;
using FloatFcParams = BasicFcParams<Matrix<double>, std::vector<double>>;
using QFcParams = BasicFcParams<QMatrix, QVector>;
using FloatNetworkParams = BasicNetworkParams<Matrix<double>, std::vector<double>>;
using QNetworkParams = BasicNetworkParams<QMatrix, QVector>;

/// Throws ConfigError on any shape or format disagreement with `spec`.
void check_params(const NetworkSpec& spec, const QNetworkParams& params);
void check_params(const NetworkSpec& spec, const FloatNetworkParams& params);

bool is_vanilla(const QLayerParams& p);

}  // namespace lstmgrid
