#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lstmgrid/actlut.hpp"
#include "lstmgrid/network.hpp"

namespace lstmgrid {

struct FloatState {
    std::vector<double> h, c;

    static FloatState zeros(std::size_t n_hidden) { return {std::vector<double>(n_hidden), std::vector<double>(n_hidden)}; }
};

struct QState {
    QVector h, c;

    static QState zeros(std::size_t n_hidden, const FormatSet& f) { return {QVector(f.input, n_hidden), QVector(f.cell, n_hidden)}; }
    friend bool operator==(const QState&, const QState&) = default;
};

struct LutSet {
    Lut256 sigmoid;
    Lut256 tanh;

    explicit LutSet(const FormatSet& f)
        : sigmoid(Activation::sigmoid, f.gate_pre, f.gate_out), tanh(Activation::tanh, f.gate_pre, f.tanh_out) {}
};

/// How a dot product is cut into column segments before the partial sums
/// are combined. Segment j covers x[j*x_tile, (j+1)*x_tile) followed by
/// h[j*h_tile, (j+1)*h_tile); each segment accumulates from zero and the
/// segment sums are combined with saturating adds in ascending j. A single
/// segment is the plain x-loop then h-loop order.
struct TileSplit {
    std::size_t tiles = 1;
    std::size_t x_tile = 0;
    std::size_t h_tile = 0;

    static TileSplit even(std::size_t tiles, std::size_t n_x, std::size_t n_h);
    friend bool operator==(const TileSplit&, const TileSplit&) = default;
};

/// Per-layer splits plus the split of the output layer over hidden indices.
struct AccumulationPlan {
    std::vector<TileSplit> layers;
    TileSplit fc{};
};

struct SaturationStats {
    std::size_t accumulators = 0;
    std::size_t saturated = 0;
};

FloatState cell_step_float(const FloatLayerParams& p, const FloatState& s, std::span<const double> x,
                           bool peephole = true);
std::vector<double> fc_step_float(const FloatFcParams& p, std::span<const double> h);

QState cell_step_fixed(const QLayerParams& p, const QState& s, const QVector& x, const LutSet& luts,
                       const FormatSet& f, bool peephole = true, const TileSplit& split = {},
                       SaturationStats* stats = nullptr);
QVector fc_step_fixed(const QFcParams& p, const QVector& h, const LutSet& luts, const FormatSet& f,
                      const TileSplit& split = {}, SaturationStats* stats = nullptr);

/// Runs every row of `features` (T x N_I) through all layers and the
/// optional output layer from zero initial state. Returns T x output_width.
Matrix<double> network_infer_float(const NetworkSpec& spec, const FloatNetworkParams& p,
                                   const Matrix<double>& features);
QMatrix network_infer_fixed(const NetworkSpec& spec, const QNetworkParams& p, const QMatrix& features,
                            const AccumulationPlan* plan = nullptr, SaturationStats* stats = nullptr);

/// Symmetric 255-level quantization (code -128 unused).
QMatrix quantize_symmetric(const Matrix<double>& m, QFormat fmt);
QVector quantize_symmetric(std::span<const double> v, QFormat fmt);
QLayerParams quantize_params_uniform(const FloatLayerParams& p, const FormatSet& f);
QNetworkParams quantize_params_uniform(const FloatNetworkParams& p, const FormatSet& f);

}  // namespace lstmgrid
