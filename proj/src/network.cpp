#include "lstmgrid/network.hpp"

#include <algorithm>
#include <string>

namespace lstmgrid {

const char* to_string(Gate g) {
    switch (g) {
        case Gate::input:
            return "i";
        case Gate::forget:
            return "f";
        case Gate::cell:
            return "c";
        case Gate::output:
            return "o";
    }
    return "?";
}

void FormatSet::validate() const {
    for (QFormat f : {weight, bias, peephole, input, cell, gate_pre, gate_out, tanh_out})
        if (!f.valid()) throw ConfigError("format: frac_bits " + std::to_string(f.frac_bits) + " outside [0,7]");
    if (weight.frac_bits + input.frac_bits != peephole.frac_bits + cell.frac_bits)
        throw ConfigError("format: weight*input (" + std::to_string(acc_frac()) + ") and peephole*cell (" +
                          std::to_string(peephole.frac_bits + cell.frac_bits) +
                          ") land on different accumulator scales");
    if (!(gate_pre == cell)) throw ConfigError("format: gate_pre and cell must match (shared tanh LUT)");
    if (bias.frac_bits > acc_frac()) throw ConfigError("format: bias finer than the accumulator");
    if (gate_pre.frac_bits > acc_frac()) throw ConfigError("format: gate_pre finer than the accumulator");
    if (input.frac_bits > gate_out.frac_bits + tanh_out.frac_bits)
        throw ConfigError("format: hidden state finer than o*tanh(c)");
}

FormatSet FormatSet::with_state_frac(int frac_bits) {
    const QFormat f{frac_bits};
    FormatSet s;
    s.weight = s.bias = s.peephole = s.input = s.cell = s.gate_pre = f;
    return s;
}

std::size_t NetworkSpec::output_width() const {
    if (n_out) return *n_out;
    return layers.empty() ? 0 : layers.back().n_hidden;
}

void NetworkSpec::validate() const {
    if (layers.empty()) throw ConfigError("network: no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& s = layers[l];
        if (s.n_in == 0 || s.n_hidden == 0)
            throw ConfigError("network: layer " + std::to_string(l) + " has a zero dimension");
        if (l > 0 && s.n_in != layers[l - 1].n_hidden)
            throw ConfigError("network: layer " + std::to_string(l) + " N_I=" + std::to_string(s.n_in) +
                              " does not match previous N_H=" + std::to_string(layers[l - 1].n_hidden));
    }
    if (n_out && *n_out == 0) throw ConfigError("network: N_O must be positive");
    formats.validate();
}

NetworkSpec NetworkSpec::uniform(std::size_t layers, std::size_t n_hidden, std::size_t n_in,
                                 std::optional<std::size_t> n_out, bool peephole) {
    NetworkSpec s;
    for (std::size_t l = 0; l < layers; ++l) s.layers.push_back({l == 0 ? n_in : n_hidden, n_hidden, peephole});
    s.n_out = n_out;
    return s;
}

namespace {

std::string where(std::size_t layer, const char* name) { return "layer" + std::to_string(layer) + "." + name; }

void expect_shape(std::size_t r, std::size_t c, std::size_t er, std::size_t ec, const std::string& name) {
    if (r != er || c != ec)
        throw ConfigError(name + ": shape " + std::to_string(r) + "x" + std::to_string(c) + ", expected " +
                          std::to_string(er) + "x" + std::to_string(ec));
}

void expect_format(QFormat got, QFormat want, const std::string& name) {
    if (!(got == want)) throw ConfigError(name + ": format " + got.name() + ", expected " + want.name());
}

void check(const NetworkSpec&, const QMatrix& m, std::size_t r, std::size_t c, QFormat f,
           const std::string& name) {
    expect_shape(m.rows(), m.cols(), r, c, name);
    expect_format(m.format, f, name);
}
void check(const NetworkSpec&, const QVector& v, std::size_t n, QFormat f, const std::string& name) {
    expect_shape(v.size(), 1, n, 1, name);
    expect_format(v.format, f, name);
}
void check(const NetworkSpec&, const Matrix<double>& m, std::size_t r, std::size_t c, QFormat,
           const std::string& name) {
    expect_shape(m.rows(), m.cols(), r, c, name);
}
void check(const NetworkSpec&, const std::vector<double>& v, std::size_t n, QFormat, const std::string& name) {
    expect_shape(v.size(), 1, n, 1, name);
}

template <class Params>
void check_all(const NetworkSpec& spec, const Params& p) {
    spec.validate();
    const auto& f = spec.formats;
    if (p.layers.size() != spec.layers.size())
        throw ConfigError("params: " + std::to_string(p.layers.size()) + " layers, network declares " +
                          std::to_string(spec.layers.size()));
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const auto& s = spec.layers[l];
        const auto& lp = p.layers[l];
        for (Gate g : kGateOrder) {
            const int k = static_cast<int>(g);
            check(spec, lp.w_x[k], s.n_hidden, s.n_in, f.weight, where(l, "W_x") + to_string(g));
            check(spec, lp.w_h[k], s.n_hidden, s.n_hidden, f.weight, where(l, "W_h") + to_string(g));
            check(spec, lp.bias[k], s.n_hidden, f.bias, where(l, "b_") + to_string(g));
        }
        for (int k = 0; k < 3; ++k)
            check(spec, lp.w_c[k], s.n_hidden, f.peephole, where(l, "w_c") + "ifo"[k]);
    }
    if (spec.n_out.has_value() != p.fc.has_value())
        throw ConfigError(spec.n_out ? "params: FC layer declared but missing" : "params: unexpected FC layer");
    if (p.fc) {
        check(spec, p.fc->w_y, *spec.n_out, spec.layers.back().n_hidden, f.weight, "fc.W_y");
        check(spec, p.fc->b_y, *spec.n_out, f.bias, "fc.b_y");
    }
}

}  // namespace

void check_params(const NetworkSpec& spec, const QNetworkParams& params) { check_all(spec, params); }
void check_params(const NetworkSpec& spec, const FloatNetworkParams& params) { check_all(spec, params); }

bool is_vanilla(const QLayerParams& p) {
    return std::all_of(p.w_c.begin(), p.w_c.end(), [](const QVector& v) {
        return std::all_of(v.codes.begin(), v.codes.end(), [](std::int8_t c) { return c == 0; });
    });
}

}  // namespace lstmgrid
