#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lstmgrid/network.hpp"

namespace lstmgrid {

/// Manifest (JSON) plus a flat little-endian blob. Tensors are int8 codes,
/// or float32 values that are quantized on import.
struct TensorEntry {
    std::string name;  // "layer0.W_xi", "fc.b_y", "features"
    std::vector<std::size_t> shape;
    std::string role;  // weight, bias, peephole, features
    QFormat format{};
    std::string dtype;  // int8 | float32
    std::size_t offset = 0;

    std::size_t count() const;
    std::size_t bytes() const { return count() * (dtype == "float32" ? 4 : 1); }
};

struct ParamContainer {
    NetworkSpec spec;
    QNetworkParams params;
};

/// Writes `manifest` and a sibling blob named after it with ".bin".
void write_params(const std::filesystem::path& manifest, const NetworkSpec& spec, const QNetworkParams& params);
ParamContainer read_params(const std::filesystem::path& manifest);

void write_features(const std::filesystem::path& manifest, const QMatrix& features);
/// T x N_I codes; float32 features are quantized to `input`.
QMatrix read_features(const std::filesystem::path& manifest, QFormat input);

}  // namespace lstmgrid
