#include "lstmgrid/container.hpp"

#include <bit>
#include <fstream>
#include <map>

#include "json.hpp"
#include "lstmgrid/lstm_ref.hpp"

namespace lstmgrid {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

std::size_t TensorEntry::count() const {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

namespace {

constexpr int kSchemaVersion = 1;

fs::path blob_path(const fs::path& manifest) {
    fs::path p = manifest;
    p.replace_extension(".bin");
    return p;
}

ordered_json formats_json(const FormatSet& f) {
    return {{"weight", f.weight.name()},     {"bias", f.bias.name()},         {"peephole", f.peephole.name()},
            {"input", f.input.name()},       {"cell", f.cell.name()},         {"gate_pre", f.gate_pre.name()},
            {"gate_out", f.gate_out.name()}, {"tanh_out", f.tanh_out.name()}};
}

FormatSet formats_from(const ordered_json& j) {
    FormatSet f;
    const std::map<std::string, QFormat*> roles = {
        {"weight", &f.weight}, {"bias", &f.bias},         {"peephole", &f.peephole}, {"input", &f.input},
        {"cell", &f.cell},     {"gate_pre", &f.gate_pre}, {"gate_out", &f.gate_out}, {"tanh_out", &f.tanh_out}};
    for (const auto& [key, value] : j.items()) {
        const auto it = roles.find(key);
        if (it == roles.end()) throw ConfigError("manifest: unknown format role '" + key + "'");
        *it->second = parse_qformat(value.get<std::string>());
    }
    return f;
}

ordered_json spec_json(const NetworkSpec& spec) {
    ordered_json layers = ordered_json::array();
    for (const auto& l : spec.layers)
        layers.push_back({{"n_in", l.n_in}, {"n_hidden", l.n_hidden}, {"peephole", l.peephole}});
    ordered_json j{{"layers", layers}};
    j["n_out"] = spec.n_out ? ordered_json(*spec.n_out) : ordered_json(nullptr);
    j["formats"] = formats_json(spec.formats);
    return j;
}

NetworkSpec spec_from(const ordered_json& j) {
    NetworkSpec spec;
    for (const auto& l : j.at("layers"))
        spec.layers.push_back({l.at("n_in").get<std::size_t>(), l.at("n_hidden").get<std::size_t>(),
                               l.value("peephole", true)});
    if (j.contains("n_out") && !j.at("n_out").is_null()) spec.n_out = j.at("n_out").get<std::size_t>();
    if (j.contains("formats")) spec.formats = formats_from(j.at("formats"));
    spec.validate();
    return spec;
}

ordered_json entry_json(const TensorEntry& e) {
    return {{"name", e.name},     {"shape", e.shape},           {"role", e.role},
            {"dtype", e.dtype},   {"format", e.format.name()}, {"offset", e.offset}};
}

TensorEntry entry_from(const ordered_json& j) {
    TensorEntry e;
    e.name = j.at("name").get<std::string>();
    e.shape = j.at("shape").get<std::vector<std::size_t>>();
    e.role = j.at("role").get<std::string>();
    e.format = parse_qformat(j.at("format").get<std::string>());
    e.dtype = j.value("dtype", std::string("int8"));
    e.offset = j.at("offset").get<std::size_t>();
    if (e.dtype != "int8" && e.dtype != "float32")
        throw ConfigError("manifest: tensor " + e.name + " has unsupported dtype '" + e.dtype + "'");
    return e;
}

class BlobWriter {
public:
    void add(const std::string& name, std::vector<std::size_t> shape, const std::string& role, QFormat f,
             const std::vector<std::int8_t>& codes) {
        entries_.push_back({name, std::move(shape), role, f, "int8", bytes_.size()});
        bytes_.insert(bytes_.end(), codes.begin(), codes.end());
    }
    void write(const fs::path& manifest, ordered_json head) const {
        const fs::path blob = blob_path(manifest);
        ordered_json tensors = ordered_json::array();
        for (const auto& e : entries_) tensors.push_back(entry_json(e));
        head["blob"] = blob.filename().string();
        head["tensors"] = tensors;
        std::ofstream m(manifest);
        if (!m) throw ConfigError("cannot write " + manifest.string());
        m << head.dump(2) << '\n';
        std::ofstream b(blob, std::ios::binary);
        if (!b) throw ConfigError("cannot write " + blob.string());
        b.write(reinterpret_cast<const char*>(bytes_.data()), static_cast<std::streamsize>(bytes_.size()));
    }

private:
    std::vector<TensorEntry> entries_;
    std::vector<std::int8_t> bytes_;
};

struct Loaded {
    ordered_json manifest;
    std::map<std::string, TensorEntry> entries;
    std::vector<unsigned char> blob;

    const TensorEntry& entry(const std::string& name) const {
        const auto it = entries.find(name);
        if (it == entries.end()) throw ConfigError("manifest: missing tensor " + name);
        return it->second;
    }

    std::vector<std::int8_t> codes(const TensorEntry& e) const {
        return {blob.begin() + static_cast<std::ptrdiff_t>(e.offset),
                blob.begin() + static_cast<std::ptrdiff_t>(e.offset + e.count())};
    }
    std::vector<double> floats(const TensorEntry& e) const {
        std::vector<double> v(e.count());
        for (std::size_t k = 0; k < v.size(); ++k) {
            std::uint32_t bits = 0;
            for (int b = 0; b < 4; ++b) bits |= std::uint32_t{blob[e.offset + 4 * k + b]} << (8 * b);
            v[k] = std::bit_cast<float>(bits);
        }
        return v;
    }
};

Loaded load(const fs::path& manifest) {
    Loaded l;
    std::ifstream m(manifest);
    if (!m) throw ConfigError("cannot open " + manifest.string());
    try {
        l.manifest = ordered_json::parse(m);
        if (l.manifest.at("schema_version").get<int>() != kSchemaVersion)
            throw ConfigError(manifest.string() + ": unsupported schema_version");
        const fs::path blob = manifest.parent_path() / l.manifest.at("blob").get<std::string>();
        std::ifstream b(blob, std::ios::binary);
        if (!b) throw ConfigError("cannot open " + blob.string());
        l.blob.assign(std::istreambuf_iterator<char>(b), {});
        for (const auto& t : l.manifest.at("tensors")) {
            TensorEntry e = entry_from(t);
            if (e.offset + e.bytes() > l.blob.size())
                throw ConfigError("manifest: tensor " + e.name + " runs past the end of " + blob.string());
            l.entries.emplace(e.name, e);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(manifest.string() + ": " + e.what());
    }
    return l;
}

void check_shape(const TensorEntry& e, std::vector<std::size_t> want) {
    if (e.shape != want) throw ConfigError("manifest: tensor " + e.name + " has the wrong shape");
}

QMatrix matrix_from(const Loaded& l, const std::string& name, std::size_t rows, std::size_t cols, QFormat f,
                    bool symmetric) {
    const TensorEntry& e = l.entry(name);
    check_shape(e, {rows, cols});
    if (e.dtype == "float32") {
        Matrix<double> m(rows, cols);
        m.data() = l.floats(e);
        return symmetric ? quantize_symmetric(m, f) : quantize_matrix(m, f);
    }
    if (!(e.format == f))
        throw ConfigError("manifest: tensor " + name + " is " + e.format.name() + ", network expects " + f.name());
    QMatrix q(f, rows, cols);
    q.codes.data() = l.codes(e);
    return q;
}

QVector vector_from(const Loaded& l, const std::string& name, std::size_t n, QFormat f, bool symmetric) {
    const TensorEntry& e = l.entry(name);
    check_shape(e, {n});
    if (e.dtype == "float32") {
        const auto v = l.floats(e);
        return symmetric ? quantize_symmetric(v, f) : quantize_vector(v, f);
    }
    if (!(e.format == f))
        throw ConfigError("manifest: tensor " + name + " is " + e.format.name() + ", network expects " + f.name());
    return QVector(f, l.codes(e));
}

std::string layer_name(std::size_t l, const std::string& what) { return "layer" + std::to_string(l) + "." + what; }

}  // namespace

void write_params(const fs::path& manifest, const NetworkSpec& spec, const QNetworkParams& params) {
    check_params(spec, params);
    const auto& f = spec.formats;
    BlobWriter w;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const auto& s = spec.layers[l];
        const auto& p = params.layers[l];
        for (Gate g : kGateOrder) {
            const int k = static_cast<int>(g);
            const std::string gn = to_string(g);
            w.add(layer_name(l, "W_x" + gn), {s.n_hidden, s.n_in}, "weight", f.weight, p.w_x[k].codes.data());
            w.add(layer_name(l, "W_h" + gn), {s.n_hidden, s.n_hidden}, "weight", f.weight, p.w_h[k].codes.data());
            w.add(layer_name(l, "b_" + gn), {s.n_hidden}, "bias", f.bias, p.bias[k].codes);
        }
        for (int k = 0; k < 3; ++k)
            w.add(layer_name(l, std::string("w_c") + "ifo"[k]), {s.n_hidden}, "peephole", f.peephole, p.w_c[k].codes);
    }
    if (params.fc) {
        w.add("fc.W_y", {*spec.n_out, spec.layers.back().n_hidden}, "weight", f.weight, params.fc->w_y.codes.data());
        w.add("fc.b_y", {*spec.n_out}, "bias", f.bias, params.fc->b_y.codes);
    }
    w.write(manifest, {{"schema_version", kSchemaVersion}, {"kind", "parameters"}, {"network", spec_json(spec)}});
}

ParamContainer read_params(const fs::path& manifest) {
    const Loaded l = load(manifest);
    ParamContainer c;
    try {
        c.spec = spec_from(l.manifest.at("network"));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(manifest.string() + ": network: " + e.what());
    }
    const auto& f = c.spec.formats;
    for (std::size_t li = 0; li < c.spec.layers.size(); ++li) {
        const auto& s = c.spec.layers[li];
        QLayerParams p;
        for (Gate g : kGateOrder) {
            const int k = static_cast<int>(g);
            const std::string gn = to_string(g);
            p.w_x[k] = matrix_from(l, layer_name(li, "W_x" + gn), s.n_hidden, s.n_in, f.weight, true);
            p.w_h[k] = matrix_from(l, layer_name(li, "W_h" + gn), s.n_hidden, s.n_hidden, f.weight, true);
            p.bias[k] = vector_from(l, layer_name(li, "b_" + gn), s.n_hidden, f.bias, false);
        }
        for (int k = 0; k < 3; ++k) {
            const std::string name = layer_name(li, std::string("w_c") + "ifo"[k]);
            // A vanilla layer may leave its peephole vectors out.
            p.w_c[k] = l.entries.count(name) || s.peephole ? vector_from(l, name, s.n_hidden, f.peephole, true)
                                                           : QVector(f.peephole, s.n_hidden);
        }
        c.params.layers.push_back(std::move(p));
    }
    if (c.spec.n_out) {
        QFcParams fc;
        fc.w_y = matrix_from(l, "fc.W_y", *c.spec.n_out, c.spec.layers.back().n_hidden, f.weight, true);
        fc.b_y = vector_from(l, "fc.b_y", *c.spec.n_out, f.bias, false);
        c.params.fc = std::move(fc);
    }
    check_params(c.spec, c.params);
    return c;
}

void write_features(const fs::path& manifest, const QMatrix& features) {
    BlobWriter w;
    w.add("features", {features.rows(), features.cols()}, "features", features.format, features.codes.data());
    w.write(manifest, {{"schema_version", kSchemaVersion}, {"kind", "features"}});
}

QMatrix read_features(const fs::path& manifest, QFormat input) {
    const Loaded l = load(manifest);
    const TensorEntry& e = l.entry("features");
    if (e.role != "features") throw ConfigError("manifest: tensor features must have role \"features\"");
    if (e.shape.size() != 2) throw ConfigError("manifest: features must be a T x N_I matrix");
    return matrix_from(l, "features", e.shape[0], e.shape[1], input, false);
}

}  // namespace lstmgrid
