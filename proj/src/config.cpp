#include "lstmgrid/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace lstmgrid {

const char* to_string(GridMode m) {
    switch (m) {
        case GridMode::stacked:
            return "stacked";
        case GridMode::reload:
            return "reload";
        case GridMode::chip_select:
            return "chip-select";
    }
    return "?";
}

PlanOptions RunConfig::plan_options() const {
    PlanOptions o;
    o.reload = mode == GridMode::reload;
    o.chip_select = mode == GridMode::chip_select;
    return o;
}

namespace {

void allow(const YAML::Node& node, const std::string& where, std::set<std::string> keys) {
    if (!node.IsMap()) throw ConfigError("config: " + where + " must be a mapping");
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!keys.count(key)) throw ConfigError("config: unknown key '" + key + "' in " + where);
    }
}

template <class T>
void read(const YAML::Node& node, const char* key, T& out) {
    if (node[key]) out = node[key].as<T>();
}

FormatSet read_formats(const YAML::Node& n, FormatSet f) {
    allow(n, "network.formats", {"weight", "bias", "peephole", "input", "cell", "gate_pre", "gate_out", "tanh_out"});
    const std::pair<const char*, QFormat*> roles[] = {
        {"weight", &f.weight}, {"bias", &f.bias},         {"peephole", &f.peephole}, {"input", &f.input},
        {"cell", &f.cell},     {"gate_pre", &f.gate_pre}, {"gate_out", &f.gate_out}, {"tanh_out", &f.tanh_out}};
    for (const auto& [key, fmt] : roles)
        if (n[key]) *fmt = parse_qformat(n[key].as<std::string>());
    return f;
}

NetworkSpec read_network(const YAML::Node& n) {
    allow(n, "network", {"layers", "n_in", "n_hidden", "n_out", "peephole", "state_frac_bits", "formats"});
    NetworkSpec spec;
    bool peephole = true;
    read(n, "peephole", peephole);
    if (n["layers"] && n["layers"].IsSequence()) {
        for (const auto& l : n["layers"]) {
            allow(l, "network.layers[]", {"n_in", "n_hidden", "peephole"});
            LayerShape s{0, 0, peephole};
            read(l, "n_in", s.n_in);
            read(l, "n_hidden", s.n_hidden);
            read(l, "peephole", s.peephole);
            spec.layers.push_back(s);
        }
    } else {
        std::size_t layers = 1, n_hidden = 0;
        read(n, "layers", layers);
        read(n, "n_hidden", n_hidden);
        std::size_t n_in = n_hidden;
        read(n, "n_in", n_in);
        spec = NetworkSpec::uniform(layers, n_hidden, n_in, std::nullopt, peephole);
    }
    if (n["n_out"] && !n["n_out"].IsNull()) spec.n_out = n["n_out"].as<std::size_t>();
    if (n["state_frac_bits"]) spec.formats = FormatSet::with_state_frac(n["state_frac_bits"].as<int>());
    if (n["formats"]) spec.formats = read_formats(n["formats"], spec.formats);
    spec.validate();
    return spec;
}

GridMode parse_mode(const std::string& s) {
    if (s == "stacked") return GridMode::stacked;
    if (s == "reload") return GridMode::reload;
    if (s == "chip-select" || s == "chip_select") return GridMode::chip_select;
    throw ConfigError("config: grid.mode must be stacked, reload or chip-select, got '" + s + "'");
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    RunConfig c;
    try {
        const YAML::Node root = YAML::Load(text);
        if (!root || root.IsNull()) throw ConfigError("config: empty document");
        allow(root, "the document",
              {"schema_version", "network", "params", "features", "steps", "seed", "random_codes", "grid",
               "operating_point", "energy", "timing", "write_back", "fault"});
        if (!root["schema_version"] || root["schema_version"].as<int>() != 1)
            throw ConfigError("config: schema_version 1 required");
        if (root["network"]) c.network = read_network(root["network"]);
        if (root["params"]) c.params = base_dir / root["params"].as<std::string>();
        if (root["features"]) c.features = base_dir / root["features"].as<std::string>();
        read(root, "steps", c.steps);
        read(root, "seed", c.seed);
        if (const auto r = root["random_codes"]) {
            allow(r, "random_codes", {"weight", "bias", "input"});
            read(r, "weight", c.random_codes.weight);
            read(r, "bias", c.random_codes.bias);
            read(r, "input", c.random_codes.input);
        }
        if (const auto g = root["grid"]) {
            allow(g, "grid", {"mode", "nh_capacity", "sram_bytes", "time_multiplexed"});
            if (g["mode"]) c.mode = parse_mode(g["mode"].as<std::string>());
            read(g, "nh_capacity", c.tile.nh_capacity);
            read(g, "sram_bytes", c.tile.sram_bytes);
            read(g, "time_multiplexed", c.time_multiplexed);
        }
        if (const auto o = root["operating_point"]) {
            allow(o, "operating_point", {"frequency_mhz", "v_core", "v_pad"});
            if (o["frequency_mhz"]) c.op.frequency = o["frequency_mhz"].as<double>() * 1e6;
            read(o, "v_core", c.op.v_core);
            read(o, "v_pad", c.op.v_pad);
        }
        if (const auto e = root["energy"]) {
            allow(e, "energy", {"e_drive_pj", "e_receive_pj", "p_core_active_mw", "stall_fraction", "p_io_idle_mw",
                                "alpha_toggle", "measured_toggles"});
            if (e["e_drive_pj"]) c.energy.e_drive = e["e_drive_pj"].as<double>() * 1e-12;
            if (e["e_receive_pj"]) c.energy.e_receive = e["e_receive_pj"].as<double>() * 1e-12;
            if (e["p_core_active_mw"]) c.energy.p_core_active_per_die = e["p_core_active_mw"].as<double>() * 1e-3;
            if (e["p_io_idle_mw"]) c.energy.p_io_idle_per_die = e["p_io_idle_mw"].as<double>() * 1e-3;
            read(e, "stall_fraction", c.energy.stall_fraction);
            read(e, "alpha_toggle", c.energy.alpha_toggle);
            read(e, "measured_toggles", c.energy.measured_toggles);
        }
        if (const auto t = root["timing"]) {
            allow(t, "timing", {"c_hop", "c_fixed", "truncate_h_loop"});
            read(t, "c_hop", c.sim.timing.c_hop);
            read(t, "c_fixed", c.sim.timing.c_fixed);
            read(t, "truncate_h_loop", c.sim.truncate_h_loop);
        }
        read(root, "write_back", c.sim.write_back);
        if (root["fault"]) c.sim.fault = parse_fault(root["fault"].as<std::string>());
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.tile.validate();
    c.op.validate();
    c.energy.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

}  // namespace lstmgrid
