#include "lstmgrid/mapper.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"

namespace lstmgrid {

void TileSpec::validate() const {
    if (nh_capacity == 0) throw ConfigError("tile: nh_capacity must be positive");
    if (sram_bytes == 0 || sram_banks == 0) throw ConfigError("tile: SRAM size and bank count must be positive");
    if (link_data_bits <= 0 || word_bits <= 0 || word_bits % link_data_bits != 0)
        throw ConfigError("tile: link width must divide the word width");
}

const char* to_string(DieRole r) { return r == DieRole::master ? "master" : "slave"; }

const char* to_string(LinkKind k) {
    switch (k) {
        case LinkKind::param:
            return "p";
        case LinkKind::reduction:
            return "r";
        case LinkKind::hidden:
            return "h";
        case LinkKind::output:
            return "out";
    }
    return "?";
}

std::string DieId::name() const {
    return "G" + std::to_string(grid) + "(" + std::to_string(row) + "," + std::to_string(col) + ")";
}

std::size_t memory_footprint(std::size_t n_in_tile, std::size_t n_hidden_tile, bool peephole,
                             std::optional<std::size_t> fc_outputs, bool fc_bias) {
    const std::size_t h = n_hidden_tile;
    if (h == 0) return 0;
    std::size_t bytes = 4 * h * (n_in_tile + h) + (peephole ? 3 * h : 0) + 4 * h;
    if (fc_outputs) bytes += *fc_outputs * h + (fc_bias ? *fc_outputs : 0);
    return bytes;
}

namespace {

IndexRange tile_range(std::size_t k, std::size_t tile, std::size_t total) {
    return {std::min(k * tile, total), std::min((k + 1) * tile, total)};
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

}  // namespace

const DiePlacement& GridPlan::die(std::size_t layer, std::size_t row, std::size_t col) const {
    for (const auto& d : dies)
        if (d.layer == layer && d.die.row == row && d.die.col == col) return d;
    throw ConfigError("plan: no die at layer " + std::to_string(layer) + " (" + std::to_string(row) + "," +
                      std::to_string(col) + ")");
}

std::vector<const DiePlacement*> GridPlan::layer_dies(std::size_t layer) const {
    std::vector<const DiePlacement*> out;
    for (const auto& d : dies)
        if (d.layer == layer) out.push_back(&d);
    return out;
}

AccumulationPlan GridPlan::accumulation() const {
    AccumulationPlan a;
    for (const auto& l : layers) a.layers.push_back(l.split());
    if (!layers.empty()) a.fc = TileSplit{layers.back().n, 0, layers.back().h_tile};
    return a;
}

GridPlan plan_grid(const NetworkSpec& spec, const TileSpec& tile, const PlanOptions& options) {
    spec.validate();
    tile.validate();
    GridPlan plan;
    plan.spec = spec;
    plan.tile = tile;
    plan.options = options;

    const std::size_t last = spec.layers.size() - 1;
    std::size_t n_max = 0;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const auto& s = spec.layers[l];
        LayerPlan lp;
        lp.layer = l;
        lp.grid = options.reload ? 0 : l;
        lp.n = ceil_div(s.n_hidden, tile.nh_capacity);
        lp.n_in = s.n_in;
        lp.n_hidden = s.n_hidden;
        lp.x_tile = ceil_div(s.n_in, lp.n);
        lp.h_tile = ceil_div(s.n_hidden, lp.n);
        lp.peephole = s.peephole;
        lp.x_padding = lp.x_tile * lp.n - s.n_in;
        lp.h_padding = lp.h_tile * lp.n - s.n_hidden;
        n_max = std::max(n_max, lp.n);
        plan.layers.push_back(lp);
    }
    if (spec.n_out && *spec.n_out > tile.nh_capacity)
        throw ConstraintError("FC layer: N_O=" + std::to_string(*spec.n_out) + " exceeds the " +
                              std::to_string(tile.nh_capacity) + " units of a master die");

    for (const auto& lp : plan.layers) {
        const bool fc_layer = lp.layer == last && spec.n_out.has_value();
        for (std::size_t i = 0; i < lp.n; ++i)
            for (std::size_t j = 0; j < lp.n; ++j) {
                DiePlacement d;
                d.layer = lp.layer;
                d.die = {lp.grid, i, j};
                d.role = j + 1 == lp.n ? DieRole::master : DieRole::slave;
                d.rows = tile_range(i, lp.h_tile, lp.n_hidden);
                d.x_cols = tile_range(j, lp.x_tile, lp.n_in);
                d.h_cols = tile_range(j, lp.h_tile, lp.n_hidden);
                d.holds_fc = fc_layer && d.role == DieRole::master;
                d.holds_fc_bias = d.holds_fc && i == 0;
                const bool m = d.role == DieRole::master;
                d.footprint_bytes = 4 * lp.h_tile * (lp.x_tile + lp.h_tile);
                d.param_bytes = 4 * d.rows.size() * (d.x_cols.size() + d.h_cols.size());
                if (m) {
                    d.footprint_bytes = memory_footprint(lp.x_tile, lp.h_tile, lp.peephole,
                                                         d.holds_fc ? spec.n_out : std::nullopt, d.holds_fc_bias);
                    d.param_bytes += (lp.peephole ? 3 : 0) * d.rows.size() + 4 * d.rows.size();
                    if (d.holds_fc) {
                        // W_y columns of this master's hidden rows.
                        d.param_bytes += *spec.n_out * d.rows.size() + (d.holds_fc_bias ? *spec.n_out : 0);
                    }
                }
                if (d.footprint_bytes > tile.sram_bytes)
                    throw ConstraintError("die " + d.die.name() + " (layer " + std::to_string(lp.layer) +
                                          "): parameter footprint " + std::to_string(d.footprint_bytes) +
                                          " bytes exceeds SRAM capacity " + std::to_string(tile.sram_bytes) +
                                          " bytes");
                plan.dies.push_back(d);
            }
    }

    plan.total_dies = 0;
    if (options.reload) {
        plan.total_dies = n_max * n_max;
    } else {
        for (const auto& lp : plan.layers) plan.total_dies += lp.n * lp.n;
    }

    const Endpoint host = Endpoint::external();
    for (const auto& lp : plan.layers) {
        const std::size_t n = lp.n;
        const auto at = [&](std::size_t i, std::size_t j) { return Endpoint{false, {lp.grid, i, j}}; };
        if (options.chip_select) {
            Link p{lp.layer, LinkKind::param, host, {}};
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) p.sinks.push_back(at(i, j));
            plan.links.push_back(p);
        } else {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) plan.links.push_back({lp.layer, LinkKind::param, host, {at(i, j)}});
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j + 1 < n; ++j)
                plan.links.push_back({lp.layer, LinkKind::reduction, at(i, j), {at(i, j + 1)}});
        if (n >= 2) {
            Link a{lp.layer, LinkKind::hidden, at(n - 1, n - 1), {}};
            for (std::size_t i = 0; i + 1 < n; ++i) a.sinks.push_back(at(i, n - 1));
            plan.links.push_back(a);
            for (std::size_t j = 0; j + 1 < n; ++j) {
                Link b{lp.layer, LinkKind::hidden, at(j, n - 1), {}};
                for (std::size_t i = 0; i < n; ++i) b.sinks.push_back(at(i, j));
                plan.links.push_back(b);
            }
        }
        const bool fc_layer = lp.layer == last && spec.n_out.has_value();
        if (fc_layer)
            for (std::size_t i = 1; i < n; ++i)
                plan.links.push_back({lp.layer, LinkKind::output, at(i, n - 1), {at(0, n - 1)}});
        if (fc_layer) {
            plan.links.push_back({lp.layer, LinkKind::output, at(0, n - 1), {host}});
        } else if (options.reload || lp.layer == last) {
            for (std::size_t i = 0; i < n; ++i) plan.links.push_back({lp.layer, LinkKind::output, at(i, n - 1), {host}});
        } else {
            // Stacked hand-off: masters feed the x tiles of the next grid.
            const auto& next = plan.layers[lp.layer + 1];
            for (std::size_t i = 0; i < n; ++i) {
                const IndexRange rows = tile_range(i, lp.h_tile, lp.n_hidden);
                Link o{lp.layer, LinkKind::output, at(i, n - 1), {}};
                for (std::size_t r = 0; r < next.n; ++r)
                    for (std::size_t c = 0; c < next.n; ++c) {
                        const IndexRange x = tile_range(c, next.x_tile, next.n_in);
                        if (x.begin < rows.end && rows.begin < x.end)
                            o.sinks.push_back(Endpoint{false, {next.grid, r, c}});
                    }
                plan.links.push_back(o);
            }
        }
    }
    return plan;
}

PinBudget pin_budget(const GridPlan& plan, bool time_multiplexed) {
    PinBudget b;
    const std::size_t n_first = plan.layers.empty() ? 1 : plan.layers.front().n;
    const std::size_t n_last = plan.layers.empty() ? 1 : plan.layers.back().n;
    b.n_inp_layer = plan.options.n_inp_layer ? plan.options.n_inp_layer : n_first;
    b.n_out_layer = plan.options.n_out_layer ? plan.options.n_out_layer : n_last;
    b.total_min = static_cast<std::size_t>(b.pins_clk_rst + b.pins_config) +
                  static_cast<std::size_t>(b.pins_per_stream) * (b.n_inp_layer + b.n_out_layer);
    b.total_time_multiplexed = static_cast<std::size_t>(b.pins_clk_rst + b.pins_config + 2 * b.pins_per_stream);
    if (time_multiplexed) b.n_inp_layer = b.n_out_layer = 1;
    return b;
}

std::vector<ReloadPass> reload_schedule(const GridPlan& plan, bool first_step) {
    std::vector<ReloadPass> passes;
    const bool single = plan.layers.size() == 1;
    for (const auto& lp : plan.layers) {
        ReloadPass p;
        p.layer = lp.layer;
        for (const DiePlacement* d : plan.layer_dies(lp.layer)) {
            if (!single || first_step) p.param_bytes += d->param_bytes;
            p.feature_bytes += d->x_cols.size();
            if (!single && (lp.layer > 0 || !first_step)) {
                p.state_in_bytes += d->h_cols.size();
                if (d->role == DieRole::master) p.state_in_bytes += d->rows.size();
            }
            if (!single && d->role == DieRole::master) p.state_out_bytes += 2 * d->rows.size();
        }
        passes.push_back(p);
    }
    return passes;
}

std::vector<ReloadPass> reload_schedule(const NetworkSpec& spec, const TileSpec& tile, bool first_step) {
    return reload_schedule(plan_grid(spec, tile, {.reload = true}), first_step);
}

std::string plan_to_json(const GridPlan& plan) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["schema_version"] = 1;
    j["mode"] = plan.reload() ? "reload" : "stacked";
    j["chip_select"] = plan.options.chip_select;
    j["total_dies"] = plan.total_dies;
    j["tile"] = {{"nh_capacity", plan.tile.nh_capacity},
                 {"sram_bytes", plan.tile.sram_bytes},
                 {"sram_banks", plan.tile.sram_banks},
                 {"link_data_bits", plan.tile.link_data_bits},
                 {"word_bits", plan.tile.word_bits}};
    if (plan.spec.n_out) j["n_out"] = *plan.spec.n_out;
    for (const auto& lp : plan.layers)
        j["layers"].push_back({{"layer", lp.layer},
                               {"grid", lp.grid},
                               {"n", lp.n},
                               {"n_in", lp.n_in},
                               {"n_hidden", lp.n_hidden},
                               {"x_tile", lp.x_tile},
                               {"h_tile", lp.h_tile},
                               {"x_padding", lp.x_padding},
                               {"h_padding", lp.h_padding},
                               {"peephole", lp.peephole}});
    const auto range = [](const IndexRange& r) { return ordered_json::array({r.begin, r.end}); };
    for (const auto& d : plan.dies)
        j["dies"].push_back({{"layer", d.layer},
                             {"die", d.die.name()},
                             {"role", to_string(d.role)},
                             {"rows", range(d.rows)},
                             {"x_cols", range(d.x_cols)},
                             {"h_cols", range(d.h_cols)},
                             {"fc", d.holds_fc},
                             {"footprint_bytes", d.footprint_bytes},
                             {"param_bytes", d.param_bytes}});
    for (const auto& l : plan.links) {
        ordered_json sinks = ordered_json::array();
        for (const auto& s : l.sinks) sinks.push_back(s.name());
        j["links"].push_back({{"layer", l.layer}, {"kind", to_string(l.kind)}, {"source", l.source.name()}, {"sinks", sinks}});
    }
    const PinBudget pins = pin_budget(plan);
    j["pins"] = {{"n_inp_layer", pins.n_inp_layer},
                 {"n_inp_layer_all_dies", plan.layers.front().n * plan.layers.front().n},
                 {"n_out_layer", pins.n_out_layer},
                 {"total_min", pins.total_min},
                 {"total_time_multiplexed", pins.total_time_multiplexed}};
    if (plan.reload())
        for (const auto& p : reload_schedule(plan, false))
            j["reload_passes"].push_back({{"layer", p.layer},
                                          {"param_bytes", p.param_bytes},
                                          {"state_in_bytes", p.state_in_bytes},
                                          {"feature_bytes", p.feature_bytes},
                                          {"state_out_bytes", p.state_out_bytes}});
    return j.dump(2) + "\n";
}

std::string plan_summary(const GridPlan& plan) {
    std::ostringstream os;
    os << "mode: " << (plan.reload() ? "reload" : "stacked") << (plan.options.chip_select ? ", chip-select" : "")
       << "\n";
    for (const auto& lp : plan.layers) {
        std::size_t worst = 0;
        for (const DiePlacement* d : plan.layer_dies(lp.layer)) worst = std::max(worst, d->footprint_bytes);
        os << "layer " << lp.layer << ": N_I=" << lp.n_in << " N_H=" << lp.n_hidden << ", " << lp.n << "x" << lp.n << ", "
           << lp.n * lp.n << " dies, tiles " << lp.x_tile << "+" << lp.h_tile << ", max footprint " << worst << " / "
           << plan.tile.sram_bytes << " bytes";
        if (lp.x_padding || lp.h_padding) os << ", padding x=" << lp.x_padding << " h=" << lp.h_padding;
        os << "\n";
    }
    os << "total: " << plan.total_dies << " dies\n";
    return os.str();
}

}  // namespace lstmgrid
