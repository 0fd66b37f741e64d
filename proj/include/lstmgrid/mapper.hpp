#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lstmgrid/lstm_ref.hpp"
#include "lstmgrid/network.hpp"

namespace lstmgrid {

/// A plan that cannot be realized on the hardware (SRAM, unit count).
class ConstraintError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TileSpec {
    std::size_t nh_capacity = 96;
    std::size_t sram_bytes = 84 * 1024;
    std::size_t sram_banks = 12;
    int link_data_bits = 4;
    int word_bits = 8;

    int beats_per_word() const { return word_bits / link_data_bits; }
    void validate() const;
};

enum class DieRole { slave, master };
enum class LinkKind { param, reduction, hidden, output };
const char* to_string(DieRole r);
const char* to_string(LinkKind k);

struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive; clipped to the unpadded size

    std::size_t size() const { return end - begin; }
    bool contains(std::size_t k) const { return k >= begin && k < end; }
    friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// Physical die position. `grid` is the layer index for stacked plans and
/// 0 for reload plans.
struct DieId {
    std::size_t grid = 0;
    std::size_t row = 0;
    std::size_t col = 0;

    std::string name() const;
    friend bool operator==(const DieId&, const DieId&) = default;
    friend auto operator<=>(const DieId&, const DieId&) = default;
};

/// A link endpoint: a die, or the external controller when `host` is set.
struct Endpoint {
    bool host = false;
    DieId die{};

    static Endpoint external() { return {true, {}}; }
    std::string name() const { return host ? "host" : die.name(); }
    friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

struct DiePlacement {
    std::size_t layer = 0;
    DieId die;
    DieRole role = DieRole::slave;
    IndexRange rows;    // hidden units (rows of every W)
    IndexRange x_cols;  // columns of W_x*
    IndexRange h_cols;  // columns of W_h*
    bool holds_fc = false;
    bool holds_fc_bias = false;
    std::size_t footprint_bytes = 0;  // SRAM allocation at padded tile size
    std::size_t param_bytes = 0;      // parameters actually streamed in
};

struct Link {
    std::size_t layer = 0;
    LinkKind kind = LinkKind::param;
    Endpoint source;
    std::vector<Endpoint> sinks;
};

struct LayerPlan {
    std::size_t layer = 0;
    std::size_t grid = 0;
    std::size_t n = 1;
    std::size_t n_in = 0;
    std::size_t n_hidden = 0;
    std::size_t x_tile = 0;  // padded N_I / n
    std::size_t h_tile = 0;  // padded N_H / n
    bool peephole = true;
    std::size_t x_padding = 0;
    std::size_t h_padding = 0;

    TileSplit split() const { return {n, x_tile, h_tile}; }
};

/// External traffic of one reload pass, in bytes.
struct ReloadPass {
    std::size_t layer = 0;
    std::size_t param_bytes = 0;
    std::size_t state_in_bytes = 0;
    std::size_t feature_bytes = 0;
    std::size_t state_out_bytes = 0;
};

struct PinBudget {
    int pins_clk_rst = 2;
    int pins_config = 3;
    int pins_per_stream = 6;
    std::size_t n_inp_layer = 1;
    std::size_t n_out_layer = 1;
    std::size_t total_min = 17;
    std::size_t total_time_multiplexed = 17;
};

struct PlanOptions {
    bool reload = false;
    bool chip_select = false;
    /// Dies counted as input/output streams in the pin formula; 0 means n.
    std::size_t n_inp_layer = 0;
    std::size_t n_out_layer = 0;
};

struct GridPlan {
    NetworkSpec spec;
    TileSpec tile;
    PlanOptions options;
    std::vector<LayerPlan> layers;
    std::vector<DiePlacement> dies;
    std::vector<Link> links;
    std::size_t total_dies = 0;

    bool reload() const { return options.reload; }
    const DiePlacement& die(std::size_t layer, std::size_t row, std::size_t col) const;
    std::vector<const DiePlacement*> layer_dies(std::size_t layer) const;
    AccumulationPlan accumulation() const;
};

std::size_t memory_footprint(std::size_t n_in_tile, std::size_t n_hidden_tile, bool peephole,
                             std::optional<std::size_t> fc_outputs = std::nullopt, bool fc_bias = true);

GridPlan plan_grid(const NetworkSpec& spec, const TileSpec& tile = {}, const PlanOptions& options = {});
PinBudget pin_budget(const GridPlan& plan, bool time_multiplexed = false);

/// External traffic of one inference step in reload mode, one pass per
/// layer. A single-layer network keeps its parameters and state on the
/// grid, so only the first step loads parameters.
std::vector<ReloadPass> reload_schedule(const GridPlan& plan, bool first_step = false);
std::vector<ReloadPass> reload_schedule(const NetworkSpec& spec, const TileSpec& tile, bool first_step = false);

std::string plan_to_json(const GridPlan& plan);
std::string plan_summary(const GridPlan& plan);

}  // namespace lstmgrid
