#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "lstmgrid/link.hpp"
#include "lstmgrid/lstm_ref.hpp"
#include "lstmgrid/mapper.hpp"
#include "lstmgrid/trace.hpp"

namespace lstmgrid {

/// Cycle constants the structural model cannot derive.
struct TimingConstants {
    std::uint64_t c_hop = 4;     // per reduction hop, before the first beat is accepted
    std::uint64_t c_fixed = 61;  // master activation and element-wise update per step
};

struct SimOptions {
    TimingConstants timing{};
    /// Shorten the hidden-input loop to the tile size instead of running
    /// the die's full unit count.
    bool truncate_h_loop = false;
    /// Output layer and write-back of the last layer.
    bool write_back = true;
    std::optional<Fault> fault;
    std::uint64_t deadlock_cycles = 4096;
};

/// Cycles of one compute phase on a die: x-loop over the x tile, h-loop
/// over the hidden tile or the full unit count.
std::uint64_t compute_cycles(const LayerPlan& lp, const TileSpec& tile, bool truncate_h_loop);

/// Cycles by which a stacked layer's window starts before the previous
/// layer's window ends.
std::uint64_t stacked_overlap(const LayerPlan& prev, const LayerPlan& next);

struct Die;

class SystolicSim {
public:
    explicit SystolicSim(GridPlan plan, SimOptions options = {});
    ~SystolicSim();
    SystolicSim(SystolicSim&&) noexcept;
    SystolicSim& operator=(SystolicSim&&) noexcept;

    const GridPlan& plan() const { return plan_; }
    const SimOptions& options() const { return options_; }

    /// Streams every die's tile over the parameter links. Reload plans keep
    /// the full set at the controller and stream a layer per pass.
    void load_parameters(const QNetworkParams& params);

    /// One inference step from the current on-die state. Returns y when the
    /// network has an output layer and write-back is enabled, else h of the
    /// last layer.
    QVector step(const QVector& x);

    /// Zero initial state, then one step per row.
    QMatrix run_sequence(const QMatrix& features);

    void reset_state();
    const PhaseTrace& trace() const { return trace_; }
    void clear_trace();
    const std::vector<Net>& nets() const { return nets_; }
    const Net& net(const std::string& name) const;

private:
    struct Transfer;
    Die& die(const DieId& id);
    std::size_t net_id(const std::string& name) const;
    std::size_t param_net(const DieId& id) const;
    std::uint64_t run_transfers(std::vector<Transfer>& transfers);
    std::vector<LinkCounters> snapshot() const;
    void record(PhaseKind kind, std::size_t layer, int gate, int hop, std::uint64_t start, std::uint64_t cycles,
                std::vector<DieId> active, const std::vector<Transfer>& transfers,
                const std::vector<LinkCounters>& before);
    void transfer_phase(PhaseKind kind, std::size_t layer, int gate, int hop, std::vector<Transfer>& transfers,
                        std::vector<DieId> active, std::uint64_t& now);

    void install_layer(std::size_t layer, std::uint64_t& now);
    void load_features(std::size_t layer, const QVector& x, std::uint64_t& now);
    void handoff(std::size_t from, std::uint64_t& now);
    void load_state(std::size_t layer, std::uint64_t& now);
    void compute_layer(std::size_t layer, std::uint64_t& now);
    void distribute(std::size_t layer, std::uint64_t& now);
    QVector output_layer(std::uint64_t& now);
    QState write_back(std::size_t layer, PhaseKind kind, bool with_cell, std::uint64_t& now);
    QVector read_hidden(std::size_t layer);

    GridPlan plan_;
    SimOptions options_;
    LutSet luts_;
    std::map<DieId, std::unique_ptr<Die>> dies_;
    std::vector<Net> nets_;
    std::map<std::string, std::size_t> net_index_;
    std::optional<QNetworkParams> host_params_;
    std::vector<QState> host_state_;      // reload mode spill area
    std::vector<std::size_t> resident_;  // layer resident on each grid
    PhaseTrace trace_;
    std::uint64_t clock_ = 0;
    std::size_t step_index_ = 0;    // steps since reset_state
    std::size_t step_counter_ = 0;  // steps since construction
    bool loaded_ = false;
    bool in_config_ = false;
};

/// Stacked or reload execution depending on the plan; reload plans only.
QMatrix run_reload(SystolicSim& sim, const QNetworkParams& params, const QMatrix& features);

}  // namespace lstmgrid
