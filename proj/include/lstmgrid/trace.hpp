#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "lstmgrid/link.hpp"

namespace lstmgrid {

enum class PhaseKind {
    param_load,
    state_load,
    feature_load,
    handoff,
    compute,
    reduce,
    activate,
    distribute,
    fc_compute,
    fc_reduce,
    write_back,
    state_store,
};
const char* to_string(PhaseKind k);

struct LinkActivity {
    std::string net;
    LinkKind kind = LinkKind::param;
    LinkCounters counters;
};

struct PhaseRecord {
    PhaseKind kind = PhaseKind::compute;
    std::size_t step = 0;
    std::size_t layer = 0;
    int gate = -1;  // 0..3 in compute/reduce phases
    int hop = -1;   // reduction hop or distribution slot
    bool configuration = false;  // one-time parameter load, outside any step
    std::uint64_t start = 0;
    std::uint64_t end = 0;
    std::vector<DieId> dies;    // dies of the layer that own this phase
    std::vector<DieId> active;  // subset doing work; the rest stall
    std::vector<LinkActivity> links;

    std::uint64_t cycles() const { return end - start; }
};

struct StepWindow {
    std::size_t step = 0;
    std::uint64_t start = 0;
    std::uint64_t end = 0;
};

struct DieCycles {
    std::uint64_t active = 0;
    std::uint64_t stall = 0;
};

struct PhaseTrace {
    std::vector<DieId> all_dies;
    std::vector<PhaseRecord> phases;
    std::vector<StepWindow> steps;
    std::uint64_t config_cycles = 0;  // parameter load before the first step
    bool toggles_measured = true;     // false for data-free traces

    bool empty() const { return phases.empty(); }
    /// Cycles covered by inference steps.
    std::uint64_t inference_cycles() const;
    /// Active and stall cycles of every die over the inference steps. A die
    /// outside any phase (another layer's turn) counts as stalled.
    std::map<DieId, DieCycles> die_cycles(bool include_configuration = false) const;
    LinkCounters link_totals(bool include_configuration = false) const;

    void append(const PhaseTrace& other);
    void write_text(std::ostream& os) const;
    /// cycle,die,phase,link,bits,toggles rows.
    void write_csv(std::ostream& os) const;
};

}  // namespace lstmgrid
