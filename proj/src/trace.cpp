#include "lstmgrid/trace.hpp"

#include <algorithm>
#include <ostream>

namespace lstmgrid {

const char* to_string(PhaseKind k) {
    switch (k) {
        case PhaseKind::param_load:
            return "param_load";
        case PhaseKind::state_load:
            return "state_load";
        case PhaseKind::feature_load:
            return "feature_load";
        case PhaseKind::handoff:
            return "handoff";
        case PhaseKind::compute:
            return "compute";
        case PhaseKind::reduce:
            return "reduce";
        case PhaseKind::activate:
            return "activate";
        case PhaseKind::distribute:
            return "distribute";
        case PhaseKind::fc_compute:
            return "fc_compute";
        case PhaseKind::fc_reduce:
            return "fc_reduce";
        case PhaseKind::write_back:
            return "write_back";
        case PhaseKind::state_store:
            return "state_store";
    }
    return "?";
}

std::uint64_t PhaseTrace::inference_cycles() const {
    std::uint64_t t = 0;
    for (const auto& s : steps) t += s.end - s.start;
    return t;
}

std::map<DieId, DieCycles> PhaseTrace::die_cycles(bool include_configuration) const {
    std::map<DieId, DieCycles> out;
    for (const auto& d : all_dies) out[d] = {};
    const std::uint64_t total = inference_cycles() + (include_configuration ? config_cycles : 0);
    for (const auto& p : phases) {
        if (p.configuration && !include_configuration) continue;
        for (const auto& d : p.active) out[d].active += p.cycles();
    }
    for (auto& [die, c] : out) c.stall = total - c.active;
    return out;
}

LinkCounters PhaseTrace::link_totals(bool include_configuration) const {
    LinkCounters total;
    for (const auto& p : phases) {
        if (p.configuration && !include_configuration) continue;
        for (const auto& l : p.links) total += l.counters;
    }
    return total;
}

void PhaseTrace::append(const PhaseTrace& other) {
    for (const auto& d : other.all_dies)
        if (std::find(all_dies.begin(), all_dies.end(), d) == all_dies.end()) all_dies.push_back(d);
    phases.insert(phases.end(), other.phases.begin(), other.phases.end());
    steps.insert(steps.end(), other.steps.begin(), other.steps.end());
    config_cycles += other.config_cycles;
    toggles_measured = toggles_measured && other.toggles_measured;
}

namespace {

std::string label(const PhaseRecord& p) {
    std::string s = to_string(p.kind);
    if (p.gate >= 0) s += std::string("[") + "ifco"[p.gate] + "]";
    if (p.hop >= 0) s += "#" + std::to_string(p.hop);
    return s;
}

}  // namespace

void PhaseTrace::write_text(std::ostream& os) const {
    os << "# phase trace: " << phases.size() << " phases, " << steps.size() << " steps, "
       << inference_cycles() << " inference cycles, " << config_cycles << " configuration cycles\n";
    for (const auto& p : phases) {
        os << "step " << p.step << " layer " << p.layer << ' ' << label(p) << ' ' << p.start << ".." << p.end << " ("
           << p.cycles() << " cycles) active " << p.active.size() << '/' << p.dies.size();
        for (const auto& l : p.links)
            os << ' ' << l.net << ":bits=" << l.counters.driven_bits << ",toggles=" << l.counters.toggles;
        os << '\n';
    }
}

void PhaseTrace::write_csv(std::ostream& os) const {
    os << "cycle,end_cycle,step,layer,phase,die,link,bits,toggles\n";
    for (const auto& p : phases) {
        const std::string head = std::to_string(p.start) + ',' + std::to_string(p.end) + ',' +
                                 std::to_string(p.step) + ',' + std::to_string(p.layer) + ',' + label(p) + ',';
        for (const auto& d : p.active) os << head << d.name() << ",,0,0\n";
        for (const auto& l : p.links) {
            const std::string driver = l.net.substr(0, l.net.rfind('.'));
            os << head << driver << ',' << l.net << ',' << l.counters.driven_bits << ',' << l.counters.toggles << '\n';
        }
    }
}

}  // namespace lstmgrid
