#include "lstmgrid/perf_energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace lstmgrid {

void OperatingPoint::validate() const {
    if (!(frequency > 0.0)) throw ConfigError("operating point: frequency must be > 0");
    if (!(v_core > 0.0) || !(v_pad > 0.0)) throw ConfigError("operating point: supply voltages must be > 0");
}

void EnergyConstants::validate() const {
    for (double v : {e_drive, e_receive, p_core_active_per_die, stall_fraction, p_io_idle_per_die, alpha_toggle})
        if (!(v >= 0.0)) throw ConfigError("energy constants must be >= 0");
    reference.validate();
}

namespace {

double sq(double v) { return v * v; }

/// Energy of one link's traffic.
double link_energy(const LinkCounters& c, double toggle_factor, const EnergyConstants& k, double pad_scale) {
    return (static_cast<double>(c.driven_bits) * k.e_drive + static_cast<double>(c.received_bits) * k.e_receive) *
           toggle_factor * pad_scale;
}

}  // namespace

EnergyReport report(const PhaseTrace& trace, const OperatingPoint& op, const EnergyConstants& k) {
    op.validate();
    k.validate();
    EnergyReport r;
    r.cycles = trace.inference_cycles();
    r.steps = trace.steps.size();
    r.dies = trace.all_dies.size();
    r.time = static_cast<double>(r.cycles) / op.frequency;

    // Core energy per die-cycle is frequency independent; it scales with V^2.
    const double e_active = k.p_core_active_per_die / k.reference.frequency * sq(op.v_core / k.reference.v_core);
    const double e_stall = k.stall_fraction * e_active;
    const double pad_scale = sq(op.v_pad / k.reference.v_pad);
    const bool measured = k.measured_toggles && trace.toggles_measured;

    std::map<PhaseKind, std::size_t> slot;
    for (const auto& ph : trace.phases) {
        if (ph.configuration) continue;
        auto [it, fresh] = slot.try_emplace(ph.kind, r.phases.size());
        if (fresh) r.phases.push_back({to_string(ph.kind)});
        EnergyItem& item = r.phases[it->second];
        item.cycles += ph.cycles();
        item.core += static_cast<double>(ph.active.size() * ph.cycles()) * e_active;
        for (const auto& l : ph.links) {
            const double factor = !measured ? k.alpha_toggle
                                  : l.counters.driven_bits ? static_cast<double>(l.counters.toggles) /
                                                                 static_cast<double>(l.counters.driven_bits)
                                                           : 0.0;
            item.io += link_energy(l.counters, factor, k, pad_scale);
            r.traffic += l.counters;
        }
    }

    EnergyItem stall{"stall"};
    for (const auto& [die, c] : trace.die_cycles(false)) {
        const double e = static_cast<double>(c.active) * e_active + static_cast<double>(c.stall) * e_stall;
        r.per_die.push_back({die, c.active, c.stall, e});
        r.core_energy += e;
        stall.cycles += c.stall;
        stall.core += static_cast<double>(c.stall) * e_stall;
    }
    EnergyItem idle{"io_idle", r.cycles, 0.0, k.p_io_idle_per_die * pad_scale * static_cast<double>(r.dies) * r.time};
    r.phases.push_back(stall);
    r.phases.push_back(idle);
    for (const auto& item : r.phases) r.io_energy += item.io;

    r.toggle_factor = !measured               ? k.alpha_toggle
                      : r.traffic.driven_bits ? static_cast<double>(r.traffic.toggles) /
                                                    static_cast<double>(r.traffic.driven_bits)
                                              : 0.0;
    r.total_energy = r.core_energy + r.io_energy;
    r.io_fraction = r.total_energy > 0.0 ? 100.0 * r.io_energy / r.total_energy : 0.0;
    if (r.time > 0.0) {
        r.core_power = r.core_energy / r.time;
        r.io_power = r.io_energy / r.time;
        r.total_power = r.total_energy / r.time;
    }
    return r;
}

namespace {

/// Builds the phase list of one stacked step.
class Schedule {
public:
    Schedule(const GridPlan& plan, const SimOptions& o) : plan_(plan), o_(o) {}

    PhaseTrace run() {
        if (plan_.reload()) throw ConfigError("analytic model covers stacked grids only");
        for (const auto& d : plan_.dies)
            if (std::find(t_.all_dies.begin(), t_.all_dies.end(), d.die) == t_.all_dies.end())
                t_.all_dies.push_back(d.die);
        std::sort(t_.all_dies.begin(), t_.all_dies.end());
        t_.toggles_measured = false;

        const std::size_t last = plan_.layers.size() - 1;
        std::uint64_t prev_end = 0, end = 0;
        for (std::size_t l = 0; l <= last; ++l) {
            std::uint64_t now = 0;
            if (l == 0) {
                feature_load(now);
            } else {
                now = prev_end - stacked_overlap(plan_.layers[l - 1], plan_.layers[l]);
                handoff(l, now);
            }
            layer(l, now);
            if (l == last && o_.write_back) tail(l, now);
            prev_end = now;
            end = std::max(end, now);
        }
        t_.steps.push_back({0, 0, end});
        return std::move(t_);
    }

private:
    struct Drive {
        std::string net;
        LinkKind kind;
        std::uint64_t beats;
        std::size_t sinks;
    };

    void add(PhaseKind kind, std::size_t layer, int gate, int hop, std::uint64_t& now, std::uint64_t cycles,
             std::vector<DieId> active, const std::vector<Drive>& drives) {
        PhaseRecord r;
        r.kind = kind;
        r.layer = layer;
        r.gate = gate;
        r.hop = hop;
        r.start = now;
        r.end = now + cycles;
        for (const DiePlacement* d : plan_.layer_dies(layer)) r.dies.push_back(d->die);
        std::sort(active.begin(), active.end());
        active.erase(std::unique(active.begin(), active.end()), active.end());
        r.active = std::move(active);
        std::map<std::string, std::size_t> at;
        for (const auto& d : drives) {
            auto [it, fresh] = at.try_emplace(d.net, r.links.size());
            if (fresh) r.links.push_back({d.net, d.kind, {}});
            auto& c = r.links[it->second].counters;
            c.beats += d.beats;
            c.driven_bits += 4 * d.beats;
            c.received_bits += 4 * d.beats * d.sinks;
            c.active_cycles += d.beats;
        }
        t_.phases.push_back(std::move(r));
        now += cycles;
    }

    std::string out(const DieId& d) const { return d.name() + ".out"; }
    std::string pnet(const DieId& d) const {
        return plan_.options.chip_select ? "host.p_G" + std::to_string(d.grid) : "host.p_" + d.name();
    }
    const DiePlacement& master(std::size_t l, std::size_t i) const {
        return plan_.die(l, i, plan_.layers[l].n - 1);
    }

    void feature_load(std::uint64_t& now) {
        std::vector<Drive> drives;
        std::vector<DieId> active;
        std::uint64_t longest = 0, sum = 0;
        for (const DiePlacement* d : plan_.layer_dies(0)) {
            const std::uint64_t beats = 2 * d->x_cols.size();
            drives.push_back({pnet(d->die), LinkKind::param, beats, 1});
            active.push_back(d->die);
            longest = std::max(longest, beats);
            sum += beats;
        }
        add(PhaseKind::feature_load, 0, -1, -1, now, plan_.options.chip_select ? sum : longest, active, drives);
    }

    void handoff(std::size_t l, std::uint64_t& now) {
        std::vector<Drive> drives;
        std::vector<DieId> active;
        std::map<DieId, std::uint64_t> per_receiver;
        std::uint64_t longest = 0;
        for (std::size_t i = 0; i < plan_.layers[l - 1].n; ++i) {
            const DiePlacement& m = master(l - 1, i);
            const std::uint64_t beats = 2 * m.rows.size();
            std::size_t sinks = 0;
            for (const DiePlacement* d : plan_.layer_dies(l))
                if (d->x_cols.begin < m.rows.end && m.rows.begin < d->x_cols.end) {
                    ++sinks;
                    active.push_back(d->die);
                    longest = std::max(longest, per_receiver[d->die] += beats);
                }
            drives.push_back({out(m.die), LinkKind::hidden, beats, sinks});
        }
        add(PhaseKind::handoff, l, -1, -1, now, longest, active, drives);
    }

    void layer(std::size_t l, std::uint64_t& now) {
        const LayerPlan& lp = plan_.layers[l];
        const std::size_t n = lp.n;
        std::vector<DieId> all;
        for (const DiePlacement* d : plan_.layer_dies(l)) all.push_back(d->die);
        const std::uint64_t cc = compute_cycles(lp, plan_.tile, o_.truncate_h_loop);
        for (int g = 0; g < 4; ++g) {
            add(PhaseKind::compute, l, g, -1, now, cc, all, {});
            for (std::size_t j = 0; j + 1 < n; ++j) {
                std::vector<Drive> drives;
                std::vector<DieId> active;
                std::uint64_t longest = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    const DiePlacement& src = plan_.die(l, i, j);
                    const std::uint64_t beats = 4 * src.rows.size();
                    drives.push_back({out(src.die), LinkKind::reduction, beats, 1});
                    active.push_back(src.die);
                    active.push_back(plan_.die(l, i, j + 1).die);
                    longest = std::max(longest, o_.timing.c_hop + beats);
                }
                add(PhaseKind::reduce, l, g, static_cast<int>(j), now, longest, active, drives);
            }
        }
        std::vector<DieId> masters;
        for (std::size_t i = 0; i < n; ++i) masters.push_back(master(l, i).die);
        add(PhaseKind::activate, l, -1, -1, now, o_.timing.c_fixed, masters, {});
        if (n == 1) return;

        const std::uint64_t a = 2 * master(l, n - 1).rows.size();
        add(PhaseKind::distribute, l, -1, 0, now, a, masters, {{out(masters.back()), LinkKind::hidden, a, n - 1}});
        for (std::size_t j = 0; j + 1 < n; ++j) {
            const std::uint64_t b = 2 * master(l, j).rows.size();
            std::vector<DieId> active{masters[j]};
            for (std::size_t i = 0; i < n; ++i) active.push_back(plan_.die(l, i, j).die);
            add(PhaseKind::distribute, l, -1, static_cast<int>(j + 1), now, b, active,
                {{out(masters[j]), LinkKind::hidden, b, n}});
        }
    }

    void tail(std::size_t l, std::uint64_t& now) {
        const LayerPlan& lp = plan_.layers[l];
        std::vector<DieId> masters;
        for (std::size_t i = 0; i < lp.n; ++i) masters.push_back(master(l, i).die);
        if (!plan_.spec.n_out) {
            std::vector<Drive> drives;
            std::uint64_t longest = 0;
            for (std::size_t i = 0; i < lp.n; ++i) {
                const std::uint64_t beats = 2 * master(l, i).rows.size();
                drives.push_back({out(masters[i]), LinkKind::output, beats, 1});
                longest = std::max(longest, beats);
            }
            add(PhaseKind::write_back, l, -1, -1, now, longest, masters, drives);
            return;
        }
        const std::uint64_t n_out = *plan_.spec.n_out;
        const std::uint64_t cc =
            o_.truncate_h_loop ? lp.h_tile : std::max<std::uint64_t>(lp.h_tile, plan_.tile.nh_capacity);
        add(PhaseKind::fc_compute, l, -1, -1, now, cc, masters, {});
        for (std::size_t m = 1; m < lp.n; ++m)
            add(PhaseKind::fc_reduce, l, -1, static_cast<int>(m - 1), now, o_.timing.c_hop + 4 * n_out,
                {masters[m], masters[0]}, {{out(masters[m]), LinkKind::hidden, 4 * n_out, 1}});
        add(PhaseKind::write_back, l, -1, -1, now, 2 * n_out, {masters[0]},
            {{out(masters[0]), LinkKind::output, 2 * n_out, 1}});
    }

    const GridPlan& plan_;
    const SimOptions& o_;
    PhaseTrace t_;
};

}  // namespace

PhaseTrace analytic_trace(const GridPlan& plan, const SimOptions& options) { return Schedule(plan, options).run(); }

EnergyReport extrapolate(const NetworkSpec& spec, const TileSpec& tile, const OperatingPoint& op,
                         const EnergyConstants& consts, const SimOptions& options) {
    return report(analytic_trace(plan_grid(spec, tile), options), op, consts);
}

double peak_performance(std::size_t n_units, const OperatingPoint& op) {
    return 2.0 * static_cast<double>(n_units) * op.frequency;
}

double link_bandwidth(const OperatingPoint& op, int link_bits) {
    return static_cast<double>(link_bits) * op.frequency / 8.0;
}

EnergyReport scale_technology(const EnergyReport& r, double l_old, double l_new, double v_old, double v_new) {
    if (!(l_old > 0.0) || !(l_new > 0.0) || !(v_old > 0.0) || !(v_new > 0.0))
        throw ConfigError("scale_technology: lengths and voltages must be > 0");
    const double k = (l_new / l_old) * sq(v_new / v_old);
    EnergyReport s = r;
    for (double* v : {&s.core_energy, &s.io_energy, &s.total_energy, &s.core_power, &s.io_power, &s.total_power})
        *v *= k;
    for (auto& p : s.phases) {
        p.core *= k;
        p.io *= k;
    }
    for (auto& d : s.per_die) d.core *= k;
    return s;
}

const std::array<Table4Row, 10>& table4_reference() {
    static const std::array<Table4Row, 10> rows{{
        {1, 96, 1, 1, 101.2, 2.0, 0.2, 0.0, 5.9},
        {1, 56, 1, 1, 81.2, 2.0, 0.2, 0.0, 6.1},
        {1, 192, 4, 4, 295.2, 7.9, 2.3, 0.3, 12.1},
        {1, 288, 9, 9, 469.8, 17.7, 8.3, 1.0, 10.4},
        {1, 384, 16, 16, 644.4, 31.5, 20.3, 2.1, 9.2},
        {1, 480, 25, 25, 819.0, 49.2, 40.3, 3.7, 8.3},
        {2, 96, 1, 2, 182.8, 3.9, 0.7, 0.1, 7.3},
        {2, 192, 4, 8, 532.0, 15.7, 8.4, 0.8, 8.6},
        {3, 384, 16, 48, 1933.2, 94.4, 182.6, 11.2, 5.8},
        {3, 480, 25, 75, 2457.0, 147.6, 362.6, 21.0, 5.5},
    }};
    return rows;
}

Calibration calibrate(const TileSpec& tile, const EnergyConstants& consts) {
    const auto& rows = table4_reference();
    // Step cycles are affine in (c_hop, c_fixed); three traces per row pin
    // the coefficients.
    struct Affine {
        double base, hop, fixed;
    };
    std::vector<Affine> lin;
    std::vector<GridPlan> plans;
    const auto cycles = [&](const GridPlan& p, std::uint64_t h, std::uint64_t f) {
        SimOptions o = extrapolation_options();
        o.timing = {h, f};
        return static_cast<double>(analytic_trace(p, o).inference_cycles());
    };
    for (const auto& r : rows) {
        plans.push_back(plan_grid(NetworkSpec::uniform(r.layers, r.n_hidden, r.n_hidden), tile));
        const double b = cycles(plans.back(), 0, 0);
        lin.push_back({b, cycles(plans.back(), 1, 0) - b, cycles(plans.back(), 0, 1) - b});
    }
    Calibration c;
    c.max_time_error = std::numeric_limits<double>::infinity();
    for (std::uint64_t h = 0; h <= 64; ++h)
        for (std::uint64_t f = 0; f <= 256; ++f) {
            double worst = 0.0;
            for (std::size_t k = 0; k < rows.size(); ++k) {
                const double t = lin[k].base + lin[k].hop * static_cast<double>(h) +
                                 lin[k].fixed * static_cast<double>(f);
                const double ref = rows[k].time_us * 1e-6 * consts.reference.frequency;
                worst = std::max(worst, std::abs(t / ref - 1.0));
            }
            if (worst < c.max_time_error) {
                c.max_time_error = worst;
                c.timing = {h, f};
            }
        }

    // Core power is linear in the stall fraction.
    SimOptions o = extrapolation_options();
    o.timing = c.timing;
    EnergyConstants k = consts;
    k.p_io_idle_per_die = 0.0;
    std::vector<std::pair<double, double>> power;  // at s = 0 and s = 1
    for (const auto& p : plans) {
        const PhaseTrace t = analytic_trace(p, o);
        k.stall_fraction = 0.0;
        const double p0 = report(t, k.reference, k).core_power;
        k.stall_fraction = 1.0;
        power.emplace_back(p0, report(t, k.reference, k).core_power);
    }
    c.max_power_error = std::numeric_limits<double>::infinity();
    for (int step = 0; step <= 1000; ++step) {
        const double s = step / 1000.0;
        double worst = 0.0;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const double pw = power[r].first + s * (power[r].second - power[r].first);
            worst = std::max(worst, std::abs(pw / (rows[r].power_cores_mw * 1e-3) - 1.0));
        }
        if (worst < c.max_power_error) {
            c.max_power_error = worst;
            c.stall_fraction = s;
        }
    }
    return c;
}

double io_idle_power(const EnergyReport& dynamic_only, double measured_io_power) {
    if (dynamic_only.dies == 0 || dynamic_only.time <= 0.0) return 0.0;
    return (measured_io_power - dynamic_only.io_energy / dynamic_only.time) / static_cast<double>(dynamic_only.dies);
}

}  // namespace lstmgrid
