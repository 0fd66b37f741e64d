#include "lstmgrid/report_io.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <ostream>

namespace lstmgrid {

TableFormat parse_table_format(const std::string& s) {
    if (s == "txt") return TableFormat::txt;
    if (s == "csv") return TableFormat::csv;
    throw ConfigError("format must be csv or txt, got '" + s + "'");
}

void write_report(std::ostream& os, const EnergyReport& r, TableFormat fmt) {
    struct Line {
        const char* name;
        double value;
        const char* unit;
    };
    const double per_step = r.steps ? 1.0 / static_cast<double>(r.steps) : 0.0;
    const Line lines[] = {
        {"steps", static_cast<double>(r.steps), "steps"},
        {"cycles", static_cast<double>(r.cycles), "cycles"},
        {"dies", static_cast<double>(r.dies), "dies"},
        {"time", r.time * 1e6, "us"},
        {"time_per_step", r.time * per_step * 1e6, "us"},
        {"energy_per_step", r.total_energy * per_step * 1e6, "uJ"},
        {"core_energy", r.core_energy * 1e6, "uJ"},
        {"io_energy", r.io_energy * 1e6, "uJ"},
        {"total_energy", r.total_energy * 1e6, "uJ"},
        {"io_fraction", r.io_fraction, "%"},
        {"core_power", r.core_power * 1e3, "mW"},
        {"io_power", r.io_power * 1e3, "mW"},
        {"total_power", r.total_power * 1e3, "mW"},
        {"toggle_factor", r.toggle_factor, "1"},
        {"link_beats", static_cast<double>(r.traffic.beats), "beats"},
    };
    if (fmt == TableFormat::csv) {
        os << "section,name,value,unit\n";
        for (const auto& l : lines) fmt::print(os, "total,{},{:.6g},{}\n", l.name, l.value, l.unit);
        for (const auto& p : r.phases) {
            fmt::print(os, "phase_cycles,{},{},cycles\n", p.name, p.cycles);
            fmt::print(os, "phase_core,{},{:.6g},uJ\n", p.name, p.core * 1e6);
            fmt::print(os, "phase_io,{},{:.6g},uJ\n", p.name, p.io * 1e6);
        }
        for (const auto& d : r.per_die) {
            fmt::print(os, "die_active,{},{},cycles\n", d.die.name(), d.active);
            fmt::print(os, "die_stall,{},{},cycles\n", d.die.name(), d.stall);
            fmt::print(os, "die_core,{},{:.6g},uJ\n", d.die.name(), d.core * 1e6);
        }
        return;
    }
    for (const auto& l : lines) fmt::print(os, "{:<20} {:>14.4f} {}\n", l.name, l.value, l.unit);
    fmt::print(os, "\n{:<14} {:>10} {:>12} {:>12}\n", "phase", "cycles", "core [uJ]", "io [uJ]");
    for (const auto& p : r.phases)
        fmt::print(os, "{:<14} {:>10} {:>12.5f} {:>12.5f}\n", p.name, p.cycles, p.core * 1e6, p.io * 1e6);
    fmt::print(os, "\n{:<10} {:>10} {:>10} {:>12}\n", "die", "active", "stall", "core [uJ]");
    for (const auto& d : r.per_die)
        fmt::print(os, "{:<10} {:>10} {:>10} {:>12.5f}\n", d.die.name(), d.active, d.stall, d.core * 1e6);
}

void write_outputs(std::ostream& os, const QMatrix& y) {
    os << "step,index,code,value\n";
    for (std::size_t t = 0; t < y.rows(); ++t)
        for (std::size_t k = 0; k < y.cols(); ++k)
            fmt::print(os, "{},{},{},{}\n", t, k, int{y.codes(t, k)}, dequantize(y.at(t, k)));
}

std::vector<Table4Result> compare_table4(const TileSpec& tile, const OperatingPoint& op,
                                         const EnergyConstants& consts, const SimOptions& options) {
    std::vector<Table4Result> out;
    for (const auto& row : table4_reference()) {
        const auto spec = NetworkSpec::uniform(row.layers, row.n_hidden, row.n_hidden);
        const auto plan = plan_grid(spec, tile);
        Table4Result r;
        r.published = row;
        r.chips = plan.total_dies;
        r.chips_per_layer = plan.layers[0].n * plan.layers[0].n;
        r.model = report(analytic_trace(plan, options), op, consts);
        out.push_back(r);
    }
    return out;
}

namespace {

double delta(double model, double published) { return published != 0.0 ? 100.0 * (model / published - 1.0) : 0.0; }

}  // namespace

void write_table4(std::ostream& os, const std::vector<Table4Result>& rows, TableFormat fmt) {
    if (fmt == TableFormat::csv) {
        os << "layers,n_hidden,chips_per_layer,chips_total,chips_pub,time_us,time_pub_us,time_delta_pct,"
              "power_cores_mw,power_cores_pub_mw,power_delta_pct,energy_cores_uj,energy_cores_pub_uj,"
              "energy_cores_delta_pct,energy_io_uj,energy_io_pub_uj,io_pct,io_pub_pct,io_delta_points\n";
        for (const auto& r : rows)
            fmt::print(os, "{},{},{},{},{},{:.1f},{:.1f},{:.2f},{:.2f},{:.1f},{:.2f},{:.2f},{:.1f},{:.2f},{:.3f},{:.1f},"
                           "{:.2f},{:.1f},{:.2f}\n",
                       r.published.layers, r.published.n_hidden, r.chips_per_layer, r.chips, r.published.chips_total, r.time_us(),
                       r.published.time_us, delta(r.time_us(), r.published.time_us), r.power_cores_mw(),
                       r.published.power_cores_mw, delta(r.power_cores_mw(), r.published.power_cores_mw),
                       r.energy_cores_uj(), r.published.energy_cores_uj,
                       delta(r.energy_cores_uj(), r.published.energy_cores_uj), r.energy_io_uj(), r.published.energy_io_uj,
                       r.model.io_fraction, r.published.io_percent, r.model.io_fraction - r.published.io_percent);
        return;
    }
    fmt::print(os, "{:<8} {:>9} {:>24} {:>22} {:>22} {:>16} {:>20}\n", "config", "chips", "time [us] (published, d%)",
               "P cores [mW] (d%)", "E cores [uJ] (d%)", "E io [uJ]", "I/O % (published, dpt)");
    for (const auto& r : rows)
        fmt::print(os, "{:<8} {:>4}/{:<4} {:>8.1f} ({:>7.1f} {:>+5.1f}) {:>7.1f} ({:>5.1f} {:>+5.1f}) "
                       "{:>7.2f} ({:>5.1f} {:>+5.1f}) {:>6.3f} ({:>5.1f}) {:>6.1f} ({:>4.1f} {:>+4.1f})\n",
                   fmt::format("{}L-{}", r.published.layers, r.published.n_hidden), r.chips, r.published.chips_total, r.time_us(),
                   r.published.time_us, delta(r.time_us(), r.published.time_us), r.power_cores_mw(), r.published.power_cores_mw,
                   delta(r.power_cores_mw(), r.published.power_cores_mw), r.energy_cores_uj(), r.published.energy_cores_uj,
                   delta(r.energy_cores_uj(), r.published.energy_cores_uj), r.energy_io_uj(), r.published.energy_io_uj,
                   r.model.io_fraction, r.published.io_percent, r.model.io_fraction - r.published.io_percent);
}

}  // namespace lstmgrid
