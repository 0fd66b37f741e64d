#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "lstmgrid/perf_energy.hpp"

namespace lstmgrid {

enum class TableFormat { txt, csv };
TableFormat parse_table_format(const std::string& s);

/// Headline figures plus the per-phase and per-die breakdowns.
void write_report(std::ostream& os, const EnergyReport& r, TableFormat fmt);

/// Long form: step,index,code,value.
void write_outputs(std::ostream& os, const QMatrix& y);

struct Table4Result {
    Table4Row published;
    std::size_t chips = 0;
    std::size_t chips_per_layer = 0;
    EnergyReport model;

    double time_us() const { return model.time * 1e6; }
    double power_cores_mw() const { return model.core_power * 1e3; }
    double energy_cores_uj() const { return model.core_energy * 1e6; }
    double energy_io_uj() const { return model.io_energy * 1e6; }
};

std::vector<Table4Result> compare_table4(const TileSpec& tile = {}, const OperatingPoint& op = {},
                                         const EnergyConstants& consts = {},
                                         const SimOptions& options = extrapolation_options());

/// Model, published value and delta (percent, or points for the I/O share).
void write_table4(std::ostream& os, const std::vector<Table4Result>& rows, TableFormat fmt);

}  // namespace lstmgrid
