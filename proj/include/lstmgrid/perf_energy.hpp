#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lstmgrid/mapper.hpp"
#include "lstmgrid/systolic_sim.hpp"
#include "lstmgrid/trace.hpp"

namespace lstmgrid {

struct OperatingPoint {
    double frequency = 10e6;  // Hz
    double v_core = 1.2;      // V
    double v_pad = 2.5;       // V

    void validate() const;
};

/// Per-die core power at `reference`; other points scale with f and V^2.
struct EnergyConstants {
    double e_drive = 27.8e-12;   // J per driven bit
    double e_receive = 4.7e-12;  // J per received bit
    double p_core_active_per_die = 2.0e-3;  // W
    double stall_fraction = 0.968;          // stalled die power over active die power
    double p_io_idle_per_die = 0.0634e-3;   // W, pad power not explained by data beats
    double alpha_toggle = 0.5;
    /// Use the trace's toggle counts when it has them.
    bool measured_toggles = true;
    OperatingPoint reference{};

    double p_core_stall_per_die() const { return stall_fraction * p_core_active_per_die; }
    void validate() const;
};

struct EnergyItem {
    std::string name;
    std::uint64_t cycles = 0;
    double core = 0.0;  // J
    double io = 0.0;    // J
};

struct DieEnergy {
    DieId die;
    std::uint64_t active = 0;
    std::uint64_t stall = 0;
    double core = 0.0;  // J
};

struct EnergyReport {
    std::uint64_t cycles = 0;
    std::size_t steps = 0;
    std::size_t dies = 0;
    double time = 0.0;         // s, all steps
    double core_energy = 0.0;  // J
    double io_energy = 0.0;    // J
    double total_energy = 0.0;
    double io_fraction = 0.0;  // percent of total
    double core_power = 0.0;   // W
    double io_power = 0.0;
    double total_power = 0.0;
    double toggle_factor = 0.0;
    LinkCounters traffic;
    /// One entry per phase kind in first-seen order, then "stall" and
    /// "io_idle"; core and io sum to the totals.
    std::vector<EnergyItem> phases;
    std::vector<DieEnergy> per_die;
};

/// Energy and latency of the inference steps in `trace`; one-time
/// configuration phases are left out.
EnergyReport report(const PhaseTrace& trace, const OperatingPoint& op, const EnergyConstants& consts = {});

/// Options of the output-free, configuration-free step used for the
/// extrapolated figures.
inline SimOptions extrapolation_options() {
    SimOptions o;
    o.write_back = false;
    return o;
}

/// Closed-form trace of one stacked inference step: the phase schedule of
/// SystolicSim without data. Links carry no toggle counts.
PhaseTrace analytic_trace(const GridPlan& plan, const SimOptions& options = extrapolation_options());

EnergyReport extrapolate(const NetworkSpec& spec, const TileSpec& tile, const OperatingPoint& op,
                         const EnergyConstants& consts = {}, const SimOptions& options = extrapolation_options());

/// Operations per second with two operations per MAC unit and cycle.
double peak_performance(std::size_t n_units, const OperatingPoint& op);
/// Bytes per second of one 4-bit link.
double link_bandwidth(const OperatingPoint& op, int link_bits = 4);

/// P * (l_new / l_old) * (V_new / V_old)^2 applied to every power and energy.
EnergyReport scale_technology(const EnergyReport& r, double l_old, double l_new, double v_old, double v_new);

struct Table4Row {
    std::size_t layers;
    std::size_t n_hidden;  // N_I = N_H
    std::size_t chips_per_layer;
    std::size_t chips_total;
    double time_us;
    double power_cores_mw;
    double energy_cores_uj;
    double energy_io_uj;
    double io_percent;
};

/// The ten extrapolated configurations with their published values.
const std::array<Table4Row, 10>& table4_reference();

struct Calibration {
    TimingConstants timing;
    double stall_fraction = 0.0;
    double max_time_error = 0.0;   // relative
    double max_power_error = 0.0;  // relative
};

/// Grid search of c_hop and c_fixed against the published times, then of
/// the stall fraction against the published core power.
Calibration calibrate(const TileSpec& tile = {}, const EnergyConstants& consts = {});

/// Residual pad power per die implied by a measured I/O power over a
/// simulated step window.
double io_idle_power(const EnergyReport& dynamic_only, double measured_io_power);

}  // namespace lstmgrid
