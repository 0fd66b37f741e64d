// Command-line front end: plan, run, table4, sweep, lut-dump.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 constraint
// violation, 3 correctness failure (oracle mismatch, link deadlock).

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "lstmgrid/actlut.hpp"
#include "lstmgrid/config.hpp"
#include "lstmgrid/container.hpp"
#include "lstmgrid/lstm_ref.hpp"
#include "lstmgrid/report_io.hpp"

namespace fs = std::filesystem;
using namespace lstmgrid;

namespace {

enum Exit { kOk = 0, kUsage = 1, kConstraint = 2, kCorrectness = 3 };

struct CorrectnessError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Flags {
    std::string config;
    std::string out;
    std::string net;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> steps;
    bool reload = false;
    bool chip_select = false;
    bool time_multiplexed = false;
    std::optional<double> freq;
    std::string format = "txt";
    std::string fault;
    std::string axis;
    std::string values;
    std::string kind = "both";
};

/// "L,NH,NI[,NO]".
NetworkSpec parse_net(const std::string& text) {
    std::vector<std::size_t> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stoul(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::logic_error&) {
            throw ConfigError("--net expects L,NH,NI[,NO], got '" + text + "'");
        }
    }
    if (v.size() < 3 || v.size() > 4) throw ConfigError("--net expects L,NH,NI[,NO], got '" + text + "'");
    return NetworkSpec::uniform(v[0], v[1], v[2], v.size() == 4 ? std::optional(v[3]) : std::nullopt);
}

RunConfig resolve(const Flags& f) {
    RunConfig c = f.config.empty() ? RunConfig{} : load_config(f.config);
    if (!f.net.empty()) c.network = parse_net(f.net);
    if (f.seed) c.seed = *f.seed;
    if (f.steps) c.steps = *f.steps;
    if (f.reload && f.chip_select) throw ConfigError("--reload and --chip-select are exclusive");
    if (f.reload) c.mode = GridMode::reload;
    if (f.chip_select) c.mode = GridMode::chip_select;
    if (f.time_multiplexed) c.time_multiplexed = true;
    if (f.freq) c.op.frequency = *f.freq;
    if (!f.fault.empty()) c.sim.fault = parse_fault(f.fault);
    c.op.validate();
    return c;
}

/// 1L-192NH-123NI with a 62-wide output layer.
NetworkSpec demonstrator() { return NetworkSpec::uniform(1, 192, 123, 62); }

struct Loaded {
    NetworkSpec spec;
    QNetworkParams params;
};

Loaded network_and_params(const RunConfig& c, Rng& rng) {
    if (c.params) {
        ParamContainer pc = read_params(*c.params);
        if (c.network && (c.network->layers != pc.spec.layers || c.network->n_out != pc.spec.n_out))
            throw ConfigError("config network does not match " + c.params->string());
        return {pc.spec, std::move(pc.params)};
    }
    const NetworkSpec spec = c.network.value_or(demonstrator());
    return {spec, random_qparams(spec, rng, c.random_codes)};
}

std::ofstream open_out(const Flags& f, const std::string& name) {
    fs::create_directories(f.out);
    const fs::path p = fs::path(f.out) / name;
    std::ofstream os(p);
    if (!os) throw ConfigError("cannot write " + p.string());
    return os;
}

std::string ext(TableFormat fmt) { return fmt == TableFormat::csv ? ".csv" : ".txt"; }

int cmd_plan(const Flags& f) {
    const RunConfig c = resolve(f);
    Rng rng(c.seed);
    const NetworkSpec spec = c.params ? read_params(*c.params).spec : c.network.value_or(demonstrator());
    const GridPlan plan = plan_grid(spec, c.tile, c.plan_options());
    const PinBudget pins = pin_budget(plan, c.time_multiplexed);
    std::cout << plan_summary(plan);
    if (c.time_multiplexed)
        fmt::print("pins: {} (time-multiplexed)\n", pins.total_time_multiplexed);
    else
        fmt::print("pins: {}\n", pins.total_min);
    if (!f.out.empty()) open_out(f, "plan.json") << plan_to_json(plan) << '\n';
    return kOk;
}

int cmd_run(const Flags& f) {
    const RunConfig c = resolve(f);
    const TableFormat fmt = parse_table_format(f.format);
    Rng rng(c.seed);
    Loaded net = network_and_params(c, rng);
    const QMatrix x = c.features ? read_features(*c.features, net.spec.formats.input)
                                 : random_qfeatures(net.spec, c.steps, rng, c.random_codes);
    if (x.cols() != net.spec.n_in())
        throw ConfigError("features have " + std::to_string(x.cols()) + " columns, network expects " +
                          std::to_string(net.spec.n_in()));

    const GridPlan plan = plan_grid(net.spec, c.tile, c.plan_options());
    SystolicSim sim(plan, c.sim);
    sim.load_parameters(net.params);
    const QMatrix y = sim.run_sequence(x);

    // Oracle over the same accumulation segments, reading the same outputs.
    NetworkSpec ref_spec = net.spec;
    QNetworkParams ref_params = net.params;
    if (!c.sim.write_back) {
        ref_spec.n_out.reset();
        ref_params.fc.reset();
    }
    const AccumulationPlan acc = plan.accumulation();
    const QMatrix want = network_infer_fixed(ref_spec, ref_params, x, &acc);
    const bool exact = want == y;

    const EnergyReport r = report(sim.trace(), c.op, c.energy);
    std::cout << plan_summary(plan);
    fmt::print("steps: {}\n", x.rows());
    fmt::print("BIT-EXACT: {}\n", exact ? "yes" : "no");
    write_report(std::cout, r, fmt);
    if (!f.out.empty()) {
        open_out(f, "plan.json") << plan_to_json(plan) << '\n';
        auto ys = open_out(f, "outputs.csv");
        write_outputs(ys, y);
        auto ts = open_out(f, "trace.csv");
        sim.trace().write_csv(ts);
        auto rs = open_out(f, "report" + ext(fmt));
        write_report(rs, r, fmt);
    }
    if (!exact) throw CorrectnessError("systolic output differs from the fixed-point reference");
    return kOk;
}

int cmd_table4(const Flags& f) {
    const RunConfig c = resolve(f);
    const TableFormat fmt = parse_table_format(f.format);
    SimOptions o = extrapolation_options();
    o.timing = c.sim.timing;
    o.truncate_h_loop = c.sim.truncate_h_loop;
    const auto rows = compare_table4(c.tile, c.op, c.energy, o);
    write_table4(std::cout, rows, fmt);
    if (!f.out.empty()) {
        auto os = open_out(f, "table4" + ext(fmt));
        write_table4(os, rows, fmt);
    }
    return kOk;
}

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::logic_error&) {
            throw ConfigError("--values: not a number: '" + item + "'");
        }
    }
    return v;
}

/// Rethrows a failing sweep point with its axis value, keeping its category.
template <class Fn>
void sweep_point(const std::string& axis, double value, Fn&& fn) {
    const std::string where = fmt::format("{}={}: ", axis, value);
    try {
        fn();
    } catch (const ConstraintError& e) {
        throw ConstraintError(where + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(where + e.what());
    } catch (const SimulationError& e) {
        throw SimulationError(where + e.what());
    }
}

void sweep_grid(const RunConfig& c, const std::vector<double>& values, std::ostream& os) {
    os << "n,chips,n_hidden,time_us,power_cores_mw,energy_cores_uj,energy_io_uj,io_pct\n";
    SimOptions o = extrapolation_options();
    o.timing = c.sim.timing;
    for (double v : values)
        sweep_point("grid", v, [&] {
            if (v < 1 || v != std::floor(v)) throw ConfigError("grid size must be a positive integer");
            const auto n = static_cast<std::size_t>(v);
            const std::size_t nh = n * c.tile.nh_capacity;
            const auto spec = NetworkSpec::uniform(1, nh, nh);
            const auto r = extrapolate(spec, c.tile, c.op, c.energy, o);
            fmt::print(os, "{},{},{},{:.1f},{:.2f},{:.3f},{:.3f},{:.2f}\n", n, n * n, nh, r.time * 1e6,
                       r.core_power * 1e3, r.core_energy * 1e6, r.io_energy * 1e6, r.io_fraction);
        });
}

void sweep_frequency(const RunConfig& c, const std::vector<double>& values, std::ostream& os) {
    os << "freq_mhz,time_us,power_cores_mw,power_total_mw,energy_total_uj,peak_gops_per_die,link_mb_s\n";
    const NetworkSpec spec = c.network.value_or(demonstrator());
    SimOptions o = extrapolation_options();
    o.timing = c.sim.timing;
    for (double v : values)
        sweep_point("frequency", v, [&] {
            OperatingPoint op = c.op;
            op.frequency = v * 1e6;
            op.validate();
            const auto r = extrapolate(spec, c.tile, op, c.energy, o);
            fmt::print(os, "{},{:.2f},{:.3f},{:.3f},{:.4f},{:.4f},{:.2f}\n", v, r.time * 1e6, r.core_power * 1e3,
                       r.total_power * 1e3, r.total_energy * 1e6, peak_performance(c.tile.nh_capacity, op) * 1e-9,
                       link_bandwidth(op) * 1e-6);
        });
}

/// Float network quantized at each state precision, run on the grid and
/// compared to the float model.
void sweep_frac_bits(const RunConfig& c, const std::vector<double>& values, std::ostream& os) {
    os << "frac_bits,format,bit_exact,rms_error,max_abs_error,saturated_pct\n";
    const NetworkSpec base = c.network.value_or(NetworkSpec::uniform(1, 16, 12, 4));
    for (double v : values)
        sweep_point("frac_bits", v, [&] {
            if (v < 0 || v > 7 || v != std::floor(v)) throw ConfigError("frac_bits must be an integer in [0, 7]");
            NetworkSpec spec = base;
            spec.formats = FormatSet::with_state_frac(static_cast<int>(v));
            spec.validate();
            Rng rng(c.seed);
            const auto fp = random_float_params(spec, rng, 0.5);
            const auto fx = random_float_features(spec, c.steps, rng, 1.0);
            const auto qp = quantize_params_uniform(fp, spec.formats);
            const auto qx = quantize_matrix(fx, spec.formats.input);

            const auto plan = plan_grid(spec, c.tile, c.plan_options());
            SystolicSim sim(plan, c.sim);
            sim.load_parameters(qp);
            const QMatrix y = sim.run_sequence(qx);
            const AccumulationPlan acc = plan.accumulation();
            SaturationStats stats;
            const bool exact = network_infer_fixed(spec, qp, qx, &acc, &stats) == y;
            const Matrix<double> ref = network_infer_float(spec, fp, fx);
            double se = 0.0, worst = 0.0;
            for (std::size_t t = 0; t < y.rows(); ++t)
                for (std::size_t k = 0; k < y.cols(); ++k) {
                    const double e = dequantize(y.at(t, k)) - ref(t, k);
                    se += e * e;
                    worst = std::max(worst, std::abs(e));
                }
            const double n = static_cast<double>(std::max<std::size_t>(1, y.rows() * y.cols()));
            const double sat = stats.accumulators ? 100.0 * static_cast<double>(stats.saturated) /
                                                        static_cast<double>(stats.accumulators)
                                                  : 0.0;
            fmt::print(os, "{},{},{},{:.6f},{:.6f},{:.3f}\n", v, spec.formats.input.name(), exact ? "yes" : "no",
                       std::sqrt(se / n), worst, sat);
        });
}

int cmd_sweep(const Flags& f) {
    const RunConfig c = resolve(f);
    const auto values = parse_values(f.values);
    std::ostringstream os;
    try {
        if (f.axis == "grid")
            sweep_grid(c, values, os);
        else if (f.axis == "frequency")
            sweep_frequency(c, values, os);
        else if (f.axis == "frac_bits")
            sweep_frac_bits(c, values, os);
        else
            throw ConfigError("--axis must be grid, frequency or frac_bits");
    } catch (...) {
        std::cout << os.str();
        throw;
    }
    std::cout << os.str();
    if (!f.out.empty()) open_out(f, "sweep_" + f.axis + ".csv") << os.str();
    return kOk;
}

int cmd_lut_dump(const Flags& f) {
    const RunConfig c = resolve(f);
    const FormatSet fs = c.network ? c.network->formats : FormatSet{};
    const LutSet luts(fs);
    const std::vector<std::pair<std::string, const Lut256*>> all = {{"sigmoid", &luts.sigmoid},
                                                                     {"tanh", &luts.tanh}};
    bool any = false;
    for (const auto& [name, lut] : all) {
        if (f.kind != "both" && f.kind != name) continue;
        any = true;
        if (f.out.empty()) {
            if (f.kind == "both") std::cout << "# " << name << "\n";
            lut->dump_csv(std::cout);
        } else {
            auto os = open_out(f, "lut_" + name + ".csv");
            lut->dump_csv(os);
        }
    }
    if (!any) throw ConfigError("--kind must be sigmoid, tanh or both");
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Systolic multi-die LSTM accelerator: mapping, simulation and energy model"};
    app.require_subcommand(1);
    Flags f;

    const auto common = [&](CLI::App* cmd) {
        cmd->add_option("--config", f.config, "YAML run configuration")->check(CLI::ExistingFile);
        cmd->add_option("--out", f.out, "output directory");
        cmd->add_option("--net", f.net, "uniform network L,NH,NI[,NO] (overrides the config)");
        cmd->add_option("--seed", f.seed, "seed for generated networks and features");
        cmd->add_flag("--reload", f.reload, "one grid, layers streamed in per pass");
        cmd->add_flag("--chip-select", f.chip_select, "one shared parameter bus per grid");
        cmd->add_option("--freq", f.freq, "clock frequency [Hz]");
        cmd->add_option("--format", f.format, "report format")->check(CLI::IsMember({"txt", "csv"}));
    };

    auto* plan = app.add_subcommand("plan", "map a network onto dies and report pins and footprints");
    common(plan);
    plan->add_flag("--time-multiplexed", f.time_multiplexed, "share the I/O streams over one pin group");

    auto* run = app.add_subcommand("run", "simulate, check against the reference, report energy");
    common(run);
    run->add_option("--steps", f.steps, "generated feature rows");
    run->add_option("--fault", f.fault, "inject stuck:<net> or flip:<net>:<beat>[:<bit>]");

    auto* table4 = app.add_subcommand("table4", "extrapolated configurations against the published table");
    common(table4);

    auto* sweep = app.add_subcommand("sweep", "one report row per axis value");
    common(sweep);
    sweep->add_option("--axis", f.axis, "grid | frequency | frac_bits")->required();
    sweep->add_option("--values", f.values, "comma-separated values (frequency in MHz)");
    sweep->add_option("--steps", f.steps, "feature rows for frac_bits");

    auto* lut = app.add_subcommand("lut-dump", "write the activation tables as CSV");
    common(lut);
    lut->add_option("--kind", f.kind, "sigmoid | tanh | both");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (plan->parsed()) return cmd_plan(f);
        if (run->parsed()) return cmd_run(f);
        if (table4->parsed()) return cmd_table4(f);
        if (sweep->parsed()) return cmd_sweep(f);
        if (lut->parsed()) return cmd_lut_dump(f);
    } catch (const ConstraintError& e) {
        std::cerr << "constraint violation: " << e.what() << "\n";
        return kConstraint;
    } catch (const CorrectnessError& e) {
        std::cerr << "correctness failure: " << e.what() << "\n";
        return kCorrectness;
    } catch (const SimulationError& e) {
        std::cerr << "simulation failure: " << e.what() << "\n";
        return kCorrectness;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}
