#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "lstmgrid/perf_energy.hpp"
#include "lstmgrid/random_network.hpp"

namespace lstmgrid {

enum class GridMode { stacked, reload, chip_select };
const char* to_string(GridMode m);

/// Everything a CLI run needs. Paths are resolved against the config
/// file's directory.
struct RunConfig {
    std::optional<NetworkSpec> network;  // may come from the parameter container instead
    std::optional<std::filesystem::path> params;
    std::optional<std::filesystem::path> features;
    std::size_t steps = 4;  // generated feature rows
    std::uint64_t seed = 1;
    CodeRanges random_codes = CodeRanges::full();
    TileSpec tile{};
    GridMode mode = GridMode::stacked;
    bool time_multiplexed = false;
    OperatingPoint op{};
    EnergyConstants energy{};
    SimOptions sim{};

    PlanOptions plan_options() const;
};

/// YAML document with `schema_version: 1`. Unknown keys are errors.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

}  // namespace lstmgrid
