#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lstmgrid/mapper.hpp"

namespace lstmgrid {

/// Handshake deadlock or another failure of the simulated hardware.
class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LinkCounters {
    std::uint64_t beats = 0;
    std::uint64_t driven_bits = 0;
    std::uint64_t received_bits = 0;  // summed over the sinks that accepted the beat
    std::uint64_t toggles = 0;        // Hamming distance between consecutive beats
    std::uint64_t active_cycles = 0;

    LinkCounters& operator+=(const LinkCounters& o);
    friend LinkCounters operator-(LinkCounters a, const LinkCounters& b);
    friend bool operator==(const LinkCounters&, const LinkCounters&) = default;
};

/// Input interface of a die.
enum class Port { p, r, h };
const char* to_string(Port p);

/// One driver, any number of sinks. Every die has one output net; the
/// controller drives one parameter net per die, or one shared net per grid
/// with chip-select.
struct Net {
    std::string name;
    LinkKind kind = LinkKind::param;
    Endpoint driver;
    std::vector<Endpoint> sinks;
    LinkCounters counters;
    std::uint8_t last_beat = 0;
};

struct Fault {
    enum class Kind { stuck_ready, bit_flip };
    Kind kind = Kind::bit_flip;
    std::string net;         // net name, e.g. "G0(0,0).out"
    std::uint64_t beat = 0;  // bit_flip: index of the beat on that net
    int bit = 0;             // bit_flip: 0..3
};

/// Parses "stuck:<net>" or "flip:<net>:<beat>[:<bit>]".
Fault parse_fault(const std::string& text);

/// 8- and 16-bit words split LSB-first into 4-bit beats.
std::vector<std::uint8_t> to_beats(const std::vector<std::int8_t>& bytes);
std::vector<std::uint8_t> to_beats(const std::vector<std::int16_t>& words);
std::vector<std::int8_t> bytes_from_beats(const std::vector<std::uint8_t>& beats);
std::vector<std::int16_t> words_from_beats(const std::vector<std::uint8_t>& beats);

}  // namespace lstmgrid
