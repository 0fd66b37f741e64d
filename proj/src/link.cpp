#include "lstmgrid/link.hpp"

namespace lstmgrid {

LinkCounters& LinkCounters::operator+=(const LinkCounters& o) {
    beats += o.beats;
    driven_bits += o.driven_bits;
    received_bits += o.received_bits;
    toggles += o.toggles;
    active_cycles += o.active_cycles;
    return *this;
}

LinkCounters operator-(LinkCounters a, const LinkCounters& b) {
    a.beats -= b.beats;
    a.driven_bits -= b.driven_bits;
    a.received_bits -= b.received_bits;
    a.toggles -= b.toggles;
    a.active_cycles -= b.active_cycles;
    return a;
}

const char* to_string(Port p) {
    switch (p) {
        case Port::p:
            return "p";
        case Port::r:
            return "r";
        case Port::h:
            return "h";
    }
    return "?";
}

Fault parse_fault(const std::string& text) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t k = text.find(':', start);
        parts.push_back(text.substr(start, k == std::string::npos ? std::string::npos : k - start));
        if (k == std::string::npos) break;
        start = k + 1;
    }
    Fault f;
    try {
        if (parts.size() == 2 && parts[0] == "stuck") {
            f.kind = Fault::Kind::stuck_ready;
            f.net = parts[1];
            return f;
        }
        if ((parts.size() == 3 || parts.size() == 4) && parts[0] == "flip") {
            f.kind = Fault::Kind::bit_flip;
            f.net = parts[1];
            f.beat = std::stoull(parts[2]);
            f.bit = parts.size() == 4 ? std::stoi(parts[3]) : 0;
            if (f.bit >= 0 && f.bit < 4) return f;
        }
    } catch (const std::exception&) {
    }
    throw ConfigError("fault: expected stuck:<net> or flip:<net>:<beat>[:<bit>], got '" + text + "'");
}

std::vector<std::uint8_t> to_beats(const std::vector<std::int8_t>& bytes) {
    std::vector<std::uint8_t> out;
    out.reserve(bytes.size() * 2);
    for (std::int8_t b : bytes) {
        const auto u = static_cast<std::uint8_t>(b);
        out.push_back(u & 0xF);
        out.push_back(u >> 4);
    }
    return out;
}

std::vector<std::uint8_t> to_beats(const std::vector<std::int16_t>& words) {
    std::vector<std::uint8_t> out;
    out.reserve(words.size() * 4);
    for (std::int16_t w : words) {
        const auto u = static_cast<std::uint16_t>(w);
        for (int k = 0; k < 4; ++k) out.push_back((u >> (4 * k)) & 0xF);
    }
    return out;
}

std::vector<std::int8_t> bytes_from_beats(const std::vector<std::uint8_t>& beats) {
    std::vector<std::int8_t> out(beats.size() / 2);
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = static_cast<std::int8_t>(static_cast<std::uint8_t>(beats[2 * k] | (beats[2 * k + 1] << 4)));
    return out;
}

std::vector<std::int16_t> words_from_beats(const std::vector<std::uint8_t>& beats) {
    std::vector<std::int16_t> out(beats.size() / 4);
    for (std::size_t k = 0; k < out.size(); ++k) {
        std::uint16_t u = 0;
        for (int b = 0; b < 4; ++b) u |= static_cast<std::uint16_t>(beats[4 * k + b]) << (4 * b);
        out[k] = static_cast<std::int16_t>(u);
    }
    return out;
}

}  // namespace lstmgrid
