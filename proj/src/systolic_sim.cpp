#include "lstmgrid/systolic_sim.hpp"

#include <algorithm>
#include <bit>
#include <set>

namespace lstmgrid {

namespace {

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

std::string out_net_name(const DieId& d) { return d.name() + ".out"; }

std::string param_net_name(const Link& l, bool chip_select) {
    if (chip_select) return "host.p_G" + std::to_string(l.sinks.front().die.grid);
    return "host.p_" + l.sinks.front().die.name();
}

std::string port_key(const Endpoint& e, Port p) { return e.name() + "." + to_string(p); }

// The controller has a receiver per net, so only die ports are contended.
bool port_free(const std::set<std::string>& busy, const Endpoint& e, Port p) {
    return e.host || !busy.count(port_key(e, p));
}

}  // namespace

struct Die {
    DieId id;
    std::size_t layer = kNone;
    const DiePlacement* place = nullptr;
    std::array<std::vector<std::int8_t>, 4> wx, wh, b;
    std::array<std::vector<std::int8_t>, 3> wc;
    std::vector<std::int8_t> wy, by;
    std::vector<std::int8_t> x, h_in, c, h;
    std::vector<Acc16> partial;
    std::array<std::vector<Acc16>, 4> reduced;
    std::vector<Acc16> fc_partial;

    bool master() const { return place && place->role == DieRole::master; }
    std::size_t rows() const { return place->rows.size(); }

    void clear_state() {
        std::fill(x.begin(), x.end(), 0);
        std::fill(h_in.begin(), h_in.end(), 0);
        std::fill(c.begin(), c.end(), 0);
        std::fill(h.begin(), h.end(), 0);
    }
};

std::uint64_t compute_cycles(const LayerPlan& lp, const TileSpec& tile, bool truncate_h_loop) {
    return lp.x_tile + (truncate_h_loop ? lp.h_tile : std::max(lp.h_tile, tile.nh_capacity));
}

std::uint64_t stacked_overlap(const LayerPlan& prev, const LayerPlan& next) {
    return 2 * next.x_tile + (prev.n >= 2 ? 2 * prev.h_tile : 0);
}

namespace {

/// Parameter stream of one die: every gate's W_x then W_h tile, then on
/// masters the peephole vectors, biases and output-layer slice.
std::vector<std::int8_t> tile_bytes(const DiePlacement& d, const NetworkSpec& spec, const QNetworkParams& p) {
    const QLayerParams& lp = p.layers[d.layer];
    std::vector<std::int8_t> out;
    out.reserve(d.param_bytes);
    for (int g = 0; g < 4; ++g) {
        for (std::size_t r = d.rows.begin; r < d.rows.end; ++r)
            for (std::size_t k = d.x_cols.begin; k < d.x_cols.end; ++k) out.push_back(lp.w_x[g].codes(r, k));
        for (std::size_t r = d.rows.begin; r < d.rows.end; ++r)
            for (std::size_t k = d.h_cols.begin; k < d.h_cols.end; ++k) out.push_back(lp.w_h[g].codes(r, k));
    }
    if (d.role == DieRole::master) {
        if (spec.layers[d.layer].peephole)
            for (int k = 0; k < 3; ++k)
                for (std::size_t r = d.rows.begin; r < d.rows.end; ++r) out.push_back(lp.w_c[k].codes[r]);
        for (int g = 0; g < 4; ++g)
            for (std::size_t r = d.rows.begin; r < d.rows.end; ++r) out.push_back(lp.bias[g].codes[r]);
        if (d.holds_fc) {
            for (std::size_t o = 0; o < *spec.n_out; ++o)
                for (std::size_t r = d.rows.begin; r < d.rows.end; ++r) out.push_back(p.fc->w_y.codes(o, r));
            if (d.holds_fc_bias)
                for (std::size_t o = 0; o < *spec.n_out; ++o) out.push_back(p.fc->b_y.codes[o]);
        }
    }
    return out;
}

void install(Die& die, const DiePlacement& d, const NetworkSpec& spec, const std::vector<std::int8_t>& bytes) {
    if (bytes.size() != d.param_bytes) throw SimulationError("die " + d.die.name() + ": short parameter stream");
    die.layer = d.layer;
    die.place = &d;
    auto it = bytes.begin();
    const auto take = [&](std::size_t n) {
        std::vector<std::int8_t> v(it, it + static_cast<std::ptrdiff_t>(n));
        it += static_cast<std::ptrdiff_t>(n);
        return v;
    };
    const std::size_t rows = d.rows.size();
    for (int g = 0; g < 4; ++g) {
        die.wx[g] = take(rows * d.x_cols.size());
        die.wh[g] = take(rows * d.h_cols.size());
    }
    for (auto& v : die.wc) v.assign(rows, 0);
    for (auto& v : die.b) v.clear();
    die.wy.clear();
    die.by.clear();
    if (d.role == DieRole::master) {
        if (spec.layers[d.layer].peephole)
            for (auto& v : die.wc) v = take(rows);
        for (auto& v : die.b) v = take(rows);
        if (d.holds_fc) {
            die.wy = take(*spec.n_out * rows);
            if (d.holds_fc_bias) die.by = take(*spec.n_out);
        }
    }
    die.x.assign(d.x_cols.size(), 0);
    die.h_in.assign(d.h_cols.size(), 0);
    die.c.assign(d.role == DieRole::master ? rows : 0, 0);
    die.h.assign(die.c.size(), 0);
    die.partial.assign(rows, Acc16{});
}

}  // namespace

struct SystolicSim::Transfer {
    std::size_t net = 0;
    std::vector<std::uint8_t> beats;
    std::vector<std::pair<Endpoint, Port>> receivers;
    std::uint64_t ready_delay = 0;
    std::vector<std::uint8_t> delivered;

    bool started = false;
    bool done = false;
    std::uint64_t t0 = 0;
    std::size_t pos = 0;
};

SystolicSim::SystolicSim(GridPlan plan, SimOptions options)
    : plan_(std::move(plan)), options_(std::move(options)), luts_(plan_.spec.formats) {
    std::set<DieId> ids;
    for (const auto& d : plan_.dies) ids.insert(d.die);
    for (const auto& id : ids) {
        auto die = std::make_unique<Die>();
        die->id = id;
        trace_.all_dies.push_back(id);
        dies_.emplace(id, std::move(die));
    }
    const auto add_net = [&](const std::string& name, LinkKind kind, const Endpoint& driver,
                             const std::vector<Endpoint>& sinks) {
        auto it = net_index_.find(name);
        if (it == net_index_.end()) {
            it = net_index_.emplace(name, nets_.size()).first;
            nets_.push_back(Net{name, kind, driver, {}, {}, 0});
        }
        Net& n = nets_[it->second];
        for (const auto& s : sinks)
            if (std::find(n.sinks.begin(), n.sinks.end(), s) == n.sinks.end()) n.sinks.push_back(s);
    };
    for (const auto& id : ids) add_net(out_net_name(id), LinkKind::output, Endpoint{false, id}, {});
    for (const auto& l : plan_.links) {
        if (l.kind == LinkKind::param) {
            add_net(param_net_name(l, plan_.options.chip_select), LinkKind::param, l.source, l.sinks);
        } else {
            Net& n = nets_[net_index_.at(out_net_name(l.source.die))];
            if (n.sinks.empty()) n.kind = l.kind;
            for (const auto& s : l.sinks)
                if (std::find(n.sinks.begin(), n.sinks.end(), s) == n.sinks.end()) n.sinks.push_back(s);
        }
    }
    resident_.assign(plan_.layers.size(), kNone);
    if (options_.fault && !net_index_.count(options_.fault->net))
        throw ConfigError("fault: no net named '" + options_.fault->net + "'");
}

SystolicSim::~SystolicSim() = default;
SystolicSim::SystolicSim(SystolicSim&&) noexcept = default;
SystolicSim& SystolicSim::operator=(SystolicSim&&) noexcept = default;

Die& SystolicSim::die(const DieId& id) { return *dies_.at(id); }

const Net& SystolicSim::net(const std::string& name) const {
    const auto it = net_index_.find(name);
    if (it == net_index_.end()) throw ConfigError("no net named '" + name + "'");
    return nets_[it->second];
}

std::size_t SystolicSim::net_id(const std::string& name) const { return net_index_.at(name); }

void SystolicSim::clear_trace() {
    const auto dies = trace_.all_dies;
    trace_ = PhaseTrace{};
    trace_.all_dies = dies;
}

std::uint64_t SystolicSim::run_transfers(std::vector<Transfer>& transfers) {
    std::set<std::size_t> busy_nets;
    std::set<std::string> busy_ports;
    std::size_t remaining = 0;
    for (auto& t : transfers) {
        t.delivered.clear();
        t.delivered.reserve(t.beats.size());
        t.done = t.beats.empty();
        remaining += !t.done;
    }
    const Fault* fault = options_.fault ? &*options_.fault : nullptr;
    std::uint64_t cycle = 0;
    std::vector<Transfer*> finished;
    while (remaining > 0) {
        finished.clear();
        for (auto& t : transfers) {
            if (t.done) continue;
            Net& net = nets_[t.net];
            if (!t.started) {
                bool free = !busy_nets.count(t.net);
                for (const auto& [ep, port] : t.receivers) free = free && port_free(busy_ports, ep, port);
                if (!free) continue;
                busy_nets.insert(t.net);
                for (const auto& [ep, port] : t.receivers) busy_ports.insert(port_key(ep, port));
                t.started = true;
                t.t0 = cycle;
            }
            const bool stuck = fault && fault->kind == Fault::Kind::stuck_ready && fault->net == net.name;
            const bool ready = !stuck && cycle >= t.t0 + t.ready_delay;
            if (!ready) {
                if (cycle > t.t0 + t.ready_delay + options_.deadlock_cycles)
                    throw SimulationError("deadlock on link " + net.name + " -> " +
                                          port_key(t.receivers.front().first, t.receivers.front().second) +
                                          ": valid held for " + std::to_string(cycle - t.t0) +
                                          " cycles without ready");
                continue;
            }
            std::uint8_t beat = t.beats[t.pos];
            auto& c = net.counters;
            c.toggles += static_cast<std::uint64_t>(std::popcount(static_cast<unsigned>(net.last_beat ^ beat)));
            net.last_beat = beat;
            if (fault && fault->kind == Fault::Kind::bit_flip && fault->net == net.name && fault->beat == c.beats)
                beat ^= static_cast<std::uint8_t>(1u << fault->bit);
            c.beats += 1;
            c.driven_bits += 4;
            c.received_bits += 4 * t.receivers.size();
            c.active_cycles += 1;
            t.delivered.push_back(beat);
            if (++t.pos == t.beats.size()) finished.push_back(&t);
        }
        for (Transfer* t : finished) {
            t->done = true;
            --remaining;
            busy_nets.erase(t->net);
            for (const auto& [ep, port] : t->receivers) busy_ports.erase(port_key(ep, port));
        }
        ++cycle;
    }
    return cycle;
}

void SystolicSim::record(PhaseKind kind, std::size_t layer, int gate, int hop, std::uint64_t start,
                         std::uint64_t cycles, std::vector<DieId> active, const std::vector<Transfer>& transfers,
                         const std::vector<LinkCounters>& before) {
    PhaseRecord r;
    r.kind = kind;
    r.step = step_counter_;
    r.layer = layer;
    r.gate = gate;
    r.hop = hop;
    r.configuration = in_config_;
    r.start = start;
    r.end = start + cycles;
    for (const DiePlacement* d : plan_.layer_dies(layer)) r.dies.push_back(d->die);
    std::sort(active.begin(), active.end());
    active.erase(std::unique(active.begin(), active.end()), active.end());
    r.active = std::move(active);
    std::set<std::size_t> seen;
    for (const auto& t : transfers) {
        if (!seen.insert(t.net).second) continue;
        const Net& n = nets_[t.net];
        r.links.push_back({n.name, n.kind, n.counters - before[t.net]});
    }
    trace_.phases.push_back(std::move(r));
}

std::vector<LinkCounters> SystolicSim::snapshot() const {
    std::vector<LinkCounters> s;
    s.reserve(nets_.size());
    for (const auto& n : nets_) s.push_back(n.counters);
    return s;
}

void SystolicSim::transfer_phase(PhaseKind kind, std::size_t layer, int gate, int hop, std::vector<Transfer>& ts,
                                 std::vector<DieId> active, std::uint64_t& now) {
    const auto before = snapshot();
    const std::uint64_t cycles = run_transfers(ts);
    for (const auto& t : ts) {
        if (!nets_[t.net].driver.host) active.push_back(nets_[t.net].driver.die);
        for (const auto& [ep, port] : t.receivers)
            if (!ep.host) active.push_back(ep.die);
    }
    record(kind, layer, gate, hop, now, cycles, std::move(active), ts, before);
    now += cycles;
}

void SystolicSim::install_layer(std::size_t layer, std::uint64_t& now) {
    std::vector<Transfer> ts;
    std::vector<const DiePlacement*> places = plan_.layer_dies(layer);
    for (const DiePlacement* d : places) {
        Transfer t;
        t.net = param_net(d->die);
        t.beats = to_beats(tile_bytes(*d, plan_.spec, *host_params_));
        t.receivers = {{Endpoint{false, d->die}, Port::p}};
        ts.push_back(std::move(t));
    }
    const std::uint64_t start = now;
    transfer_phase(PhaseKind::param_load, layer, -1, -1, ts, {}, now);
    if (in_config_) trace_.config_cycles += now - start;
    for (std::size_t k = 0; k < places.size(); ++k)
        install(die(places[k]->die), *places[k], plan_.spec, bytes_from_beats(ts[k].delivered));
    resident_[plan_.layers[layer].grid] = layer;
}

std::size_t SystolicSim::param_net(const DieId& id) const {
    if (plan_.options.chip_select) return net_index_.at("host.p_G" + std::to_string(id.grid));
    return net_index_.at("host.p_" + id.name());
}

void SystolicSim::load_parameters(const QNetworkParams& params) {
    check_params(plan_.spec, params);
    host_params_ = params;
    in_config_ = true;
    std::uint64_t now = clock_;
    if (plan_.reload()) {
        if (plan_.layers.size() == 1) install_layer(0, now);
    } else {
        for (std::size_t l = 0; l < plan_.layers.size(); ++l) install_layer(l, now);
    }
    in_config_ = false;
    clock_ = now;
    loaded_ = true;
    reset_state();
}

void SystolicSim::reset_state() {
    for (auto& [id, d] : dies_) d->clear_state();
    host_state_.clear();
    for (const auto& l : plan_.spec.layers) host_state_.push_back(QState::zeros(l.n_hidden, plan_.spec.formats));
    step_index_ = 0;
}

void SystolicSim::load_features(std::size_t layer, const QVector& x, std::uint64_t& now) {
    std::vector<Transfer> ts;
    const auto places = plan_.layer_dies(layer);
    for (const DiePlacement* d : places) {
        Transfer t;
        t.net = param_net(d->die);
        t.beats = to_beats(std::vector<std::int8_t>(x.codes.begin() + static_cast<std::ptrdiff_t>(d->x_cols.begin),
                                                    x.codes.begin() + static_cast<std::ptrdiff_t>(d->x_cols.end)));
        t.receivers = {{Endpoint{false, d->die}, Port::p}};
        ts.push_back(std::move(t));
    }
    transfer_phase(PhaseKind::feature_load, layer, -1, -1, ts, {}, now);
    for (std::size_t k = 0; k < places.size(); ++k) die(places[k]->die).x = bytes_from_beats(ts[k].delivered);
}

void SystolicSim::handoff(std::size_t from, std::uint64_t& now) {
    const std::size_t to = from + 1;
    std::vector<Transfer> ts;
    std::vector<const DiePlacement*> senders;
    for (const DiePlacement* m : plan_.layer_dies(from)) {
        if (m->role != DieRole::master) continue;
        Transfer t;
        t.net = net_index_.at(out_net_name(m->die));
        t.beats = to_beats(die(m->die).h);
        for (const DiePlacement* d : plan_.layer_dies(to))
            if (d->x_cols.begin < m->rows.end && m->rows.begin < d->x_cols.end)
                t.receivers.push_back({Endpoint{false, d->die}, Port::p});
        senders.push_back(m);
        ts.push_back(std::move(t));
    }
    // Only the receiving grid is charged for this phase; the senders are
    // still inside their own window.
    const auto before = snapshot();
    const std::uint64_t cycles = run_transfers(ts);
    std::vector<DieId> active;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        const auto h = bytes_from_beats(ts[k].delivered);
        for (const auto& [ep, port] : ts[k].receivers) {
            active.push_back(ep.die);
            Die& d = die(ep.die);
            const DiePlacement& pl = *d.place;
            for (std::size_t r = senders[k]->rows.begin; r < senders[k]->rows.end; ++r)
                if (pl.x_cols.contains(r)) d.x[r - pl.x_cols.begin] = h[r - senders[k]->rows.begin];
        }
    }
    record(PhaseKind::handoff, to, -1, -1, now, cycles, std::move(active), ts, before);
    now += cycles;
}

void SystolicSim::load_state(std::size_t layer, std::uint64_t& now) {
    const QState& s = host_state_[layer];
    std::vector<Transfer> ts;
    const auto places = plan_.layer_dies(layer);
    for (const DiePlacement* d : places) {
        std::vector<std::int8_t> bytes(s.h.codes.begin() + static_cast<std::ptrdiff_t>(d->h_cols.begin),
                                       s.h.codes.begin() + static_cast<std::ptrdiff_t>(d->h_cols.end));
        if (d->role == DieRole::master)
            bytes.insert(bytes.end(), s.c.codes.begin() + static_cast<std::ptrdiff_t>(d->rows.begin),
                         s.c.codes.begin() + static_cast<std::ptrdiff_t>(d->rows.end));
        Transfer t;
        t.net = param_net(d->die);
        t.beats = to_beats(bytes);
        t.receivers = {{Endpoint{false, d->die}, Port::p}};
        ts.push_back(std::move(t));
    }
    transfer_phase(PhaseKind::state_load, layer, -1, -1, ts, {}, now);
    for (std::size_t k = 0; k < places.size(); ++k) {
        Die& d = die(places[k]->die);
        const auto bytes = bytes_from_beats(ts[k].delivered);
        const std::size_t nh = places[k]->h_cols.size();
        d.h_in.assign(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(nh));
        if (d.master()) d.c.assign(bytes.begin() + static_cast<std::ptrdiff_t>(nh), bytes.end());
    }
}

void SystolicSim::compute_layer(std::size_t layer, std::uint64_t& now) {
    const LayerPlan& lp = plan_.layers[layer];
    const FormatSet& f = plan_.spec.formats;
    const auto places = plan_.layer_dies(layer);
    std::vector<DieId> all;
    for (const DiePlacement* d : places) all.push_back(d->die);
    const std::uint64_t cc = compute_cycles(lp, plan_.tile, options_.truncate_h_loop);
    const int af = f.acc_frac();
    const std::size_t n = lp.n;

    for (int g = 0; g < 4; ++g) {
        for (const DiePlacement* pl : places) {
            Die& d = die(pl->die);
            const std::size_t xc = pl->x_cols.size(), hc = pl->h_cols.size();
            for (std::size_t r = 0; r < d.rows(); ++r) {
                Acc16 acc{0, af, false};
                for (std::size_t k = 0; k < xc; ++k)
                    acc = mac(acc, Q8{d.wx[g][r * xc + k], f.weight}, Q8{d.x[k], f.input});
                for (std::size_t k = 0; k < hc; ++k)
                    acc = mac(acc, Q8{d.wh[g][r * hc + k], f.weight}, Q8{d.h_in[k], f.input});
                d.partial[r] = acc;
            }
        }
        record(PhaseKind::compute, layer, g, -1, now, cc, all, {}, {});
        now += cc;

        for (std::size_t j = 0; j + 1 < n; ++j) {
            std::vector<Transfer> ts;
            for (std::size_t i = 0; i < n; ++i) {
                const DiePlacement& src = plan_.die(layer, i, j);
                Die& s = die(src.die);
                std::vector<std::int16_t> words;
                for (const auto& a : s.partial) words.push_back(a.value);
                Transfer t;
                t.net = net_index_.at(out_net_name(src.die));
                t.beats = to_beats(words);
                t.receivers = {{Endpoint{false, plan_.die(layer, i, j + 1).die}, Port::r}};
                t.ready_delay = options_.timing.c_hop;
                ts.push_back(std::move(t));
            }
            transfer_phase(PhaseKind::reduce, layer, g, static_cast<int>(j), ts, {}, now);
            for (std::size_t i = 0; i < n; ++i) {
                Die& dst = die(plan_.die(layer, i, j + 1).die);
                const auto words = words_from_beats(ts[i].delivered);
                for (std::size_t r = 0; r < dst.rows(); ++r)
                    dst.partial[r] = sat_add(Acc16{words[r], af, false}, dst.partial[r]);
            }
        }
        for (const DiePlacement* pl : places)
            if (pl->role == DieRole::master) die(pl->die).reduced[g] = die(pl->die).partial;
    }

    // Masters: peephole, bias, activation and the cell/hidden update.
    const bool peep = lp.peephole;
    std::vector<DieId> masters;
    for (const DiePlacement* pl : places) {
        if (pl->role != DieRole::master) continue;
        masters.push_back(pl->die);
        Die& d = die(pl->die);
        for (std::size_t r = 0; r < d.rows(); ++r) {
            const auto gate = [&](int g, std::int8_t c_term, const Lut256& lut) {
                Acc16 acc = d.reduced[g][r];
                if (peep && g != 2) acc = mac(acc, Q8{d.wc[g == 3 ? 2 : g][r], f.peephole}, Q8{c_term, f.cell});
                acc = add_aligned(acc, Q8{d.b[g][r], f.bias});
                return lut.apply(requantize(acc, f.gate_pre));
            };
            const Q8 ig = gate(0, d.c[r], luts_.sigmoid);
            const Q8 fg = gate(1, d.c[r], luts_.sigmoid);
            const Q8 cand = gate(2, 0, luts_.tanh);
            const Acc16 keep = product(fg, Q8{d.c[r], f.cell});
            const Acc16 write = rescale(product(ig, cand), keep.frac_bits);
            const Q8 c_new = requantize(sat_add(keep, write), f.cell);
            const Q8 og = gate(3, c_new.code, luts_.sigmoid);
            d.c[r] = c_new.code;
            d.h[r] = requantize(product(og, luts_.tanh.apply(c_new)), f.input).code;
        }
    }
    record(PhaseKind::activate, layer, -1, -1, now, options_.timing.c_fixed, masters, {}, {});
    now += options_.timing.c_fixed;
}

void SystolicSim::distribute(std::size_t layer, std::uint64_t& now) {
    const LayerPlan& lp = plan_.layers[layer];
    const std::size_t n = lp.n;
    if (n == 1) {
        Die& m = die(plan_.die(layer, 0, 0).die);
        m.h_in = m.h;
        return;
    }
    // The bottom-right master shares its tile with the master column.
    {
        const DiePlacement& src = plan_.die(layer, n - 1, n - 1);
        Die& s = die(src.die);
        s.h_in = s.h;
        std::vector<Transfer> ts(1);
        ts[0].net = net_index_.at(out_net_name(src.die));
        ts[0].beats = to_beats(s.h);
        for (std::size_t i = 0; i + 1 < n; ++i) ts[0].receivers.push_back({Endpoint{false, plan_.die(layer, i, n - 1).die}, Port::h});
        transfer_phase(PhaseKind::distribute, layer, -1, 0, ts, {}, now);
        const auto h = bytes_from_beats(ts[0].delivered);
        for (std::size_t i = 0; i + 1 < n; ++i) die(plan_.die(layer, i, n - 1).die).h_in = h;
    }
    // Each other master broadcasts its tile down the column that consumes it.
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const DiePlacement& src = plan_.die(layer, j, n - 1);
        std::vector<Transfer> ts(1);
        ts[0].net = net_index_.at(out_net_name(src.die));
        ts[0].beats = to_beats(die(src.die).h);
        for (std::size_t i = 0; i < n; ++i) ts[0].receivers.push_back({Endpoint{false, plan_.die(layer, i, j).die}, Port::h});
        transfer_phase(PhaseKind::distribute, layer, -1, static_cast<int>(j + 1), ts, {}, now);
        const auto h = bytes_from_beats(ts[0].delivered);
        for (std::size_t i = 0; i < n; ++i) die(plan_.die(layer, i, j).die).h_in = h;
    }
}

QVector SystolicSim::output_layer(std::uint64_t& now) {
    const std::size_t layer = plan_.layers.size() - 1;
    const LayerPlan& lp = plan_.layers[layer];
    const FormatSet& f = plan_.spec.formats;
    const std::size_t n_out = *plan_.spec.n_out;
    const int af = f.acc_frac();
    std::vector<DieId> masters;
    for (std::size_t i = 0; i < lp.n; ++i) {
        const DiePlacement& pl = plan_.die(layer, i, lp.n - 1);
        masters.push_back(pl.die);
        Die& d = die(pl.die);
        d.fc_partial.assign(n_out, Acc16{0, af, false});
        for (std::size_t o = 0; o < n_out; ++o)
            for (std::size_t k = 0; k < d.rows(); ++k)
                d.fc_partial[o] = mac(d.fc_partial[o], Q8{d.wy[o * d.rows() + k], f.weight}, Q8{d.h[k], f.input});
    }
    const std::uint64_t cc = options_.truncate_h_loop ? lp.h_tile : std::max(lp.h_tile, plan_.tile.nh_capacity);
    record(PhaseKind::fc_compute, layer, -1, -1, now, cc, masters, {}, {});
    now += cc;

    Die& root = die(masters.front());
    for (std::size_t m = 1; m < lp.n; ++m) {
        std::vector<std::int16_t> words;
        for (const auto& a : die(masters[m]).fc_partial) words.push_back(a.value);
        std::vector<Transfer> ts(1);
        ts[0].net = net_index_.at(out_net_name(masters[m]));
        ts[0].beats = to_beats(words);
        ts[0].receivers = {{Endpoint{false, masters.front()}, Port::h}};
        ts[0].ready_delay = options_.timing.c_hop;
        transfer_phase(PhaseKind::fc_reduce, layer, -1, static_cast<int>(m - 1), ts, {}, now);
        const auto got = words_from_beats(ts[0].delivered);
        for (std::size_t o = 0; o < n_out; ++o) root.fc_partial[o] = sat_add(root.fc_partial[o], Acc16{got[o], af, false});
    }
    std::vector<std::int8_t> y(n_out);
    for (std::size_t o = 0; o < n_out; ++o) {
        const Acc16 acc = add_aligned(root.fc_partial[o], Q8{root.by[o], f.bias});
        y[o] = luts_.sigmoid.apply(requantize(acc, f.gate_pre)).code;
    }
    std::vector<Transfer> ts(1);
    ts[0].net = net_index_.at(out_net_name(masters.front()));
    ts[0].beats = to_beats(y);
    ts[0].receivers = {{Endpoint::external(), Port::p}};
    transfer_phase(PhaseKind::write_back, layer, -1, -1, ts, {}, now);
    return QVector(f.gate_out, bytes_from_beats(ts[0].delivered));
}

QState SystolicSim::write_back(std::size_t layer, PhaseKind kind, bool with_cell, std::uint64_t& now) {
    const LayerPlan& lp = plan_.layers[layer];
    const FormatSet& f = plan_.spec.formats;
    std::vector<Transfer> ts;
    std::vector<const DiePlacement*> masters;
    for (std::size_t i = 0; i < lp.n; ++i) {
        const DiePlacement& pl = plan_.die(layer, i, lp.n - 1);
        masters.push_back(&pl);
        std::vector<std::int8_t> bytes = die(pl.die).h;
        if (with_cell) bytes.insert(bytes.end(), die(pl.die).c.begin(), die(pl.die).c.end());
        Transfer t;
        t.net = net_index_.at(out_net_name(pl.die));
        t.beats = to_beats(bytes);
        t.receivers = {{Endpoint::external(), Port::p}};
        ts.push_back(std::move(t));
    }
    transfer_phase(kind, layer, -1, -1, ts, {}, now);
    QState s = QState::zeros(lp.n_hidden, f);
    for (std::size_t k = 0; k < masters.size(); ++k) {
        const auto bytes = bytes_from_beats(ts[k].delivered);
        const std::size_t rows = masters[k]->rows.size();
        std::copy(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(rows),
                  s.h.codes.begin() + static_cast<std::ptrdiff_t>(masters[k]->rows.begin));
        if (with_cell)
            std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(rows), bytes.end(),
                      s.c.codes.begin() + static_cast<std::ptrdiff_t>(masters[k]->rows.begin));
    }
    return s;
}

QVector SystolicSim::read_hidden(std::size_t layer) {
    const LayerPlan& lp = plan_.layers[layer];
    QVector h(plan_.spec.formats.input, lp.n_hidden);
    for (std::size_t i = 0; i < lp.n; ++i) {
        const DiePlacement& pl = plan_.die(layer, i, lp.n - 1);
        std::copy(die(pl.die).h.begin(), die(pl.die).h.end(),
                  h.codes.begin() + static_cast<std::ptrdiff_t>(pl.rows.begin));
    }
    return h;
}

QVector SystolicSim::step(const QVector& x) {
    if (!loaded_) throw ConfigError("systolic_sim: parameters not loaded");
    const FormatSet& f = plan_.spec.formats;
    if (x.size() != plan_.spec.n_in() || !(x.format == f.input))
        throw ConfigError("systolic_sim: input must be " + std::to_string(plan_.spec.n_in()) + " codes in " +
                          f.input.name());
    const std::size_t last = plan_.layers.size() - 1;
    const bool fc = plan_.spec.n_out.has_value() && options_.write_back;
    const std::uint64_t start = clock_;
    std::uint64_t end = start;
    QVector out;

    if (!plan_.reload()) {
        std::uint64_t prev_end = start;
        for (std::size_t l = 0; l <= last; ++l) {
            std::uint64_t now = start;
            if (l == 0) {
                load_features(0, x, now);
            } else {
                now = prev_end - stacked_overlap(plan_.layers[l - 1], plan_.layers[l]);
                handoff(l - 1, now);
            }
            compute_layer(l, now);
            distribute(l, now);
            if (l == last) {
                if (fc)
                    out = output_layer(now);
                else if (options_.write_back)
                    out = write_back(l, PhaseKind::write_back, false, now).h;
                else
                    out = read_hidden(l);
            }
            prev_end = now;
            end = std::max(end, now);
        }
    } else {
        const bool spill = plan_.layers.size() > 1;
        std::uint64_t now = start;
        QVector input = x;
        for (std::size_t l = 0; l <= last; ++l) {
            if (spill) {
                install_layer(l, now);
                if (l > 0 || step_index_ > 0) load_state(l, now);
            }
            load_features(l, input, now);
            compute_layer(l, now);
            distribute(l, now);
            if (spill) {
                host_state_[l] = write_back(l, PhaseKind::state_store, true, now);
                input = host_state_[l].h;
            }
            if (l == last) {
                if (fc)
                    out = output_layer(now);
                else if (spill)
                    out = input;
                else if (options_.write_back)
                    out = write_back(l, PhaseKind::write_back, false, now).h;
                else
                    out = read_hidden(l);
            }
        }
        end = now;
    }
    trace_.steps.push_back({step_counter_, start, end});
    ++step_counter_;
    ++step_index_;
    clock_ = end;
    return out;
}

QMatrix SystolicSim::run_sequence(const QMatrix& features) {
    const FormatSet& f = plan_.spec.formats;
    const bool fc = plan_.spec.n_out.has_value() && options_.write_back;
    QMatrix out(fc ? f.gate_out : f.input, features.rows(), plan_.spec.output_width());
    if (!fc) out = QMatrix(f.input, features.rows(), plan_.spec.layers.back().n_hidden);
    reset_state();
    for (std::size_t t = 0; t < features.rows(); ++t) {
        const QVector x(features.format,
                        std::vector<std::int8_t>(features.codes.row(t).begin(), features.codes.row(t).end()));
        const QVector y = step(x);
        std::copy(y.codes.begin(), y.codes.end(), out.codes.row(t).begin());
    }
    return out;
}

QMatrix run_reload(SystolicSim& sim, const QNetworkParams& params, const QMatrix& features) {
    if (!sim.plan().reload()) throw ConfigError("run_reload: plan is not in reload mode");
    sim.load_parameters(params);
    return sim.run_sequence(features);
}

}  // namespace lstmgrid
