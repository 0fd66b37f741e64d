#include <set>
#include <tuple>

#include "doctest.h"
#include "lstmgrid/mapper.hpp"

using namespace lstmgrid;

TEST_CASE("grid sizing") {
    CHECK(plan_grid(NetworkSpec::uniform(1, 192, 192)).total_dies == 4);
    CHECK(plan_grid(NetworkSpec::uniform(1, 96, 96)).total_dies == 1);
    CHECK(plan_grid(NetworkSpec::uniform(3, 384, 384)).total_dies == 48);
    CHECK(plan_grid(NetworkSpec::uniform(3, 480, 480)).total_dies == 75);
    CHECK(plan_grid(NetworkSpec::uniform(3, 480, 480), {}, {.reload = true}).total_dies == 25);
    CHECK(plan_grid(NetworkSpec::uniform(2, 192, 192), {}, {.reload = true}).total_dies == 4);
    const auto p = plan_grid(NetworkSpec::uniform(1, 56, 56));
    CHECK(p.layers[0].n == 1);
    CHECK(p.layers[0].h_tile == 56);
}

TEST_CASE("memory footprint") {
    CHECK(memory_footprint(96, 96, true) == 74400);
    CHECK(memory_footprint(96, 96, true) <= TileSpec{}.sram_bytes);
    CHECK(memory_footprint(0, 0, true) == 0);
    CHECK(memory_footprint(96, 96, false) == 74400 - 288);
    CHECK(memory_footprint(62, 96, true, 62) == 4 * 96 * 158 + 288 + 384 + 62 * 96 + 62);
    std::size_t prev = 0;
    for (std::size_t k = 1; k < 200; ++k) {
        const std::size_t v = memory_footprint(k, k, true, k);
        CHECK(v > prev);
        CHECK(memory_footprint(k + 1, k, true) > memory_footprint(k, k, true));
        prev = v;
    }
}

TEST_CASE("capacity violation names the die") {
    try {
        plan_grid(NetworkSpec::uniform(1, 96, 200));
        FAIL("expected a constraint error");
    } catch (const ConstraintError& e) {
        CHECK(std::string(e.what()).find("G0(0,0)") != std::string::npos);
        CHECK(std::string(e.what()).find("86016") != std::string::npos);
    }
    CHECK_THROWS_AS(plan_grid(NetworkSpec::uniform(1, 96, 96, 97)), ConstraintError);
}

TEST_CASE("pin budget") {
    const auto p2 = plan_grid(NetworkSpec::uniform(1, 192, 192));
    CHECK(pin_budget(p2).total_min == 29);
    CHECK(pin_budget(p2, true).total_time_multiplexed == 17);
    CHECK(pin_budget(plan_grid(NetworkSpec::uniform(1, 96, 96))).total_min == 17);
    for (std::size_t nh : {96, 192, 288, 384, 480})
        CHECK(pin_budget(plan_grid(NetworkSpec::uniform(3, nh, nh)), true).total_time_multiplexed == 17);
    const auto p3 = plan_grid(NetworkSpec::uniform(1, 288, 288), {}, {.n_inp_layer = 9});
    CHECK(pin_budget(p3).total_min == 5 + 6 * 9 + 6 * 3);
}

TEST_CASE("roles, links and tiling completeness") {
    for (const auto& [layers, nh, ni, nout] : std::vector<std::tuple<int, int, int, int>>{
             {1, 192, 123, 62}, {2, 288, 100, 0}, {1, 20, 7, 0}, {3, 30, 11, 5}}) {
        auto spec = NetworkSpec::uniform(layers, nh, ni, nout ? std::optional<std::size_t>(nout) : std::nullopt);
        for (bool reload : {false, true}) {
            TileSpec tile;
            tile.nh_capacity = nh > 96 ? 96 : 8;
            const auto plan = plan_grid(spec, tile, {.reload = reload});
            for (const auto& lp : plan.layers) {
                const auto dies = plan.layer_dies(lp.layer);
                CHECK(dies.size() == lp.n * lp.n);
                std::size_t masters = 0;
                std::set<std::pair<std::size_t, std::size_t>> wx, wh;
                for (const auto* d : dies) {
                    CHECK((d->role == DieRole::master) == (d->die.col + 1 == lp.n));
                    masters += d->role == DieRole::master;
                    CHECK(d->footprint_bytes <= tile.sram_bytes);
                    for (std::size_t r = d->rows.begin; r < d->rows.end; ++r) {
                        for (std::size_t c = d->x_cols.begin; c < d->x_cols.end; ++c) CHECK(wx.insert({r, c}).second);
                        for (std::size_t c = d->h_cols.begin; c < d->h_cols.end; ++c) CHECK(wh.insert({r, c}).second);
                    }
                }
                CHECK(masters == lp.n);
                CHECK(wx.size() == lp.n_hidden * lp.n_in);
                CHECK(wh.size() == lp.n_hidden * lp.n_hidden);
                std::size_t red = 0;
                for (const auto& l : plan.links)
                    if (l.layer == lp.layer && l.kind == LinkKind::reduction) {
                        ++red;
                        REQUIRE(l.sinks.size() == 1);
                        CHECK(l.sinks[0].die.row == l.source.die.row);
                        CHECK(l.sinks[0].die.col == l.source.die.col + 1);
                    }
                CHECK(red == lp.n * (lp.n - 1));
            }
        }
    }
}

TEST_CASE("padding is reported") {
    const auto plan = plan_grid(NetworkSpec::uniform(1, 192, 123, 62));
    CHECK(plan.layers[0].x_tile == 62);
    CHECK(plan.layers[0].x_padding == 1);
    CHECK(plan.layers[0].h_padding == 0);
    CHECK(plan.die(0, 1, 1).x_cols.size() == 61);
    CHECK(plan.die(0, 0, 1).holds_fc_bias);
    CHECK_FALSE(plan.die(0, 1, 1).holds_fc_bias);
}

TEST_CASE("reload schedule") {
    const auto one = reload_schedule(NetworkSpec::uniform(1, 96, 96), {}, true);
    REQUIRE(one.size() == 1);
    CHECK(one[0].state_in_bytes == 0);
    CHECK(one[0].state_out_bytes == 0);
    CHECK(one[0].param_bytes == 74400);
    CHECK(reload_schedule(NetworkSpec::uniform(1, 96, 96), {}, false)[0].param_bytes == 0);

    const auto two = reload_schedule(NetworkSpec::uniform(2, 96, 96), {}, true);
    REQUIRE(two.size() == 2);
    CHECK(two[0].state_in_bytes == 0);
    CHECK(two[1].state_in_bytes == 2 * 96);
    CHECK(two[1].param_bytes == 74400);
    CHECK(two[1].state_out_bytes == 2 * 96);

    const auto big = plan_grid(NetworkSpec::uniform(2, 192, 192), {}, {.reload = true});
    CHECK(big.total_dies == 4);
    const auto s = reload_schedule(big, false);
    CHECK(s[0].state_in_bytes == 4 * 96 + 2 * 96);
    CHECK(s[1].feature_bytes == 4 * 96);
}

TEST_CASE("plan serialization") {
    const auto plan = plan_grid(NetworkSpec::uniform(1, 192, 192));
    const std::string js = plan_to_json(plan);
    CHECK(js.find("\"total_dies\": 4") != std::string::npos);
    CHECK(js.find("\"total_time_multiplexed\": 17") != std::string::npos);
    CHECK(plan_summary(plan).find("2x2, 4 dies") != std::string::npos);
    CHECK(plan_to_json(plan) == js);
}
