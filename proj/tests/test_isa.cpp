#include "doctest.h"

#include <stdexcept>

#include <random>

#include "ianus/isa.hpp"

using namespace ianus;

namespace {
Command macro_cmd(int64_t n_tokens = 1, bool gelu = false) {
    Command m;
    m.kind = CmdKind::PIM_MACRO;
    m.pim_op = gelu ? PimOp::fc_gelu : PimOp::fc;
    m.op.n_tokens = n_tokens;
    return m;
}
} // namespace

TEST_CASE("topo_validate") {
    CHECK_FALSE(topo_validate({}).has_value()); // empty stream is fine

    std::vector<Command> cyc(2);
    cyc[0].id = 1;
    cyc[0].deps = {2};
    cyc[1].id = 2;
    cyc[1].deps = {1};
    auto rep = topo_validate(cyc);
    REQUIRE(rep.has_value());
    CHECK(rep->ids.size() == 2);

    std::vector<Command> chain(3);
    chain[0].id = 1;
    chain[1].id = 2;
    chain[1].deps = {1};
    chain[2].id = 3;
    chain[2].deps = {1, 2};
    CHECK_FALSE(topo_validate(chain).has_value());

    // deps outside the stream count as satisfied
    std::vector<Command> ext(1);
    ext[0].id = 5;
    ext[0].deps = {99};
    CHECK_FALSE(topo_validate(ext).has_value());
}

TEST_CASE("expand_macro: one 128x1024 tile broadcasts one ACT, 64 MAC bursts, drain, precharge") {
    HardwareConfig hw = builtin_hardware();
    TileMap tm = tile_weight_matrix("w", 128, 1024, hw);
    MicroStream s = expand_macro(macro_cmd(), tm, hw);
    CHECK(s.broadcast);
    CHECK(s.count(MicroKind::ACT_ALL_BANKS) == 1);
    CHECK(s.count(MicroKind::MAC_ALL_BANKS) == 64); // 1024 / 16 BF16 per burst
    CHECK(s.count(MicroKind::READ_ACC) == 1);
    CHECK(s.count(MicroKind::PRECHARGE_ALL) == 1);
    CHECK(s.count(MicroKind::WRITE_GB) == 64); // 2 KB vector in 32 B segments
    CHECK(s.count(MicroKind::ACT_FUNC) == 0);
}

TEST_CASE("expand_macro: fc_gelu inserts ACT_FUNC before the accumulator drain") {
    HardwareConfig hw = builtin_hardware();
    TileMap tm = tile_weight_matrix("w", 128, 1024, hw);
    MicroStream s = expand_macro(macro_cmd(1, true), tm, hw);
    CHECK(s.count(MicroKind::ACT_FUNC) == 1);
    int64_t af = -1, ra = -1;
    for (size_t i = 0; i < s.cmds.size(); ++i) {
        if (s.cmds[i].kind == MicroKind::ACT_FUNC) af = static_cast<int64_t>(i);
        if (s.cmds[i].kind == MicroKind::READ_ACC) ra = static_cast<int64_t>(i);
    }
    CHECK(af >= 0);
    CHECK(af == ra - 1);
}

TEST_CASE("expand_macro: empty map rejected") {
    HardwareConfig hw = builtin_hardware();
    TileMap tm;
    tm.matrix_id = "broken";
    tm.channels = {0};
    CHECK_THROWS_WITH_AS(expand_macro(macro_cmd(), tm, hw), doctest::Contains("empty tile map"),
                         std::runtime_error);
}

TEST_CASE("expand_macro: global buffer reused across row groups only for single-segment inputs") {
    HardwareConfig hw = builtin_hardware();
    // K = 1024: one segment, loaded once per token
    TileMap a = tile_weight_matrix("a", 1024, 1024, hw);
    MicroStream sa = expand_macro(macro_cmd(), a, hw);
    CHECK(sa.count(MicroKind::WRITE_GB) == 64);
    CHECK(sa.count(MicroKind::ACT_ALL_BANKS) == 8);
    CHECK(sa.count(MicroKind::MAC_ALL_BANKS) == 8 * 64);
    CHECK(sa.count(MicroKind::READ_ACC) == 8);

    // K = 1536: two column tiles, every row group rewrites both segments
    TileMap b = tile_weight_matrix("b", 256, 1536, hw);
    MicroStream sb = expand_macro(macro_cmd(), b, hw);
    CHECK(sb.count(MicroKind::WRITE_GB) == 2 * (64 + 32));
    CHECK(sb.count(MicroKind::ACT_ALL_BANKS) == 4);
    CHECK(sb.count(MicroKind::READ_ACC) == 2); // one drain per row group
    CHECK(sb.count(MicroKind::PRECHARGE_ALL) == 4);
}

TEST_CASE("expand_macro: token repetition multiplies the stream") {
    HardwareConfig hw = builtin_hardware();
    TileMap tm = tile_weight_matrix("w", 256, 1024, hw);
    MicroStream one = expand_macro(macro_cmd(1), tm, hw);
    MicroStream three = expand_macro(macro_cmd(3), tm, hw);
    CHECK(three.cmds.size() == 3 * one.cmds.size());
    CHECK(three.count(MicroKind::WRITE_GB) == 3 * one.count(MicroKind::WRITE_GB));
}

TEST_CASE("expand_macro properties on random shapes") {
    HardwareConfig hw = builtin_hardware();
    std::mt19937 rng(11);
    std::uniform_int_distribution<int64_t> rows(1, 3000), cols(1, 5000);
    for (int trial = 0; trial < 60; ++trial) {
        const int64_t r = rows(rng), c = cols(rng);
        TileMap tm = tile_weight_matrix("w", r, c, hw);
        MicroStream s = expand_macro(macro_cmd(), tm, hw);

        // drains: one per row group
        CHECK(s.count(MicroKind::READ_ACC) == ceil_div(r, hw.rows_per_tile()));
        // MAC bursts per tile = ceil(tile_cols / 16)
        int64_t expect_macs = 0;
        for (int64_t ct = 0; ct < tm.col_tiles(); ++ct) {
            expect_macs += tm.row_tiles() * ceil_div(tm.tile_cols(ct), 16);
        }
        CHECK(s.count(MicroKind::MAC_ALL_BANKS) == expect_macs);

        // no interleaving of tiles: every MAC lands on the row opened by the
        // nearest preceding ACT, and each ACT..PRE window closes before the
        // next opens
        int64_t open_row = -1;
        for (const auto& mc : s.cmds) {
            if (mc.kind == MicroKind::ACT_ALL_BANKS) {
                CHECK(open_row == -1);
                open_row = mc.row;
            } else if (mc.kind == MicroKind::MAC_ALL_BANKS) {
                CHECK(mc.row == open_row);
            } else if (mc.kind == MicroKind::PRECHARGE_ALL) {
                CHECK(open_row == mc.row);
                open_row = -1;
            }
        }
        CHECK(open_row == -1);
    }
}

TEST_CASE("single-channel head placement expands to a unicast stream") {
    HardwareConfig hw = builtin_hardware();
    TileMap tm = tile_weight_matrix_on("head", 64, 1024, hw, {3});
    CHECK(tm.rows_per_tile == 16);
    MicroStream s = expand_macro(macro_cmd(), tm, hw);
    CHECK_FALSE(s.broadcast);
    CHECK(s.channels == std::vector<int32_t>{3});
    CHECK(s.count(MicroKind::ACT_ALL_BANKS) == 4); // 64 rows / 16 banks
    for (const auto& mc : s.cmds) CHECK(mc.channel == 3);
}
