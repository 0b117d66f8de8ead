#include "doctest.h"

#include <stdexcept>

#include <random>

#include "ianus/pim.hpp"
#include "ianus/trace.hpp"
#include "oracles.hpp"

using namespace ianus;

namespace {
Command fc_macro(int64_t n = 1, bool gelu = false) {
    Command m;
    m.kind = CmdKind::PIM_MACRO;
    m.pim_op = gelu ? PimOp::fc_gelu : PimOp::fc;
    m.op.n_tokens = n;
    return m;
}
} // namespace

TEST_CASE("bank timing: ACT to RD honors tRCDRD exactly") {
    HardwareConfig hw = builtin_hardware();
    ChannelState ch(hw, 0);
    MemCommand act{MemKind::ACT, 0, 0, 7, 0};
    ch.issue(act, 0);
    MemCommand rd{MemKind::RD, 0, 0, 7, 3};
    // one DRAM clock before the boundary: held
    CHECK(ch.earliest_issue(rd, 0) == ns_to_ps(36.0));
    CHECK_THROWS(ch.issue(rd, ns_to_ps(36.0) - hw.timing.tck_ps()));
    CHECK_NOTHROW(ch.issue(rd, ns_to_ps(36.0)));
}

TEST_CASE("bank timing: write recovery blocks precharge until tWR") {
    HardwareConfig hw = builtin_hardware();
    ChannelState ch(hw, 0);
    ch.issue({MemKind::ACT, 0, 2, 1, 0}, 0);
    const time_ps wr_t = ns_to_ps(24.0); // tRCDWR
    ch.issue({MemKind::WR, 0, 2, 1, 0}, wr_t);
    MemCommand pre{MemKind::PRE, 0, 2, 1, 0};
    CHECK(ch.earliest_issue(pre, wr_t) == wr_t + ns_to_ps(36.0)); // + tWR
    CHECK_THROWS(ch.issue(pre, wr_t + ns_to_ps(35.0)));
    CHECK_NOTHROW(ch.issue(pre, wr_t + ns_to_ps(36.0)));
    // and tRP gates the next ACT
    MemCommand act2{MemKind::ACT, 0, 2, 5, 0};
    CHECK(ch.earliest_issue(act2, 0) == wr_t + ns_to_ps(36.0) + ns_to_ps(30.0));
}

TEST_CASE("column commands pace at tCCD") {
    HardwareConfig hw = builtin_hardware();
    ChannelState ch(hw, 0);
    ch.issue({MemKind::ACT, 0, 0, 1, 0}, 0);
    const time_ps t0 = ns_to_ps(36.0);
    ch.issue({MemKind::RD, 0, 0, 1, 0}, t0);
    MemCommand rd2{MemKind::RD, 0, 0, 1, 1};
    CHECK(ch.earliest_issue(rd2, t0) == t0 + ns_to_ps(1.0));
}

TEST_CASE("tRAS from Table values is honored verbatim even though it is below tRCDRD") {
    HardwareConfig hw = builtin_hardware();
    CHECK(hw.timing.tRAS_ns < hw.timing.tRCDRD_ns);
    ChannelState ch(hw, 0);
    ch.issue({MemKind::ACT, 0, 0, 1, 0}, 0);
    // PRE legal at tRAS = 21 ns, before a read would even be legal
    MemCommand pre{MemKind::PRE, 0, 0, 1, 0};
    CHECK(ch.earliest_issue(pre, 0) == ns_to_ps(21.0));
}

TEST_CASE("pu_mac arithmetic: FLOPs per burst") {
    HardwareConfig hw = builtin_hardware();
    // one burst: 16 PUs x 16 BF16 MACs = 512 FLOPs per channel, 4096 over an
    // 8-channel broadcast
    const int64_t flops_per_channel_burst =
        hw.banks_per_channel * hw.elems_per_column(2) * 2;
    CHECK(flops_per_channel_burst == 512);
    CHECK(flops_per_channel_burst * hw.pim_compute_channels == 4096);
    // a full 1024-element row takes 64 bursts per bank
    CHECK(ceil_div(hw.cols_per_dram_row(2), hw.elems_per_column(2)) == 64);
}

TEST_CASE("sustained MAC stream approaches the per-chip peak within 10%") {
    HardwareConfig hw = builtin_hardware();
    std::vector<MicroPimCommand> cmds;
    cmds.push_back({MicroKind::ACT_ALL_BANKS, kBroadcastChannel, 0, 0});
    const int64_t bursts = 100000;
    for (int64_t i = 0; i < bursts; ++i) {
        cmds.push_back({MicroKind::MAC_ALL_BANKS, kBroadcastChannel, 0, i % 64});
    }
    cmds.push_back({MicroKind::READ_ACC, kBroadcastChannel, 0, 0});
    cmds.push_back({MicroKind::PRECHARGE_ALL, kBroadcastChannel, 0, 0});
    ChannelState ch(hw, 0);
    MacroResult r = ch.run_micro_stream(cmds, 0);
    const double secs = static_cast<double>(r.end) * 1e-12;
    const double flops_chip = static_cast<double>(bursts) * 512.0 * hw.channels_per_chip;
    const double sustained = flops_chip / secs;
    CHECK(sustained > 0.9 * 1.024e12);
    CHECK(sustained <= 1.024e12);
}

TEST_CASE("macro timing equals the independent micro-command oracle") {
    HardwareConfig hw = builtin_hardware();
    for (auto [rows, cols] : {std::pair<int64_t, int64_t>{128, 256},
                              {128, 1024},
                              {1024, 1024},
                              {1536, 6144},
                              {300, 1100}}) {
        TileMap tm = tile_weight_matrix("w", rows, cols, hw);
        Command m = fc_macro();
        MicroStream s = expand_macro(m, tm, hw);
        ChannelState ch(hw, 0);
        const time_ps sim = ch.run_micro_stream(s.cmds, 0).end;
        const time_ps ref = oracle::pim_macro_duration(s.cmds, hw);
        CHECK(sim == ref);
    }
}

TEST_CASE("macro timing matches the oracle on random shapes, tokens, and gelu") {
    HardwareConfig hw = builtin_hardware();
    std::mt19937 rng(23);
    std::uniform_int_distribution<int64_t> rows(1, 2500), cols(1, 4200), toks(1, 3);
    for (int trial = 0; trial < 40; ++trial) {
        TileMap tm = tile_weight_matrix("w", rows(rng), cols(rng), hw);
        Command m = fc_macro(toks(rng), trial % 2 == 0);
        MicroStream s = expand_macro(m, tm, hw);
        ChannelState ch(hw, 0);
        CHECK(ch.run_micro_stream(s.cmds, 0).end == oracle::pim_macro_duration(s.cmds, hw));
    }
}

TEST_CASE("macro execution leaves the channel ready for an immediate successor") {
    HardwareConfig hw = builtin_hardware();
    TileMap tm = tile_weight_matrix("w", 256, 1024, hw);
    Command m = fc_macro();
    MicroStream s = expand_macro(m, tm, hw);
    ChannelState ch(hw, 0);
    const time_ps end1 = ch.run_micro_stream(s.cmds, 0).end;
    const time_ps end2 = ch.run_micro_stream(s.cmds, end1).end;
    CHECK(end2 - end1 == end1); // identical duration back to back
}

TEST_CASE("executed macro streams pass the trace validator") {
    HardwareConfig hw = builtin_hardware();
    TileMap tm = tile_weight_matrix("w", 512, 1536, hw);
    Command m = fc_macro(2, true);
    MicroStream s = expand_macro(m, tm, hw);
    TraceValidator v(hw);
    ChannelState ch(hw, kBroadcastChannel);
    ch.run_micro_stream(s.cmds, 0,
                        [&](time_ps t, int32_t chn, int32_t bank, const char* kind, int64_t row,
                            int64_t col) { v.observe(t, chn, bank, kind, row, col); });
    CHECK(v.violations().empty());
    CHECK(v.records_checked() > 0);
}

TEST_CASE("trace validator flags early and illegal commands") {
    HardwareConfig hw = builtin_hardware();
    TraceValidator v(hw);
    v.observe(0, 0, 0, "ACT", 5, 0);
    v.observe(ns_to_ps(10.0), 0, 0, "RD", 5, 0); // tRCDRD = 36 ns not elapsed
    CHECK(v.violations().size() == 1);

    TraceValidator v2(hw);
    v2.observe(0, 0, 0, "RD", 5, 0); // row never opened
    CHECK(v2.violations().size() == 1);

    TraceValidator v3(hw);
    v3.observe(0, 0, 0, "ACT", 5, 0);
    v3.observe(ns_to_ps(21.0), 0, 0, "PRE", 5, 0);          // tRAS ok
    v3.observe(ns_to_ps(40.0), 0, 0, "ACT", 6, 0);          // tRP = 30 ns not elapsed
    CHECK(v3.violations().size() == 1);
}

TEST_CASE("normal request service prefers open rows and stays legal") {
    HardwareConfig hw = builtin_hardware();
    ChannelState ch(hw, 0);
    std::vector<ChannelState::Request> reqs;
    for (int i = 0; i < 32; ++i) reqs.push_back({0, 3, i, false});        // row hits
    for (int i = 0; i < 4; ++i) reqs.push_back({1, 9, i, i % 2 == 1});    // other bank
    TraceValidator v(hw);
    const time_ps end = ch.service_requests(
        reqs, 0, [&](time_ps t, int32_t chn, int32_t bank, const char* kind, int64_t row,
                     int64_t col) { v.observe(t, chn, bank, kind, row, col); });
    CHECK(end > 0);
    CHECK(v.violations().empty());
    // 36 reads, exactly two activations
    CHECK(ch.counts().normal_reads + ch.counts().normal_writes == 36);
    CHECK(ch.counts().bank_activations == 2);
}
