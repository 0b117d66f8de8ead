#pragma once

// Test-only reference models, kept independent of the implementation paths
// they check. The PIM oracle walks a micro-command sequence with its own
// encoding of the timing rules:
//   - one command issue per tCK on the channel command bus;
//   - column-path commands (WRITE_GB, MAC, READ_ACC, ACT_FUNC) are spaced by
//     their occupancy: tCCD per MAC burst and GB segment, banks x tCCD per
//     accumulator drain, the LUT window per ACT_FUNC;
//   - MAC waits tRCDRD after ACT and for the newest GB segment;
//   - a GB segment cannot be overwritten while MACs still read it;
//   - PRE waits for tRAS after ACT and for the column path to drain, then
//     blocks the next ACT for tRP;
//   - since the macro leaves every bank precharged, completion is the final
//     PRE issue plus tRP (or the last column op, whichever is later).

#include <algorithm>
#include <span>

#include "ianus/config.hpp"
#include "ianus/isa.hpp"

namespace ianus::oracle {

inline time_ps pim_macro_duration(std::span<const MicroPimCommand> cmds,
                                  const HardwareConfig& hw) {
    const auto& tp = hw.timing;
    const time_ps tck = tp.tck_ps();
    const time_ps tccd = tp.tccd_l_ps();
    const time_ps gbw = tp.gb_write_ps();
    const time_ps mac = tp.mac_burst_ps();

    time_ps bus = 0;       // next free command-bus slot
    time_ps col_end = 0;   // column path drained
    time_ps gb_done = 0;   // latest GB segment landed
    time_ps macs_done = 0; // latest MAC retired (GB overwrite guard)
    time_ps act_t = -1;    // last ACT issue
    time_ps act_legal = 0; // tRP after the last PRE
    time_ps last_pre = 0;
    time_ps finish = 0;

    for (const MicroPimCommand& c : cmds) {
        time_ps t = bus;
        switch (c.kind) {
            case MicroKind::WRITE_GB:
                t = std::max({t, col_end, macs_done});
                col_end = t + gbw;
                gb_done = col_end;
                break;
            case MicroKind::ACT_ALL_BANKS:
                t = std::max(t, act_legal);
                act_t = t;
                break;
            case MicroKind::MAC_ALL_BANKS:
                t = std::max({t, col_end, act_t + tp.trcdrd_ps(), gb_done});
                col_end = t + mac;
                macs_done = col_end;
                break;
            case MicroKind::ACT_FUNC:
                t = std::max(t, col_end);
                col_end = t + hw.gelu_lut_ns * kPsPerNs;
                break;
            case MicroKind::READ_ACC:
                t = std::max(t, col_end);
                col_end = t + hw.banks_per_channel * tccd;
                break;
            case MicroKind::PRECHARGE_ALL:
                t = std::max({t, col_end, act_t + tp.tras_ps()});
                act_legal = t + tp.trp_ps();
                last_pre = t;
                break;
        }
        bus = t + tck;
        finish = std::max({finish, col_end, last_pre + tp.trp_ps()});
    }
    return finish;
}

// Systolic pass reference: fill the array, stream the token wavefront per
// output tile, drain the columns.
inline int64_t mu_tile_cycles(int64_t n_tokens, int64_t tiles, const HardwareConfig& hw) {
    if (n_tokens <= 0 || tiles <= 0) return 0;
    return hw.mu_rows + tiles * n_tokens + hw.mu_cols;
}

} // namespace ianus::oracle
