#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "ianus/config.hpp"
#include "ianus/isa.hpp"

namespace ianus {

// Execution resources inside one core. On-chip transpose occupies both DMA
// engines (the streaming buffer sits between the two scratch-pads).
enum class Unit : uint8_t { MU, VU, DMA_IN, DMA_OUT, none };

const char* to_string(Unit u);
Unit unit_for(const Command& c);

struct MuResult {
    int64_t cycles = 0;
    int64_t macs = 0;
};

// Systolic-array pass: weights fill the array once per pass, the token
// wavefront streams through per output tile, results drain through the
// columns. Output scaling and bias addition ride along at no extra cost.
MuResult mu_execute(const Command& c, const HardwareConfig& hw);

struct VuResult {
    int64_t cycles = 0;
    int64_t lane_ops = 0;
};

VuResult vu_execute(const Command& c, const HardwareConfig& hw);

// AM<->WM streaming transfer; no off-chip traffic.
int64_t transpose_onchip_cycles(int64_t bytes, const HardwareConfig& hw);

struct CoreState {
    std::vector<time_ps> unit_busy_until; // indexed by Unit
    int64_t outstanding = 0;              // visible, not yet completed
    int64_t max_outstanding = 0;          // high-water mark (pending queue)
    std::vector<int64_t> issue_waiting;   // per unit, ready but unit busy
    std::vector<int64_t> max_issue_waiting;

    explicit CoreState()
        : unit_busy_until(4, 0), issue_waiting(4, 0), max_issue_waiting(4, 0) {}
};

struct PcuState {
    bool macro_active = false;
    time_ps active_until = 0;
    int64_t macros_executed = 0;
    int64_t micro_commands = 0;
};

} // namespace ianus
