#include "ianus/npu.hpp"

#include <stdexcept>

namespace ianus {

const char* to_string(Unit u) {
    switch (u) {
        case Unit::MU: return "MU";
        case Unit::VU: return "VU";
        case Unit::DMA_IN: return "DMA_IN";
        case Unit::DMA_OUT: return "DMA_OUT";
        case Unit::none: return "-";
    }
    return "?";
}

Unit unit_for(const Command& c) {
    switch (c.kind) {
        case CmdKind::MU_FC:
        case CmdKind::MU_ATTN: return Unit::MU;
        case CmdKind::VU: return Unit::VU;
        case CmdKind::DMA:
            if (c.dma_op == DmaOp::store) return Unit::DMA_OUT;
            return Unit::DMA_IN; // load/prefetch; transpose additionally grabs DMA_OUT
        case CmdKind::PIM_MACRO:
        case CmdKind::SYNC: return Unit::none;
    }
    return Unit::none;
}

MuResult mu_execute(const Command& c, const HardwareConfig& hw) {
    MuResult r;
    const int64_t n = c.op.n_tokens;
    const int64_t out_cols = c.op.weight_rows; // outputs produced
    const int64_t red_rows = c.op.weight_cols; // reduction depth
    if (n <= 0 || out_cols <= 0 || red_rows <= 0) return r;
    const int64_t passes = std::max<int64_t>(1, c.op.passes);
    const int64_t tiles = ceil_div(out_cols, hw.mu_cols) * ceil_div(red_rows, hw.mu_rows);
    r.cycles = passes * (hw.mu_rows + tiles * n + hw.mu_cols);
    r.macs = passes * n * out_cols * red_rows;
    return r;
}

VuResult vu_execute(const Command& c, const HardwareConfig& hw) {
    VuResult r;
    const int64_t n = std::max<int64_t>(1, c.op.n_tokens);
    if (c.op.elems <= 0) return r;
    const int64_t per_cycle = hw.vu_lanes * hw.vu_width;
    const int64_t passes = std::max<int64_t>(1, c.op.passes);
    r.cycles = hw.vu_startup_cycles + passes * ceil_div(n * c.op.elems, per_cycle);
    r.lane_ops = passes * n * c.op.elems;
    return r;
}

int64_t transpose_onchip_cycles(int64_t bytes, const HardwareConfig& hw) {
    if (bytes <= 0) return 0;
    return ceil_div(bytes, hw.onchip_stream_bytes_per_cycle);
}

} // namespace ianus
