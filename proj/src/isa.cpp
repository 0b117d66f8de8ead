#include "ianus/isa.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace ianus {

const char* to_string(CmdKind k) {
    switch (k) {
        case CmdKind::MU_FC: return "MU_FC";
        case CmdKind::MU_ATTN: return "MU_ATTN";
        case CmdKind::VU: return "VU";
        case CmdKind::DMA: return "DMA";
        case CmdKind::PIM_MACRO: return "PIM_MACRO";
        case CmdKind::SYNC: return "SYNC";
    }
    return "?";
}

const char* to_string(OpClass c) {
    switch (c) {
        case OpClass::embed: return "embed";
        case OpClass::fc_qkv: return "fc_qkv";
        case OpClass::self_attn: return "self_attn";
        case OpClass::fc_proj: return "fc_proj";
        case OpClass::ffn: return "ffn";
        case OpClass::layer_norm: return "layer_norm";
        case OpClass::residual: return "residual";
        case OpClass::lm_head: return "lm_head";
        case OpClass::task_head: return "task_head";
        case OpClass::sync: return "sync";
        case OpClass::other: return "other";
    }
    return "?";
}

const char* to_string(MicroKind k) {
    switch (k) {
        case MicroKind::WRITE_GB: return "WRITE_GB";
        case MicroKind::ACT_ALL_BANKS: return "ACT_ALL_BANKS";
        case MicroKind::MAC_ALL_BANKS: return "MAC_ALL_BANKS";
        case MicroKind::ACT_FUNC: return "ACT_FUNC";
        case MicroKind::READ_ACC: return "READ_ACC";
        case MicroKind::PRECHARGE_ALL: return "PRECHARGE_ALL";
    }
    return "?";
}

const char* to_string(MemKind k) {
    switch (k) {
        case MemKind::ACT: return "ACT";
        case MemKind::RD: return "RD";
        case MemKind::WR: return "WR";
        case MemKind::PRE: return "PRE";
    }
    return "?";
}

std::optional<CycleReport> topo_validate(const std::vector<Command>& cmds) {
    std::unordered_map<int64_t, size_t> index;
    index.reserve(cmds.size());
    for (size_t i = 0; i < cmds.size(); ++i) index[cmds[i].id] = i;

    std::vector<int> indeg(cmds.size(), 0);
    std::vector<std::vector<size_t>> out(cmds.size());
    for (size_t i = 0; i < cmds.size(); ++i) {
        for (int64_t d : cmds[i].deps) {
            auto it = index.find(d);
            if (it == index.end()) continue; // satisfied outside this stream
            out[it->second].push_back(i);
            ++indeg[i];
        }
    }
    std::deque<size_t> ready;
    for (size_t i = 0; i < cmds.size(); ++i) {
        if (indeg[i] == 0) ready.push_back(i);
    }
    size_t seen = 0;
    while (!ready.empty()) {
        size_t i = ready.front();
        ready.pop_front();
        ++seen;
        for (size_t j : out[i]) {
            if (--indeg[j] == 0) ready.push_back(j);
        }
    }
    if (seen == cmds.size()) return std::nullopt;
    CycleReport rep;
    for (size_t i = 0; i < cmds.size(); ++i) {
        if (indeg[i] > 0) rep.ids.push_back(cmds[i].id);
    }
    return rep;
}

int64_t MicroStream::count(MicroKind k) const {
    return static_cast<int64_t>(std::count_if(
        cmds.begin(), cmds.end(), [k](const MicroPimCommand& c) { return c.kind == k; }));
}

MicroStream expand_macro(const Command& m, const TileMap& tiles, const HardwareConfig& hw) {
    if (m.kind != CmdKind::PIM_MACRO) throw std::runtime_error("expand_macro: not a PIM macro");
    if (tiles.rows <= 0 || tiles.cols <= 0 || tiles.num_tiles() == 0) {
        throw std::runtime_error("expand_macro: empty tile map for " + tiles.matrix_id);
    }
    const int64_t n = std::max<int64_t>(1, m.op.n_tokens);
    const int64_t elems_per_burst = hw.elems_per_column(tiles.dtype_bytes);
    const bool gelu = m.pim_op == PimOp::fc_gelu;

    MicroStream s;
    s.channels = tiles.channels;
    s.broadcast = static_cast<int64_t>(tiles.channels.size()) == hw.pim_compute_channels;
    const int32_t chan = s.broadcast ? kBroadcastChannel : tiles.channels.front();
    // Single-channel maps issue one unicast stream; wider head-wise maps are
    // split by the caller into one map per channel.
    if (!s.broadcast && tiles.channels.size() != 1) {
        throw std::runtime_error("expand_macro: non-broadcast map must cover one channel");
    }

    const int64_t row_tiles = tiles.row_tiles();
    const int64_t col_tiles = tiles.col_tiles();
    const bool gb_reused = col_tiles == 1; // one input segment serves every row group

    for (int64_t tok = 0; tok < n; ++tok) {
        for (int64_t rt = 0; rt < row_tiles; ++rt) {
            for (int64_t ct = 0; ct < col_tiles; ++ct) {
                const int64_t width = tiles.tile_cols(ct);
                const int64_t segs = ceil_div(width * tiles.dtype_bytes, hw.column_bytes);
                const int64_t row = tiles.dram_row(rt, ct);
                if (!gb_reused || rt == 0) {
                    for (int64_t g = 0; g < segs; ++g) {
                        s.cmds.push_back({MicroKind::WRITE_GB, chan, row, g});
                    }
                }
                s.cmds.push_back({MicroKind::ACT_ALL_BANKS, chan, row, 0});
                const int64_t bursts = ceil_div(width, elems_per_burst);
                for (int64_t b = 0; b < bursts; ++b) {
                    s.cmds.push_back({MicroKind::MAC_ALL_BANKS, chan, row, b});
                }
                if (ct + 1 == col_tiles) {
                    if (gelu) s.cmds.push_back({MicroKind::ACT_FUNC, chan, row, 0});
                    s.cmds.push_back({MicroKind::READ_ACC, chan, row, 0});
                }
                s.cmds.push_back({MicroKind::PRECHARGE_ALL, chan, row, 0});
            }
        }
    }
    return s;
}

} // namespace ianus
