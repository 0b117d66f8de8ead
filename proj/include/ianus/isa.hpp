#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ianus/memmap.hpp"

namespace ianus {

enum class CmdKind : uint8_t { MU_FC, MU_ATTN, VU, DMA, PIM_MACRO, SYNC };
enum class MuAttnOp : uint8_t { qkt, sv };
enum class VuOp : uint8_t { layernorm, residual, softmax_masked, gelu, concat };
enum class DmaOp : uint8_t { load, store, onchip_transpose, prefetch };
enum class PimOp : uint8_t { fc, fc_gelu };

// Operation classes for the latency/energy breakdown.
enum class OpClass : uint8_t {
    embed,
    fc_qkv,
    self_attn,
    fc_proj,
    ffn,
    layer_norm,
    residual,
    lm_head,
    task_head,
    sync,
    other
};

const char* to_string(CmdKind k);
const char* to_string(OpClass c);

struct OperandDesc {
    int64_t n_tokens = 0;
    int64_t weight_rows = 0; // output dim of the weight (PIM tiling rows)
    int64_t weight_cols = 0; // reduction dim
    int32_t head_index = -1;
    int64_t bytes = 0;  // DMA payload
    int64_t elems = 0;  // VU element count per pass
    int64_t passes = 1; // VU passes over the data (layernorm is two-phase)
    int64_t in_addr = 0;
    int64_t out_addr = 0;
    int32_t weight_cfg = -1; // index into the plan's TileMap table
};

// One schedulable unit for the command scheduler. Immutable once built.
struct Command {
    int64_t id = 0;
    CmdKind kind = CmdKind::SYNC;
    MuAttnOp mu_op = MuAttnOp::qkt;
    VuOp vu_op = VuOp::layernorm;
    DmaOp dma_op = DmaOp::load;
    PimOp pim_op = PimOp::fc;
    int32_t core = 0; // owning core; SYNC uses core 0 with broadcast semantics
    OpClass op_class = OpClass::other;
    std::vector<int64_t> deps;
    OperandDesc op;
    bool offchip = false;      // DMA touches device DRAM (subject to PIM blocking)
    bool cross_device = false; // SYNC also crosses the PCIe link
    std::vector<int32_t> tile_maps; // PIM_MACRO: one map per head slice (>=1)

    bool is_offchip_dma() const { return kind == CmdKind::DMA && offchip; }
};

struct CycleReport {
    std::vector<int64_t> ids; // members of the first dependency cycle found
};

// Kahn's algorithm over the stream; nullopt when acyclic. Dependencies on ids
// outside the stream are treated as already satisfied.
std::optional<CycleReport> topo_validate(const std::vector<Command>& cmds);

enum class MicroKind : uint8_t {
    WRITE_GB,       // one input-vector segment (column_bytes) into the global buffer
    ACT_ALL_BANKS,  // open `row` on every bank
    MAC_ALL_BANKS,  // one column burst MACed by every PU
    ACT_FUNC,       // GELU via LUT rows
    READ_ACC,       // drain per-bank accumulators, pipelined across banks
    PRECHARGE_ALL
};

const char* to_string(MicroKind k);

constexpr int32_t kBroadcastChannel = -1;

struct MicroPimCommand {
    MicroKind kind = MicroKind::ACT_ALL_BANKS;
    int32_t channel = kBroadcastChannel;
    int64_t row = 0;
    int64_t column = 0;
};

struct MicroStream {
    bool broadcast = false;         // identical coordinates on every compute channel
    std::vector<int32_t> channels;  // channels covered
    std::vector<MicroPimCommand> cmds;

    int64_t count(MicroKind k) const;
};

// Decode one macro (matrix-vector product over `tiles`, repeated n_tokens
// times) into the channel-level micro sequence. Per tile the order is fixed:
// WRITE_GB+, ACT_ALL_BANKS, MAC_ALL_BANKS+, [ACT_FUNC], READ_ACC,
// PRECHARGE_ALL, with the accumulator drained once per row group (on its last
// column tile). Single-column-tile matrices load the global buffer once per
// token and reuse it across row groups.
MicroStream expand_macro(const Command& m, const TileMap& tiles, const HardwareConfig& hw);

// Standard DRAM commands for normal memory traffic.
enum class MemKind : uint8_t { ACT, RD, WR, PRE };

const char* to_string(MemKind k);

struct MemCommand {
    MemKind kind = MemKind::RD;
    int32_t channel = 0;
    int32_t bank = 0;
    int64_t row = 0;
    int64_t column = 0;
};

} // namespace ianus
