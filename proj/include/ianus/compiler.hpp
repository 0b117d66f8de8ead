#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ianus/config.hpp"
#include "ianus/isa.hpp"
#include "ianus/memmap.hpp"

namespace ianus {

enum class Stage { summarization, generation };

const char* to_string(Stage s);

enum class AttentionVariant {
    summarize_mu, // matrix-matrix attention on the MU with key-priority transpose
    gen_pim_qkt,  // generation, QK^T and SV offloaded to PIM
    gen_mu_qkt    // generation, QK^T and SV on the MU (default)
};

const char* to_string(AttentionVariant v);

// pas: overlap-aware dependence templates with prefetching and on-chip moves.
// naive: per-core serial chains, PIM macros barrier the NPU, no prefetching.
enum class SchedulingPolicy { pas, naive };

struct AttentionSchedule {
    AttentionVariant variant = AttentionVariant::gen_mu_qkt;
    int64_t heads_per_core = 0;
    int64_t heads_per_slot_per_core = 0; // pipelining grain (Fig 7 head groups)
    int64_t head_slots = 0;
    // Fraction of a DRAM row used per QK^T MAC when mapped to PIM
    // (head_dim / elements_per_row); 6.25% at head_dim 64.
    double qkt_pim_row_utilization = 0.0;
    bool key_scaling_folded = false; // folded into MU output scaling
    bool tiled_qkt_fallback = false; // head_dim exceeds the MU column dim
};

AttentionSchedule schedule_attention(Stage stage, const ModelConfig& model,
                                     const HardwareConfig& hw, AttentionVariant variant);

// ---------------------------------------------------------------------------
// Analytical unit-time model used by the adaptive FC mapping. Times include
// nothing but the unit itself; composition happens in adaptive_map_fc.
// ---------------------------------------------------------------------------

enum class EstUnit { mu_fc, vu, dma_weight, pim };

class AnalyticalModel {
public:
    explicit AnalyticalModel(const HardwareConfig& hw) : hw_(&hw) {}

    // MU compute for a whole FC: the N dimension is column-partitioned across
    // cores that run in parallel, so the wall time is the per-core slice.
    // Streams are issued in wavefronts of mu_stream_quantum tokens, which
    // makes the estimate flat in n up to the quantum.
    time_ps mu_fc(int64_t n, int64_t out_rows, int64_t red_cols) const;

    // Per-tile MU beat and per-tile weight-DMA beat, for pipe().
    time_ps mu_tile_beat(int64_t n) const;
    time_ps dma_tile_beat() const;
    int64_t mu_tiles(int64_t out_rows, int64_t red_cols) const; // per-core slice

    time_ps vu(int64_t n, int64_t dim, int64_t passes = 1) const;
    time_ps dma_weight(int64_t bytes) const;

    // One token of matrix-vector work on the PIM, whole matrix across all
    // compute channels. Exactly the controller's timing of the expanded micro
    // sequence; strictly linear in n when multiplied out.
    time_ps pim_fc_per_token(int64_t out_rows, int64_t red_cols, bool gelu = false) const;

    // Double-buffered overlap of two per-tile beats across `tiles` tiles.
    static time_ps pipe(time_ps a, time_ps b, int64_t tiles);

    // Effective weight-load bandwidth: the NPU half only, in partitioned mode.
    int64_t dma_bandwidth() const;

private:
    const HardwareConfig* hw_;
    mutable std::map<std::tuple<int64_t, int64_t, bool>, time_ps> pim_cache_;
};

// Spec-level convenience wrapper.
time_ps estimate_unit_time(EstUnit unit, int64_t n, int64_t rows, int64_t cols,
                           const HardwareConfig& hw);

struct FcMapDecision {
    int64_t cmd_id = 0;
    time_ps mu_time = 0;
    time_ps pim_time = 0;
    time_ps prefetch = 0;
    bool to_pim = false;
};

// Algorithm: walk the stream; for each MU_FC, estimate the pipelined
// MU+weight-load time (minus VU prefetch overlap when the previous command is
// a VU op) against n sequential matrix-vector passes on the PIM; rewrite the
// command to PIM_MACRO when the PIM is strictly faster. Ties keep the MU.
std::vector<Command> adaptive_map_fc(std::vector<Command> cmds, int64_t n,
                                     const HardwareConfig& hw,
                                     std::vector<FcMapDecision>* decisions = nullptr);

// ---------------------------------------------------------------------------
// Plan construction
// ---------------------------------------------------------------------------

struct CompileOptions {
    AttentionVariant gen_variant = AttentionVariant::gen_mu_qkt;
    SchedulingPolicy policy = SchedulingPolicy::pas;
    bool force_fc_mu = false;
    bool force_fc_pim = false;
    int64_t num_devices = 1;
};

struct StagePlan {
    Stage stage = Stage::summarization;
    int64_t step = 0;     // generation step index, 0 during summarization
    int64_t n_tokens = 0; // tokens processed by this stage
    int64_t seq_len = 0;  // context length visible to attention
    std::vector<Command> cmds;
    std::vector<TileMap> tile_maps;
    int64_t sync_count = 0;
    int64_t pim_macro_count = 0;
    AttentionSchedule attention;
    std::vector<FcMapDecision> fc_decisions;
};

// Lower one stage into per-core command streams. `step` is ignored for
// summarization; for generation it selects the context length
// input_tokens + step.
StagePlan build_commands(const ModelConfig& model, const HardwareConfig& hw, Stage stage,
                         int64_t step, const AllocationPlan& alloc,
                         const CompileOptions& opts = {});

// Line-oriented dump for golden-file tests (id, kind, deps, operands).
std::string emit_plan_text(const StagePlan& plan);

} // namespace ianus
