#include "ianus/compiler.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>
#include <stdexcept>

#include "ianus/pim.hpp"

namespace ianus {

const char* to_string(Stage s) {
    return s == Stage::summarization ? "summarization" : "generation";
}

const char* to_string(AttentionVariant v) {
    switch (v) {
        case AttentionVariant::summarize_mu: return "summarize_mu";
        case AttentionVariant::gen_pim_qkt: return "gen_pim_qkt";
        case AttentionVariant::gen_mu_qkt: return "gen_mu_qkt";
    }
    return "?";
}

AttentionSchedule schedule_attention(Stage stage, const ModelConfig& model,
                                     const HardwareConfig& hw, AttentionVariant variant) {
    AttentionSchedule s;
    s.variant = stage == Stage::summarization ? AttentionVariant::summarize_mu : variant;
    s.heads_per_core = ceil_div(model.num_heads, hw.num_cores);
    // Head slots group the per-core heads so that one slot's Q/K/V macros
    // cover every PIM channel once; slots pipeline against each other.
    const int64_t per_slot =
        std::max<int64_t>(1, std::min(s.heads_per_core,
                                      std::max<int64_t>(1, hw.pim_compute_channels / hw.num_cores)));
    s.heads_per_slot_per_core = per_slot;
    s.head_slots = ceil_div(s.heads_per_core, per_slot);
    if (s.variant == AttentionVariant::gen_pim_qkt) {
        s.qkt_pim_row_utilization = static_cast<double>(model.head_dim) /
                                    static_cast<double>(hw.cols_per_dram_row(model.dtype_bytes));
    }
    if (s.variant == AttentionVariant::summarize_mu) s.key_scaling_folded = true;
    s.tiled_qkt_fallback = model.head_dim > hw.mu_cols;
    return s;
}

// ---------------------------------------------------------------------------
// Analytical model
// ---------------------------------------------------------------------------

time_ps AnalyticalModel::mu_tile_beat(int64_t n) const {
    if (n <= 0) return 0;
    const int64_t q = hw_->mu_stream_quantum;
    const int64_t stream = q * ceil_div(n, q);
    return cycles_to_ps(hw_->mu_rows + stream + hw_->mu_cols, hw_->npu_freq_hz);
}

int64_t AnalyticalModel::mu_tiles(int64_t out_rows, int64_t red_cols) const {
    const int64_t slice = ceil_div(out_rows, hw_->num_cores);
    return ceil_div(red_cols, hw_->mu_rows) * ceil_div(slice, hw_->mu_cols);
}

time_ps AnalyticalModel::mu_fc(int64_t n, int64_t out_rows, int64_t red_cols) const {
    if (n <= 0) return 0;
    return mu_tiles(out_rows, red_cols) * mu_tile_beat(n);
}

int64_t AnalyticalModel::dma_bandwidth() const {
    if (hw_->memory_mode == MemoryMode::partitioned) {
        const int64_t normal = hw_->num_channels - hw_->pim_compute_channels;
        return hw_->ext_bandwidth() * normal / hw_->num_channels;
    }
    return hw_->ext_bandwidth();
}

time_ps AnalyticalModel::dma_tile_beat() const {
    const int64_t tile_bytes = hw_->mu_rows * hw_->mu_cols * 2;
    // Cores load their column slices concurrently over the shared bus.
    return bytes_to_ps(tile_bytes, dma_bandwidth() / hw_->num_cores);
}

time_ps AnalyticalModel::vu(int64_t n, int64_t dim, int64_t passes) const {
    if (n <= 0 || dim <= 0) return 0;
    const int64_t per_cycle = hw_->vu_lanes * hw_->vu_width;
    const int64_t cycles = hw_->vu_startup_cycles + passes * ceil_div(n * dim, per_cycle);
    return cycles_to_ps(cycles, hw_->npu_freq_hz);
}

time_ps AnalyticalModel::dma_weight(int64_t bytes) const {
    return hw_->dma_transfer_overhead_ns * kPsPerNs + bytes_to_ps(bytes, dma_bandwidth());
}

time_ps AnalyticalModel::pim_fc_per_token(int64_t out_rows, int64_t red_cols, bool gelu) const {
    auto key = std::make_tuple(out_rows, red_cols, gelu);
    auto it = pim_cache_.find(key);
    if (it != pim_cache_.end()) return it->second;
    TileMap tm = tile_weight_matrix("est", out_rows, red_cols, *hw_);
    Command macro;
    macro.kind = CmdKind::PIM_MACRO;
    macro.pim_op = gelu ? PimOp::fc_gelu : PimOp::fc;
    macro.op.n_tokens = 1;
    MicroStream ms = expand_macro(macro, tm, *hw_);
    const time_ps t = micro_stream_timing(ms.cmds, *hw_).end;
    pim_cache_[key] = t;
    return t;
}

time_ps AnalyticalModel::pipe(time_ps a, time_ps b, int64_t tiles) {
    if (tiles <= 0) return 0;
    return std::max(a, b) * (tiles - 1) + a + b;
}

time_ps estimate_unit_time(EstUnit unit, int64_t n, int64_t rows, int64_t cols,
                           const HardwareConfig& hw) {
    AnalyticalModel m(hw);
    switch (unit) {
        case EstUnit::mu_fc: return m.mu_fc(n, rows, cols);
        case EstUnit::vu: return m.vu(n, cols);
        case EstUnit::dma_weight: return m.dma_weight(rows * cols * 2);
        case EstUnit::pim: return n * m.pim_fc_per_token(rows, cols);
    }
    return 0;
}

std::vector<Command> adaptive_map_fc(std::vector<Command> cmds, int64_t n,
                                     const HardwareConfig& hw,
                                     std::vector<FcMapDecision>* decisions) {
    AnalyticalModel model(hw);
    for (size_t i = 0; i < cmds.size(); ++i) {
        Command& cmd = cmds[i];
        if (cmd.kind != CmdKind::MU_FC) continue;

        time_ps t_prefetch = 0;
        if (i > 0 && cmds[i - 1].kind == CmdKind::VU) {
            t_prefetch = model.vu(n, cmds[i - 1].op.elems, cmds[i - 1].op.passes);
        }
        const int64_t out_rows = cmd.op.weight_rows;
        const int64_t red_cols = cmd.op.weight_cols;
        const time_ps w_load = model.dma_tile_beat();
        const time_ps mu_beat = model.mu_tile_beat(n);
        const int64_t tiles = model.mu_tiles(out_rows, red_cols);
        time_ps mu_time = AnalyticalModel::pipe(w_load, mu_beat, tiles) +
                          hw.dma_transfer_overhead_ns * kPsPerNs - t_prefetch;
        if (mu_time < 0) mu_time = 0;
        const time_ps pim_time = n * model.pim_fc_per_token(out_rows, red_cols);

        FcMapDecision d;
        d.cmd_id = cmd.id;
        d.mu_time = mu_time;
        d.pim_time = pim_time;
        d.prefetch = t_prefetch;
        d.to_pim = pim_time < mu_time; // ties keep the matrix unit
        if (d.to_pim) cmd.kind = CmdKind::PIM_MACRO;
        if (decisions) decisions->push_back(d);
    }
    return cmds;
}

// ---------------------------------------------------------------------------
// Plan construction
// ---------------------------------------------------------------------------

namespace {

struct FcTarget {
    bool to_pim = false;
};

class PlanBuilder {
public:
    PlanBuilder(const ModelConfig& model, const HardwareConfig& hw, Stage stage, int64_t step,
                const AllocationPlan& alloc, const CompileOptions& opts)
        : m_(model), hw_(hw), stage_(stage), step_(step), alloc_(alloc), opts_(opts) {
        n_ = stage == Stage::summarization ? model.input_tokens : 1;
        seq_ = stage == Stage::summarization ? model.input_tokens : model.input_tokens + step;
        cores_ = hw.num_cores;
        plan_.stage = stage;
        plan_.step = step;
        plan_.n_tokens = n_;
        plan_.seq_len = seq_;
        plan_.attention = schedule_attention(
            stage, model, hw,
            stage == Stage::summarization ? AttentionVariant::summarize_mu : opts.gen_variant);
        if (opts.num_devices > 1) {
            // Heads shard across devices first; re-derive the per-core slot
            // structure from this device's share.
            auto& att = plan_.attention;
            const int64_t local = ceil_div(model.num_heads, opts.num_devices);
            att.heads_per_core = ceil_div(local, hw.num_cores);
            att.heads_per_slot_per_core =
                std::max<int64_t>(1, std::min(att.heads_per_core,
                                              std::max<int64_t>(1, hw.pim_compute_channels /
                                                                       hw.num_cores)));
            att.head_slots = ceil_div(att.heads_per_core, att.heads_per_slot_per_core);
        }
        core_tail_.assign(static_cast<size_t>(cores_), 0);
        pim_available_ = hw.memory_mode != MemoryMode::plain;
    }

    StagePlan build();

private:
    int64_t add(Command c, std::vector<int64_t> deps);
    int64_t add_sync(const std::vector<int64_t>& deps, int64_t gather_bytes);
    int32_t intern_map(TileMap tm);
    int64_t head_channel(int64_t head) const;
    std::vector<int64_t> slot_heads(int64_t core, int64_t slot) const;
    FcTarget decide_fc_targets();

    // emission pieces; each returns the per-core tail ids of the phase
    std::vector<int64_t> emit_embedding(const std::vector<int64_t>& entry);
    std::vector<int64_t> emit_block(int64_t blk, const std::vector<int64_t>& entry);
    void emit_head_stage(const std::vector<int64_t>& entry);

    std::vector<int64_t> emit_mu_fc(const std::string& what, OpClass cls, int64_t out_rows,
                                    int64_t red_cols, int64_t n_tokens,
                                    const std::vector<int64_t>& entry);
    int64_t emit_pim_fc(const std::string& param, OpClass cls, int64_t out_rows, int64_t red_cols,
                        int64_t n_tokens, bool gelu, const std::vector<int64_t>& deps);
    bool fc_on_pim(const std::string& param, const char* which) const;

    const ModelConfig& m_;
    const HardwareConfig& hw_;
    Stage stage_;
    int64_t step_;
    const AllocationPlan& alloc_;
    CompileOptions opts_;
    StagePlan plan_;
    int64_t n_ = 0;
    int64_t seq_ = 0;
    int64_t cores_ = 0;
    int64_t next_id_ = 1;
    std::vector<int64_t> core_tail_;
    bool pim_available_ = true;
    std::map<std::pair<std::string, int64_t>, FcMapDecision> fc_choice_; // (name-kind, ) -> decision
};

int64_t PlanBuilder::add(Command c, std::vector<int64_t> deps) {
    c.id = next_id_++;
    if (opts_.policy == SchedulingPolicy::naive) {
        // Serial per-core chains; PIM macros and syncs barrier every core.
        if (c.kind == CmdKind::PIM_MACRO || c.kind == CmdKind::SYNC) {
            for (int64_t t : core_tail_) {
                if (t) deps.push_back(t);
            }
        } else if (core_tail_[static_cast<size_t>(c.core)]) {
            deps.push_back(core_tail_[static_cast<size_t>(c.core)]);
        }
    }
    std::sort(deps.begin(), deps.end());
    deps.erase(std::unique(deps.begin(), deps.end()), deps.end());
    deps.erase(std::remove(deps.begin(), deps.end(), 0), deps.end());
    c.deps = std::move(deps);
    if (c.kind == CmdKind::PIM_MACRO) ++plan_.pim_macro_count;
    if (opts_.policy == SchedulingPolicy::naive &&
        (c.kind == CmdKind::PIM_MACRO || c.kind == CmdKind::SYNC)) {
        for (auto& t : core_tail_) t = c.id;
    } else {
        core_tail_[static_cast<size_t>(c.core)] = c.id;
    }
    plan_.cmds.push_back(std::move(c));
    return plan_.cmds.back().id;
}

int64_t PlanBuilder::add_sync(const std::vector<int64_t>& deps, int64_t gather_bytes) {
    Command s;
    s.kind = CmdKind::SYNC;
    s.core = 0;
    s.op_class = OpClass::sync;
    s.op.bytes = gather_bytes;
    s.cross_device = opts_.num_devices > 1;
    int64_t id = add(std::move(s), deps);
    for (auto& t : core_tail_) t = id; // everything after waits on the barrier
    ++plan_.sync_count;
    return id;
}

int32_t PlanBuilder::intern_map(TileMap tm) {
    plan_.tile_maps.push_back(std::move(tm));
    return static_cast<int32_t>(plan_.tile_maps.size() - 1);
}

int64_t PlanBuilder::head_channel(int64_t head) const {
    const int64_t local_heads = ceil_div(m_.num_heads, opts_.num_devices);
    return head * hw_.pim_compute_channels / std::max<int64_t>(1, local_heads);
}

std::vector<int64_t> PlanBuilder::slot_heads(int64_t core, int64_t slot) const {
    // Head h belongs to slot h % slots on core (h / slots) % cores. One
    // slot's heads then land on pairwise distinct channels, so the slot's
    // Q/K/V macros cover the PIM channels in a single parallel pass.
    const int64_t local_heads = ceil_div(m_.num_heads, opts_.num_devices);
    const int64_t slots = plan_.attention.head_slots;
    std::vector<int64_t> out;
    for (int64_t h = 0; h < local_heads; ++h) {
        if (h % slots == slot && (h / slots) % cores_ == core) out.push_back(h);
    }
    return out;
}

FcTarget PlanBuilder::decide_fc_targets() {
    // Logical per-block stream fed to the adaptive mapper; kinds come back
    // rewritten for the FCs that run faster as matrix-vector passes on PIM.
    std::vector<Command> seq;
    auto vu = [&](int64_t dim, int64_t passes) {
        Command c;
        c.kind = CmdKind::VU;
        c.op.elems = dim;
        c.op.passes = passes;
        seq.push_back(c);
    };
    auto fc = [&](const char* name, int64_t rows, int64_t cols) {
        Command c;
        c.id = static_cast<int64_t>(seq.size()) + 1;
        c.kind = CmdKind::MU_FC;
        c.op.weight_rows = rows;
        c.op.weight_cols = cols;
        seq.push_back(c);
    };
    vu(m_.embedding_dim, 2); // layernorm
    fc("qkv", 3 * m_.embedding_dim, m_.embedding_dim);
    {
        Command attn;
        attn.kind = CmdKind::MU_ATTN;
        seq.push_back(attn);
    }
    fc("proj", m_.embedding_dim, m_.embedding_dim);
    vu(m_.embedding_dim, 1); // residual
    vu(m_.embedding_dim, 2); // layernorm
    fc("fc1", m_.ffn_dim(), m_.embedding_dim);
    vu(m_.ffn_dim(), 1); // gelu
    fc("fc2", m_.embedding_dim, m_.ffn_dim());
    vu(m_.embedding_dim, 1); // residual

    std::vector<FcMapDecision> dec;
    auto mapped = adaptive_map_fc(seq, n_, hw_, &dec);

    const char* names[4] = {"qkv", "proj", "fc1", "fc2"};
    size_t di = 0;
    for (size_t i = 0; i < mapped.size() && di < 4; ++i) {
        if (mapped[i].kind != CmdKind::MU_FC && mapped[i].kind != CmdKind::PIM_MACRO) continue;
        FcMapDecision d = dec[di];
        bool to_pim = d.to_pim;
        if (!pim_available_ || opts_.force_fc_mu) to_pim = false;
        else if (opts_.force_fc_pim) to_pim = true;
        d.to_pim = to_pim;
        fc_choice_[{names[di], 0}] = d;
        plan_.fc_decisions.push_back(d);
        ++di;
    }
    return {};
}

std::vector<int64_t> PlanBuilder::emit_mu_fc(const std::string& what, OpClass cls,
                                             int64_t out_rows, int64_t red_cols, int64_t n_tokens,
                                             const std::vector<int64_t>& entry) {
    // Column-partitioned across cores; each core pipelines weight-slab DMA
    // loads against MU passes, double buffered in the weight scratch-pad.
    std::vector<int64_t> tails(static_cast<size_t>(cores_), 0);
    const int64_t device_rows = ceil_div(out_rows, opts_.num_devices);
    const int64_t slice = ceil_div(device_rows, cores_);
    const int64_t k_slabs = ceil_div(red_cols, hw_.mu_rows);
    const int64_t slab_budget = std::min<int64_t>(hw_.wm_capacity / 2, 2LL << 20);
    const int64_t slab_bytes_full = hw_.mu_rows * slice * m_.dtype_bytes;
    const int64_t n_chunks = std::max<int64_t>(1, ceil_div(slab_bytes_full, slab_budget));
    const int64_t chunk_cols = ceil_div(slice, n_chunks);

    for (int64_t c = 0; c < cores_; ++c) {
        const int64_t core_cols = std::clamp<int64_t>(device_rows - c * slice, 0, slice);
        std::vector<int64_t> loads, mus;
        for (int64_t ks = 0; ks < k_slabs; ++ks) {
            const int64_t k_rows = std::min(hw_.mu_rows, red_cols - ks * hw_.mu_rows);
            for (int64_t nc = 0; nc < n_chunks; ++nc) {
                const int64_t cols = std::min(chunk_cols, core_cols - nc * chunk_cols);
                if (cols <= 0) continue;
                const int64_t j = static_cast<int64_t>(mus.size());
                Command ld;
                ld.kind = CmdKind::DMA;
                ld.dma_op = DmaOp::load;
                ld.offchip = true;
                ld.core = static_cast<int32_t>(c);
                ld.op_class = cls;
                ld.op.bytes = k_rows * cols * m_.dtype_bytes;
                std::vector<int64_t> ld_deps = entry;
                if (j >= 2) ld_deps.push_back(mus[static_cast<size_t>(j - 2)]); // double buffer
                int64_t ld_id = add(std::move(ld), std::move(ld_deps));
                loads.push_back(ld_id);

                Command mu;
                mu.kind = CmdKind::MU_FC;
                mu.core = static_cast<int32_t>(c);
                mu.op_class = cls;
                mu.op.n_tokens = n_tokens;
                mu.op.weight_rows = cols;   // outputs in this pass
                mu.op.weight_cols = k_rows; // reduction rows streamed
                std::vector<int64_t> mu_deps{ld_id};
                if (!mus.empty()) mu_deps.push_back(mus.back());
                int64_t mu_id = add(std::move(mu), std::move(mu_deps));
                mus.push_back(mu_id);
            }
        }
        tails[static_cast<size_t>(c)] = mus.empty() ? 0 : mus.back();
    }
    (void)what;
    return tails;
}

int64_t PlanBuilder::emit_pim_fc(const std::string& param, OpClass cls, int64_t out_rows,
                                 int64_t red_cols, int64_t n_tokens, bool gelu,
                                 const std::vector<int64_t>& deps) {
    const ParamPlacement* p = alloc_.find(param);
    TileMap tm = tile_weight_matrix(param, std::max<int64_t>(1, out_rows / opts_.num_devices),
                                    red_cols, hw_, m_.dtype_bytes);
    tm.base_row = p ? p->base_row : 0;
    Command macro;
    macro.kind = CmdKind::PIM_MACRO;
    macro.pim_op = gelu ? PimOp::fc_gelu : PimOp::fc;
    macro.core = 0;
    macro.op_class = cls;
    macro.op.n_tokens = n_tokens;
    macro.op.weight_rows = out_rows;
    macro.op.weight_cols = red_cols;
    macro.tile_maps.push_back(intern_map(std::move(tm)));
    return add(std::move(macro), deps);
}

bool PlanBuilder::fc_on_pim(const std::string& param, const char* which) const {
    bool to_pim = fc_choice_.at({which, 0}).to_pim;
    const ParamPlacement* p = alloc_.find(param);
    if (p) {
        if (p->npu_only || p->region != Region::pim_rows) {
            to_pim = false; // only a linear NPU copy exists
        } else if (hw_.memory_mode == MemoryMode::partitioned && !p->duplicated) {
            to_pim = true; // no NPU copy: the PIM owns this weight
        }
    }
    return to_pim && pim_available_;
}

std::vector<int64_t> PlanBuilder::emit_embedding(const std::vector<int64_t>& entry) {
    std::vector<int64_t> tails(static_cast<size_t>(cores_), 0);
    for (int64_t c = 0; c < cores_; ++c) {
        Command ld;
        ld.kind = CmdKind::DMA;
        ld.dma_op = DmaOp::load;
        ld.offchip = true;
        ld.core = static_cast<int32_t>(c);
        ld.op_class = OpClass::embed;
        ld.op.bytes = n_ * m_.embedding_dim * m_.dtype_bytes;
        int64_t ld_id = add(std::move(ld), entry);
        Command addpos;
        addpos.kind = CmdKind::VU;
        addpos.vu_op = VuOp::residual;
        addpos.core = static_cast<int32_t>(c);
        addpos.op_class = OpClass::embed;
        addpos.op.n_tokens = n_;
        addpos.op.elems = m_.embedding_dim;
        tails[static_cast<size_t>(c)] = add(std::move(addpos), {ld_id});
    }
    return tails;
}

std::vector<int64_t> PlanBuilder::emit_block(int64_t blk, const std::vector<int64_t>& entry) {
    const AttentionSchedule& att = plan_.attention;
    const std::string prefix = "blk" + std::to_string(blk) + ".";
    const bool qkv_pim = fc_on_pim(prefix + "qkv", "qkv");
    const bool proj_pim = fc_on_pim(prefix + "proj", "proj");
    const bool fc1_pim = fc_on_pim(prefix + "fc1", "fc1");
    const bool fc2_pim = fc_on_pim(prefix + "fc2", "fc2");
    const int64_t hd = m_.head_dim;
    const int64_t emb = m_.embedding_dim;

    // Layer norm, computed redundantly on every core so the block needs no
    // extra synchronization point before the QKV FCs.
    std::vector<int64_t> ln1(static_cast<size_t>(cores_));
    for (int64_t c = 0; c < cores_; ++c) {
        Command ln;
        ln.kind = CmdKind::VU;
        ln.vu_op = VuOp::layernorm;
        ln.core = static_cast<int32_t>(c);
        ln.op_class = OpClass::layer_norm;
        ln.op.n_tokens = n_;
        ln.op.elems = emb;
        ln.op.passes = 2; // mean/var, then normalize
        ln1[static_cast<size_t>(c)] = add(std::move(ln), entry);
    }

    // --- multi-head attention, slot-pipelined ---
    const int64_t slots = att.head_slots;
    std::vector<int64_t> sv_tail(static_cast<size_t>(cores_), 0);
    std::vector<int64_t> prev_smax(static_cast<size_t>(cores_), 0);
    int64_t prev_vgen = 0;

    auto slot_heads_of = [&](int64_t core, int64_t s) { return slot_heads(core, s); };

    // Builds the three per-slot generator ops (K, Q, V); returns per-core ids
    // dependents should wait on.
    auto emit_gen = [&](int64_t s, int mat, const std::vector<int64_t>& deps,
                        std::vector<int64_t>* per_core) -> int64_t {
        if (qkv_pim) {
            Command macro;
            macro.kind = CmdKind::PIM_MACRO;
            macro.pim_op = PimOp::fc;
            macro.core = 0;
            macro.op_class = OpClass::fc_qkv;
            macro.op.n_tokens = n_;
            macro.op.weight_rows = hd;
            macro.op.weight_cols = emb;
            const ParamPlacement* p = alloc_.find(prefix + "qkv");
            for (int64_t c = 0; c < cores_; ++c) {
                for (int64_t h : slot_heads_of(c, s)) {
                    TileMap tm = tile_weight_matrix_on(
                        prefix + "qkv.h" + std::to_string(h), hd, emb, hw_,
                        {static_cast<int32_t>(head_channel(h))}, m_.dtype_bytes);
                    const int64_t per_head_rows = tm.rows_reserved();
                    tm.base_row = (p ? p->base_row : 0) +
                                  (mat * ceil_div(m_.num_heads, opts_.num_devices) + h) *
                                      per_head_rows;
                    macro.tile_maps.push_back(intern_map(std::move(tm)));
                }
            }
            if (macro.tile_maps.empty()) return 0;
            int64_t id = add(std::move(macro), deps);
            for (int64_t c = 0; c < cores_; ++c) (*per_core)[static_cast<size_t>(c)] = id;
            return id;
        }
        // Matrix-unit path: per-core weight load + MU pass over the slot heads.
        for (int64_t c = 0; c < cores_; ++c) {
            auto hs = slot_heads_of(c, s);
            if (hs.empty()) {
                (*per_core)[static_cast<size_t>(c)] = 0;
                continue;
            }
            Command ld;
            ld.kind = CmdKind::DMA;
            ld.dma_op = DmaOp::load;
            ld.offchip = true;
            ld.core = static_cast<int32_t>(c);
            ld.op_class = OpClass::fc_qkv;
            ld.op.bytes = emb * hd * static_cast<int64_t>(hs.size()) * m_.dtype_bytes;
            int64_t ld_id = add(ld, deps);
            Command mu;
            mu.kind = CmdKind::MU_FC;
            mu.core = static_cast<int32_t>(c);
            mu.op_class = OpClass::fc_qkv;
            mu.op.n_tokens = n_;
            mu.op.weight_rows = hd;
            mu.op.weight_cols = emb;
            mu.op.passes = static_cast<int64_t>(hs.size());
            std::vector<int64_t> mu_deps = deps;
            mu_deps.push_back(ld_id);
            mu_deps.push_back(ln1[static_cast<size_t>(c)]);
            (*per_core)[static_cast<size_t>(c)] = add(std::move(mu), std::move(mu_deps));
        }
        return 0;
    };

    const bool gen_stage = stage_ == Stage::generation;
    const bool pim_attn = att.variant == AttentionVariant::gen_pim_qkt && pim_available_;

    for (int64_t s = 0; s < slots; ++s) {
        std::vector<int64_t> kgen(static_cast<size_t>(cores_), 0),
            qgen(static_cast<size_t>(cores_), 0), vgen(static_cast<size_t>(cores_), 0);

        // K_pre prefetch (generation only): overlapped with the previous
        // slot's SV window; the next key generation waits for it so the PIM
        // macro never traps the load behind the DMA-blocking rule.
        std::vector<int64_t> kpre(static_cast<size_t>(cores_), 0);
        if (gen_stage && !pim_attn && seq_ > 1) {
            for (int64_t c = 0; c < cores_; ++c) {
                auto hs = slot_heads_of(c, s);
                if (hs.empty()) continue;
                Command pf;
                pf.kind = CmdKind::DMA;
                pf.dma_op = DmaOp::prefetch;
                pf.offchip = true;
                pf.core = static_cast<int32_t>(c);
                pf.op_class = OpClass::self_attn;
                pf.op.bytes = (seq_ - 1) * hd * static_cast<int64_t>(hs.size()) * m_.dtype_bytes;
                std::vector<int64_t> deps;
                if (prev_smax[static_cast<size_t>(c)]) deps.push_back(prev_smax[static_cast<size_t>(c)]);
                kpre[static_cast<size_t>(c)] = add(std::move(pf), std::move(deps));
            }
        }

        std::vector<int64_t> kdeps = {ln1[0]};
        for (int64_t id : kpre) {
            if (id) kdeps.push_back(id);
        }
        if (prev_vgen) kdeps.push_back(prev_vgen);
        int64_t kgen_macro = emit_gen(s, 1, kdeps, &kgen);
        int64_t qgen_macro =
            emit_gen(s, 0, kgen_macro ? std::vector<int64_t>{kgen_macro} : std::vector<int64_t>{ln1[0]},
                     &qgen);
        int64_t vgen_macro =
            emit_gen(s, 2, qgen_macro ? std::vector<int64_t>{qgen_macro} : std::vector<int64_t>{ln1[0]},
                     &vgen);
        prev_vgen = vgen_macro;

        for (int64_t c = 0; c < cores_; ++c) {
            auto hs = slot_heads_of(c, s);
            if (hs.empty()) continue;
            const int64_t nh = static_cast<int64_t>(hs.size());
            const size_t ci = static_cast<size_t>(c);

            int64_t key_ready = kgen[ci];
            if (gen_stage) {
                // Key concatenation on the VU instead of a store+reload.
                Command cat;
                cat.kind = CmdKind::VU;
                cat.vu_op = VuOp::concat;
                cat.core = static_cast<int32_t>(c);
                cat.op_class = OpClass::self_attn;
                cat.op.n_tokens = 1;
                cat.op.elems = seq_ * hd * nh;
                std::vector<int64_t> deps{kgen[ci]};
                if (kpre[ci]) deps.push_back(kpre[ci]);
                key_ready = add(std::move(cat), std::move(deps));
            }

            // On-chip transpose of the (concatenated) keys into the weight
            // scratch-pad; runs while Q is generated.
            Command tr;
            tr.kind = CmdKind::DMA;
            tr.dma_op = DmaOp::onchip_transpose;
            tr.core = static_cast<int32_t>(c);
            tr.op_class = OpClass::self_attn;
            tr.op.bytes = (gen_stage ? seq_ : n_) * hd * nh * m_.dtype_bytes;
            int64_t tr_id = add(std::move(tr), {key_ready});

            int64_t qkt_id = 0;
            if (pim_attn) {
                // Store the new key, then run QK^T over the in-memory cache.
                Command kst;
                kst.kind = CmdKind::DMA;
                kst.dma_op = DmaOp::store;
                kst.offchip = true;
                kst.core = static_cast<int32_t>(c);
                kst.op_class = OpClass::self_attn;
                kst.op.bytes = hd * nh * m_.dtype_bytes;
                int64_t kst_id = add(std::move(kst), {kgen[ci]});
                Command qkt;
                qkt.kind = CmdKind::PIM_MACRO;
                qkt.pim_op = PimOp::fc;
                qkt.core = static_cast<int32_t>(c);
                qkt.op_class = OpClass::self_attn;
                qkt.op.n_tokens = 1;
                qkt.op.weight_rows = seq_;
                qkt.op.weight_cols = hd;
                for (int64_t h : hs) {
                    TileMap tm = tile_weight_matrix_on(
                        "kcache.h" + std::to_string(h), seq_, hd, hw_,
                        {static_cast<int32_t>(head_channel(h))}, m_.dtype_bytes);
                    tm.base_row = alloc_.tiled_rows_used + 4096 + h * 4096;
                    qkt.tile_maps.push_back(intern_map(std::move(tm)));
                }
                qkt_id = add(std::move(qkt), {qgen[ci], kst_id});
            } else {
                Command qkt;
                qkt.kind = CmdKind::MU_ATTN;
                qkt.mu_op = MuAttnOp::qkt;
                qkt.core = static_cast<int32_t>(c);
                qkt.op_class = OpClass::self_attn;
                qkt.op.n_tokens = gen_stage ? 1 : n_;
                qkt.op.weight_rows = gen_stage ? seq_ : n_; // score columns
                qkt.op.weight_cols = hd;
                qkt.op.passes = nh;
                qkt_id = add(std::move(qkt), {qgen[ci], tr_id});
            }

            Command sm;
            sm.kind = CmdKind::VU;
            sm.vu_op = VuOp::softmax_masked;
            sm.core = static_cast<int32_t>(c);
            sm.op_class = OpClass::self_attn;
            sm.op.n_tokens = gen_stage ? 1 : n_;
            sm.op.elems = (gen_stage ? seq_ : n_) * nh;
            int64_t sm_id = add(std::move(sm), {qkt_id});
            prev_smax[ci] = sm_id;

            // Store fresh K/V (and load the concatenated values) during the
            // softmax window.
            Command kv;
            kv.kind = CmdKind::DMA;
            kv.dma_op = DmaOp::store;
            kv.offchip = true;
            kv.core = static_cast<int32_t>(c);
            kv.op_class = OpClass::self_attn;
            kv.op.bytes = 2 * (gen_stage ? 1 : n_) * hd * nh * m_.dtype_bytes;
            add(std::move(kv), {qkt_id, vgen[ci]});

            int64_t v_ready = vgen[ci];
            if (pim_attn) {
                Command vst;
                vst.kind = CmdKind::DMA;
                vst.dma_op = DmaOp::store;
                vst.offchip = true;
                vst.core = static_cast<int32_t>(c);
                vst.op_class = OpClass::self_attn;
                vst.op.bytes = hd * nh * m_.dtype_bytes;
                v_ready = add(std::move(vst), {vgen[ci]});
            } else {
                if (gen_stage) {
                    Command vc;
                    vc.kind = CmdKind::DMA;
                    vc.dma_op = DmaOp::load;
                    vc.offchip = true;
                    vc.core = static_cast<int32_t>(c);
                    vc.op_class = OpClass::self_attn;
                    vc.op.bytes = seq_ * hd * nh * m_.dtype_bytes;
                    v_ready = add(std::move(vc), {qkt_id, vgen[ci]});
                }
                Command mv;
                mv.kind = CmdKind::DMA;
                mv.dma_op = DmaOp::onchip_transpose;
                mv.core = static_cast<int32_t>(c);
                mv.op_class = OpClass::self_attn;
                mv.op.bytes = (gen_stage ? seq_ : n_) * hd * nh * m_.dtype_bytes;
                v_ready = add(std::move(mv), {v_ready, qkt_id});
            }

            if (pim_attn) {
                Command sv;
                sv.kind = CmdKind::PIM_MACRO;
                sv.pim_op = PimOp::fc;
                sv.core = static_cast<int32_t>(c);
                sv.op_class = OpClass::self_attn;
                sv.op.n_tokens = 1;
                sv.op.weight_rows = hd;
                sv.op.weight_cols = seq_;
                for (int64_t h : hs) {
                    TileMap tm = tile_weight_matrix_on(
                        "vcache.h" + std::to_string(h), hd, seq_, hw_,
                        {static_cast<int32_t>(head_channel(h))}, m_.dtype_bytes);
                    tm.base_row = alloc_.tiled_rows_used + 262144 + h * 4096;
                    sv.tile_maps.push_back(intern_map(std::move(tm)));
                }
                sv_tail[ci] = add(std::move(sv), {sm_id, v_ready});
            } else {
                Command sv;
                sv.kind = CmdKind::MU_ATTN;
                sv.mu_op = MuAttnOp::sv;
                sv.core = static_cast<int32_t>(c);
                sv.op_class = OpClass::self_attn;
                sv.op.n_tokens = gen_stage ? 1 : n_;
                sv.op.weight_rows = hd;
                sv.op.weight_cols = gen_stage ? seq_ : n_;
                sv.op.passes = nh;
                sv_tail[ci] = add(std::move(sv), {sm_id, v_ready});
            }
        }
    }

    // SYNC 1/4: after multi-head attention (heads merge across cores).
    std::vector<int64_t> s1_deps;
    for (int64_t id : sv_tail) {
        if (id) s1_deps.push_back(id);
    }
    int64_t sync1 = add_sync(s1_deps, n_ * emb * m_.dtype_bytes);

    // Projection FC.
    std::vector<int64_t> proj_tail(static_cast<size_t>(cores_), sync1);
    if (proj_pim) {
        int64_t id = emit_pim_fc(prefix + "proj", OpClass::fc_proj, emb, emb, n_, false, {sync1});
        std::fill(proj_tail.begin(), proj_tail.end(), id);
    } else {
        proj_tail = emit_mu_fc(prefix + "proj", OpClass::fc_proj, emb, emb, n_, {sync1});
    }
    std::vector<int64_t> res1(static_cast<size_t>(cores_));
    for (int64_t c = 0; c < cores_; ++c) {
        Command r;
        r.kind = CmdKind::VU;
        r.vu_op = VuOp::residual;
        r.core = static_cast<int32_t>(c);
        r.op_class = OpClass::residual;
        r.op.n_tokens = n_;
        r.op.elems = emb;
        res1[static_cast<size_t>(c)] = add(std::move(r), {proj_tail[static_cast<size_t>(c)]});
    }
    // SYNC 2/4: after the first residual addition.
    int64_t sync2 = add_sync(res1, n_ * emb * m_.dtype_bytes);

    std::vector<int64_t> ln2(static_cast<size_t>(cores_));
    for (int64_t c = 0; c < cores_; ++c) {
        Command ln;
        ln.kind = CmdKind::VU;
        ln.vu_op = VuOp::layernorm;
        ln.core = static_cast<int32_t>(c);
        ln.op_class = OpClass::layer_norm;
        ln.op.n_tokens = n_;
        ln.op.elems = emb;
        ln.op.passes = 2;
        ln2[static_cast<size_t>(c)] = add(std::move(ln), {sync2});
    }

    // FFN: FC1 (+GELU, fused into the PIM when FC1 maps there), FC2.
    std::vector<int64_t> gelu_tail(static_cast<size_t>(cores_));
    if (fc1_pim) {
        int64_t id = emit_pim_fc(prefix + "fc1", OpClass::ffn, m_.ffn_dim(), emb, n_, true,
                                 {ln2[0]});
        std::fill(gelu_tail.begin(), gelu_tail.end(), id);
    } else {
        auto fc1_tail = emit_mu_fc(prefix + "fc1", OpClass::ffn, m_.ffn_dim(), emb, n_,
                                   std::vector<int64_t>{ln2[0]});
        for (int64_t c = 0; c < cores_; ++c) {
            Command g;
            g.kind = CmdKind::VU;
            g.vu_op = VuOp::gelu;
            g.core = static_cast<int32_t>(c);
            g.op_class = OpClass::ffn;
            g.op.n_tokens = n_;
            g.op.elems = ceil_div(m_.ffn_dim(), cores_);
            gelu_tail[static_cast<size_t>(c)] = add(std::move(g), {fc1_tail[static_cast<size_t>(c)]});
        }
    }
    // SYNC 3/4: after GELU.
    int64_t sync3 = add_sync(gelu_tail, n_ * m_.ffn_dim() * m_.dtype_bytes);

    std::vector<int64_t> fc2_tail(static_cast<size_t>(cores_), 0);
    if (fc2_pim) {
        int64_t id = emit_pim_fc(prefix + "fc2", OpClass::ffn, emb, m_.ffn_dim(), n_, false,
                                 {sync3});
        std::fill(fc2_tail.begin(), fc2_tail.end(), id);
    } else {
        fc2_tail = emit_mu_fc(prefix + "fc2", OpClass::ffn, emb, m_.ffn_dim(), n_, {sync3});
    }
    std::vector<int64_t> res2(static_cast<size_t>(cores_));
    for (int64_t c = 0; c < cores_; ++c) {
        Command r;
        r.kind = CmdKind::VU;
        r.vu_op = VuOp::residual;
        r.core = static_cast<int32_t>(c);
        r.op_class = OpClass::residual;
        r.op.n_tokens = n_;
        r.op.elems = emb;
        res2[static_cast<size_t>(c)] = add(std::move(r), {fc2_tail[static_cast<size_t>(c)]});
    }
    // SYNC 4/4: after the second residual addition.
    int64_t sync4 = add_sync(res2, n_ * emb * m_.dtype_bytes);
    return std::vector<int64_t>(static_cast<size_t>(cores_), sync4);
}

void PlanBuilder::emit_head_stage(const std::vector<int64_t>& entry) {
    // Final layer norm, then the task head: LM head (matrix-vector over the
    // vocabulary, PIM when available) for GPT; a small span head for BERT.
    std::vector<int64_t> ln(static_cast<size_t>(cores_));
    for (int64_t c = 0; c < cores_; ++c) {
        Command f;
        f.kind = CmdKind::VU;
        f.vu_op = VuOp::layernorm;
        f.core = static_cast<int32_t>(c);
        f.op_class = OpClass::layer_norm;
        f.op.n_tokens = 1;
        f.op.elems = m_.embedding_dim;
        f.op.passes = 2;
        ln[static_cast<size_t>(c)] = add(std::move(f), entry);
    }
    if (m_.family == ModelFamily::gpt) {
        const ParamPlacement* lm = alloc_.find("lm_head");
        const bool lm_pim = pim_available_ && !opts_.force_fc_mu && lm &&
                            lm->region == Region::pim_rows;
        if (lm_pim) {
            emit_pim_fc("lm_head", OpClass::lm_head, m_.vocab_size, m_.embedding_dim, 1, false,
                        {ln[0]});
        } else {
            emit_mu_fc("lm_head", OpClass::lm_head, m_.vocab_size, m_.embedding_dim, 1,
                       std::vector<int64_t>{ln[0]});
        }
    } else {
        emit_mu_fc("task_head", OpClass::task_head, 2, m_.embedding_dim, n_,
                   std::vector<int64_t>{ln[0]});
    }
}

StagePlan PlanBuilder::build() {
    if (opts_.num_devices == 1 && m_.num_heads % hw_.num_cores != 0) {
        throw std::runtime_error(
            "attention heads (" + std::to_string(m_.num_heads) +
            ") not divisible by cores (" + std::to_string(hw_.num_cores) +
            "); trim the head count as done for GPT-2 XL (25 -> 24 heads)");
    }
    if (m_.family == ModelFamily::bert && stage_ == Stage::generation) {
        throw std::runtime_error("BERT models have no generation stage");
    }
    decide_fc_targets();

    // Rough scratch-pad residency check for the static schedule.
    const int64_t am_need =
        n_ * m_.embedding_dim * m_.dtype_bytes * 3 +
        n_ * std::max(seq_, n_) * m_.dtype_bytes +
        ceil_div(n_ * m_.ffn_dim() * m_.dtype_bytes, cores_);
    if (am_need > hw_.am_capacity) {
        throw std::runtime_error("activation scratch-pad exceeded: need " +
                                 std::to_string(am_need) + " bytes of " +
                                 std::to_string(hw_.am_capacity));
    }

    auto tails = emit_embedding({});
    std::vector<int64_t> entry = tails;
    for (int64_t b = 0; b < m_.num_blocks; ++b) {
        entry = emit_block(b, entry);
    }
    const bool head_now = m_.family == ModelFamily::bert || stage_ == Stage::generation ||
                          m_.output_tokens >= 1; // summarization emits the first token
    if (head_now) emit_head_stage(entry);

    if (auto cyc = topo_validate(plan_.cmds)) {
        throw std::runtime_error("compiler produced a dependency cycle (" +
                                 std::to_string(cyc->ids.size()) + " commands)");
    }
    return std::move(plan_);
}

} // namespace

StagePlan build_commands(const ModelConfig& model, const HardwareConfig& hw, Stage stage,
                         int64_t step, const AllocationPlan& alloc, const CompileOptions& opts) {
    PlanBuilder b(model, hw, stage, step, alloc, opts);
    return b.build();
}

std::string emit_plan_text(const StagePlan& plan) {
    std::ostringstream o;
    o << "# stage=" << to_string(plan.stage) << " step=" << plan.step << " n=" << plan.n_tokens
      << " seq=" << plan.seq_len << " syncs=" << plan.sync_count
      << " pim_macros=" << plan.pim_macro_count << "\n";
    for (const Command& c : plan.cmds) {
        o << c.id << ' ' << to_string(c.kind);
        switch (c.kind) {
            case CmdKind::MU_ATTN: o << (c.mu_op == MuAttnOp::qkt ? ":qkt" : ":sv"); break;
            case CmdKind::VU:
                o << ':'
                  << (c.vu_op == VuOp::layernorm      ? "layernorm"
                      : c.vu_op == VuOp::residual     ? "residual"
                      : c.vu_op == VuOp::softmax_masked ? "softmax_masked"
                      : c.vu_op == VuOp::gelu         ? "gelu"
                                                      : "concat");
                break;
            case CmdKind::DMA:
                o << ':'
                  << (c.dma_op == DmaOp::load        ? "load"
                      : c.dma_op == DmaOp::store     ? "store"
                      : c.dma_op == DmaOp::prefetch  ? "prefetch"
                                                     : "onchip_transpose");
                break;
            case CmdKind::PIM_MACRO: o << (c.pim_op == PimOp::fc_gelu ? ":fc_gelu" : ":fc"); break;
            default: break;
        }
        o << " core=" << c.core << " class=" << to_string(c.op_class);
        if (c.op.n_tokens) o << " n=" << c.op.n_tokens;
        if (c.op.weight_rows) o << " rows=" << c.op.weight_rows;
        if (c.op.weight_cols) o << " cols=" << c.op.weight_cols;
        if (c.op.bytes) o << " bytes=" << c.op.bytes;
        if (c.op.elems) o << " elems=" << c.op.elems;
        if (c.op.passes > 1) o << " passes=" << c.op.passes;
        if (c.offchip) o << " offchip";
        if (!c.tile_maps.empty()) o << " maps=" << c.tile_maps.size();
        o << " deps=";
        for (size_t i = 0; i < c.deps.size(); ++i) {
            if (i) o << ',';
            o << c.deps[i];
        }
        o << "\n";
    }
    return o.str();
}

} // namespace ianus
