#include "ianus/engine.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "ianus/trace.hpp"
#include "json.hpp"

namespace ianus {

EnergyReport account_energy(const EnergyCounters& c, const EnergyParams& e) {
    EnergyReport r;
    r.core_compute = static_cast<double>(c.mu_macs) * e.e_mu_mac +
                     static_cast<double>(c.vu_lane_ops) * e.e_vu_op;
    // Standard DRAM operations: the NPU's own memory traffic.
    r.normal_mem = static_cast<double>(c.dram_col_reads) * e.e_dram_read +
                   static_cast<double>(c.dram_col_writes) * e.e_dram_write +
                   static_cast<double>(c.dram_activations) * e.e_dram_activate;
    // PIM operations: compute column accesses at 3x a read, plus the macro's
    // own input delivery, accumulator drains and row activations.
    r.pim_ops = static_cast<double>(c.pim_mac_bursts + c.pim_act_funcs) * e.e_pim_op +
                static_cast<double>(c.pim_gb_writes) * e.e_dram_write +
                static_cast<double>(c.pim_acc_reads) * e.e_dram_read +
                static_cast<double>(c.pim_activations) * e.e_dram_activate;
    return r;
}

namespace {

constexpr time_ps kInf = INT64_MAX / 4;

struct MacroKey {
    int64_t rows;
    int64_t cols;
    int64_t nch;
    int64_t n;
    bool gelu;
    bool operator<(const MacroKey& o) const {
        return std::tie(rows, cols, nch, n, gelu) < std::tie(o.rows, o.cols, o.nch, o.n, o.gelu);
    }
};

struct Interval {
    time_ps s = 0;
    time_ps e = 0;
};

time_ps merged_length(std::vector<Interval>& v) {
    if (v.empty()) return 0;
    std::sort(v.begin(), v.end(), [](const Interval& a, const Interval& b) { return a.s < b.s; });
    time_ps total = 0, cs = v[0].s, ce = v[0].e;
    for (size_t i = 1; i < v.size(); ++i) {
        if (v[i].s > ce) {
            total += ce - cs;
            cs = v[i].s;
            ce = v[i].e;
        } else {
            ce = std::max(ce, v[i].e);
        }
    }
    return total + (ce - cs);
}

time_ps sorted_overlap(const std::vector<Interval>& a, const std::vector<Interval>& b) {
    time_ps total = 0;
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const time_ps s = std::max(a[i].s, b[j].s);
        const time_ps e = std::min(a[i].e, b[j].e);
        if (s < e) total += e - s;
        if (a[i].e < b[j].e) ++i;
        else ++j;
    }
    return total;
}

struct RunCtx {
    const HardwareConfig& hw;
    const RunOptions& opts;
    SimReport& rep;
    std::map<MacroKey, MacroResult> memo;
    std::ofstream trace_out;
    TraceValidator* validator = nullptr;
    bool tracing = false;

    RunCtx(const HardwareConfig& h, const RunOptions& o, SimReport& r) : hw(h), opts(o), rep(r) {}
};

class StageExec {
public:
    StageExec(const StagePlan& plan, RunCtx& ctx, time_ps t0)
        : plan_(plan), ctx_(ctx), hw_(ctx.hw), t0_(t0) {
        init();
    }

    time_ps run();
    const std::array<time_ps, kNumOpClasses>& class_busy() const { return class_busy_; }

private:
    enum class St : uint8_t { waiting, queued, running, done };

    struct Rt {
        int32_t remaining = 0;
        St state = St::waiting;
        time_ps ready = -1;
        time_ps start = -1;
        time_ps end = -1;
    };

    void init();
    void dispatch(size_t i, time_ps t);
    void kick_unit(int32_t core, Unit u, time_ps t);
    void kick_bus(time_ps t);
    void kick_pcu(time_ps t);
    void start_span(size_t i, time_ps s, time_ps e);
    void complete(size_t i, time_ps t);
    void schedule_end(size_t i, time_ps e);
    MacroResult run_map(const TileMap& tm, const Command& c, time_ps start);
    TraceFn trace_fn();

    size_t uidx(int32_t core, Unit u) const {
        return static_cast<size_t>(core) * 4 + static_cast<size_t>(u);
    }

    void pop_issue(size_t ui) {
        unit_q_[ui].pop_front();
        if (!unit_of_[ui].empty()) {
            unit_q_[ui].push_back(unit_of_[ui].front());
            unit_of_[ui].pop_front();
        }
    }

    const StagePlan& plan_;
    RunCtx& ctx_;
    const HardwareConfig& hw_;
    time_ps t0_;

    std::vector<Rt> rt_;
    std::vector<std::vector<size_t>> dependents_;
    std::vector<size_t> id2idx_; // ids are dense from 1

    using Ev = std::tuple<time_ps, int64_t, size_t>;
    std::priority_queue<Ev, std::vector<Ev>, std::greater<>> events_;
    int64_t seq_ = 0;

    std::vector<std::deque<size_t>> unit_q_;   // issue queues, capped per unit
    std::vector<std::deque<size_t>> unit_of_;  // pending-side overflow, ready order
    std::vector<time_ps> unit_free_;           // cores x units
    std::vector<bool> unit_running_;

    std::deque<size_t> bus_q_;
    bool bus_busy_ = false;
    time_ps bus_current_end_ = 0;

    std::deque<size_t> pcu_q_;
    bool pcu_busy_ = false;
    time_ps pcu_prev_end_ = 0;

    std::vector<time_ps> channel_free_;

    std::vector<std::vector<Interval>> class_iv_;
    std::vector<Interval> dma_iv_;
    std::vector<Interval> pim_iv_;
    std::array<time_ps, kNumOpClasses> class_busy_{};

    std::vector<int64_t> outstanding_;
    int64_t done_ = 0;
    time_ps last_time_ = 0;
};

void StageExec::init() {
    const auto& cmds = plan_.cmds;
    rt_.resize(cmds.size());
    dependents_.resize(cmds.size());
    id2idx_.assign(cmds.size() + 2, SIZE_MAX);
    for (size_t i = 0; i < cmds.size(); ++i) {
        if (static_cast<size_t>(cmds[i].id) >= id2idx_.size()) {
            id2idx_.resize(static_cast<size_t>(cmds[i].id) + 1, SIZE_MAX);
        }
        id2idx_[static_cast<size_t>(cmds[i].id)] = i;
    }
    for (size_t i = 0; i < cmds.size(); ++i) {
        for (int64_t d : cmds[i].deps) {
            const size_t j = id2idx_.at(static_cast<size_t>(d));
            if (j == SIZE_MAX) continue;
            dependents_[j].push_back(i);
            ++rt_[i].remaining;
        }
    }
    unit_q_.resize(static_cast<size_t>(hw_.num_cores) * 4);
    unit_of_.resize(static_cast<size_t>(hw_.num_cores) * 4);
    unit_free_.assign(static_cast<size_t>(hw_.num_cores) * 4, t0_);
    unit_running_.assign(static_cast<size_t>(hw_.num_cores) * 4, false);
    channel_free_.assign(static_cast<size_t>(hw_.num_channels), t0_);
    class_iv_.resize(kNumOpClasses);
    outstanding_.assign(static_cast<size_t>(hw_.num_cores), 0);
    last_time_ = t0_;
}

TraceFn StageExec::trace_fn() {
    if (!ctx_.tracing) return nullptr;
    return [this](time_ps t, int32_t ch, int32_t bank, const char* kind, int64_t row,
                  int64_t col) {
        if (ctx_.trace_out.is_open()) {
            ctx_.trace_out << t << ',' << ch << ',' << bank << ',' << kind << ',' << row << ','
                           << col << '\n';
        }
        if (ctx_.validator) ctx_.validator->observe(t, ch, bank, kind, row, col);
    };
}

MacroResult StageExec::run_map(const TileMap& tm, const Command& c, time_ps start) {
    const int64_t nch = static_cast<int64_t>(tm.channels.size());
    if (!ctx_.tracing) {
        MacroKey key{tm.rows, tm.cols, nch, std::max<int64_t>(1, c.op.n_tokens),
                     c.pim_op == PimOp::fc_gelu};
        auto it = ctx_.memo.find(key);
        if (it == ctx_.memo.end()) {
            MicroStream ms = expand_macro(c, tm, hw_);
            MacroResult r = micro_stream_timing(ms.cmds, hw_);
            it = ctx_.memo.emplace(key, r).first;
        }
        MacroResult r = it->second;
        r.end += start;
        return r;
    }
    MicroStream ms = expand_macro(c, tm, hw_);
    ChannelState ch(hw_, ms.broadcast ? kBroadcastChannel : ms.channels.front());
    return ch.run_micro_stream(ms.cmds, start, trace_fn());
}

void StageExec::schedule_end(size_t i, time_ps e) {
    rt_[i].end = e;
    events_.emplace(e, seq_++, i);
}

void StageExec::start_span(size_t i, time_ps s, time_ps e) {
    rt_[i].state = St::running;
    rt_[i].start = s;
    const Command& c = plan_.cmds[i];
    class_iv_[static_cast<size_t>(c.op_class)].push_back({s, e});
    schedule_end(i, e);
}

void StageExec::dispatch(size_t i, time_ps t) {
    Rt& r = rt_[i];
    r.state = St::queued;
    r.ready = t;
    const Command& c = plan_.cmds[i];
    if (c.core >= 0 && c.core < hw_.num_cores && c.kind != CmdKind::SYNC &&
        c.kind != CmdKind::PIM_MACRO) {
        auto& o = outstanding_[static_cast<size_t>(c.core)];
        ++o;
        ctx_.rep.max_pending_occupancy = std::max(ctx_.rep.max_pending_occupancy, o);
    }
    switch (c.kind) {
        case CmdKind::SYNC: {
            time_ps dur = (hw_.sync_barrier_ns + hw_.noc_latency_ns) * kPsPerNs +
                          bytes_to_ps(c.op.bytes, hw_.ext_bandwidth());
            ctx_.rep.noc_bytes += c.op.bytes;
            if (c.cross_device && ctx_.rep.num_devices > 1) {
                const int64_t xfer = c.op.bytes * (ctx_.rep.num_devices - 1) /
                                     ctx_.rep.num_devices;
                dur += 2 * hw_.pcie_latency_ns * kPsPerNs + bytes_to_ps(xfer, hw_.pcie_bw);
                ctx_.rep.pcie_bytes += xfer;
            }
            start_span(i, t, t + dur);
            break;
        }
        case CmdKind::PIM_MACRO:
            pcu_q_.push_back(i);
            kick_pcu(t);
            break;
        default: {
            const Unit u = unit_for(c);
            const size_t ui = uidx(c.core, u);
            // Ready commands enter the unit's issue queue while it has slots;
            // the rest back up in the pending queue in ready order.
            if (static_cast<int64_t>(unit_q_[ui].size()) < hw_.issue_queue_slots) {
                unit_q_[ui].push_back(i);
            } else {
                unit_of_[ui].push_back(i);
            }
            ctx_.rep.max_issue_occupancy = std::max(
                ctx_.rep.max_issue_occupancy, static_cast<int64_t>(unit_q_[ui].size()));
            kick_unit(c.core, u, t);
            break;
        }
    }
}

void StageExec::kick_unit(int32_t core, Unit u, time_ps t) {
    const size_t ui = uidx(core, u);
    if (unit_running_[ui]) return;
    auto& q = unit_q_[ui];
    if (q.empty()) return;
    const size_t i = q.front();
    const Command& c = plan_.cmds[i];
    time_ps s = std::max({t, rt_[i].ready, unit_free_[ui]});

    if (c.kind == CmdKind::DMA && c.dma_op == DmaOp::onchip_transpose) {
        const size_t other = uidx(core, Unit::DMA_OUT);
        if (unit_running_[other]) return; // retried when the store engine frees
        s = std::max(s, unit_free_[other]);
        pop_issue(ui);
        const time_ps dur = cycles_to_ps(transpose_onchip_cycles(c.op.bytes, hw_),
                                         hw_.npu_freq_hz);
        unit_running_[ui] = unit_running_[other] = true;
        unit_free_[ui] = unit_free_[other] = s + dur;
        start_span(i, s, s + dur);
        return;
    }

    if (c.kind == CmdKind::DMA && c.offchip) {
        pop_issue(ui);
        unit_running_[ui] = true; // engine held until the bus transfer drains
        bus_q_.push_back(i);
        kick_bus(s);
        return;
    }

    pop_issue(ui);
    unit_running_[ui] = true;
    time_ps dur = 0;
    if (c.kind == CmdKind::MU_FC || c.kind == CmdKind::MU_ATTN) {
        dur = cycles_to_ps(mu_execute(c, hw_).cycles, hw_.npu_freq_hz);
    } else if (c.kind == CmdKind::VU) {
        dur = cycles_to_ps(vu_execute(c, hw_).cycles, hw_.npu_freq_hz);
    } else { // on-chip DMA without bus (none currently)
        dur = 0;
    }
    unit_free_[ui] = s + dur;
    start_span(i, s, s + dur);
}

void StageExec::kick_bus(time_ps t) {
    if (bus_busy_ || bus_q_.empty()) return;
    // Unified memory: a ready or active PIM macro holds every off-chip DMA in
    // wait, so PIM execution is never interrupted.
    if (hw_.memory_mode == MemoryMode::unified && (pcu_busy_ || !pcu_q_.empty())) return;
    const size_t i = bus_q_.front();
    bus_q_.pop_front();
    const Command& c = plan_.cmds[i];
    time_ps s = std::max(t, rt_[i].ready);
    int64_t bw = hw_.ext_bandwidth();
    if (hw_.memory_mode == MemoryMode::partitioned) {
        bw = bw * (hw_.num_channels - hw_.pim_compute_channels) / hw_.num_channels;
    }
    const time_ps dur = hw_.dma_transfer_overhead_ns * kPsPerNs + bytes_to_ps(c.op.bytes, bw);
    bus_busy_ = true;
    bus_current_end_ = s + dur;
    ctx_.rep.dma_bytes += c.op.bytes;
    dma_iv_.push_back({s, s + dur});
    if (c.dma_op == DmaOp::store) {
        ctx_.rep.counters.dram_col_writes += ceil_div(c.op.bytes, hw_.column_bytes);
    } else {
        ctx_.rep.counters.dram_col_reads += ceil_div(c.op.bytes, hw_.column_bytes);
    }
    ctx_.rep.counters.dram_activations += ceil_div(c.op.bytes, hw_.row_size);
    start_span(i, s, s + dur);
}

void StageExec::kick_pcu(time_ps t) {
    if (pcu_busy_ || pcu_q_.empty()) return;
    const size_t i = pcu_q_.front();
    pcu_q_.pop_front();
    const Command& c = plan_.cmds[i];
    time_ps s = std::max({t, rt_[i].ready, pcu_prev_end_});
    // An in-flight off-chip transfer finishes before the macro takes the
    // memory; afterwards the bus stays blocked until the macro completes.
    if (bus_busy_) s = std::max(s, bus_current_end_);
    s += hw_.pcu_launch_ns * kPsPerNs;

    time_ps exec_end = s;
    for (int32_t mi : c.tile_maps) {
        const TileMap& tm = plan_.tile_maps.at(static_cast<size_t>(mi));
        time_ps map_start = s;
        for (int32_t ch : tm.channels) {
            map_start = std::max(map_start, channel_free_[static_cast<size_t>(ch)]);
        }
        MacroResult r = run_map(tm, c, map_start);
        for (int32_t ch : tm.channels) channel_free_[static_cast<size_t>(ch)] = r.end;
        exec_end = std::max(exec_end, r.end);

        const bool broadcast = static_cast<int64_t>(tm.channels.size()) == hw_.pim_compute_channels;
        const PimCounts counts =
            broadcast ? r.counts.scaled(hw_.pim_compute_channels) : r.counts;
        auto& ec = ctx_.rep.counters;
        ec.pim_mac_bursts += counts.mac_bursts;
        ec.pim_act_funcs += counts.act_funcs;
        ec.pim_gb_writes += counts.gb_writes;
        ec.pim_acc_reads += counts.acc_reads;
        ec.pim_activations += counts.bank_activations;
        ctx_.rep.micro_commands += counts.micro_issued;
    }
    pcu_busy_ = true;
    pcu_prev_end_ = exec_end;
    pim_iv_.push_back({s, exec_end});
    ctx_.rep.pim_busy += exec_end - s;
    ++ctx_.rep.pim_macros;
    start_span(i, s, exec_end + hw_.noc_latency_ns * kPsPerNs);
}

void StageExec::complete(size_t i, time_ps t) {
    Rt& r = rt_[i];
    r.state = St::done;
    ++done_;
    const Command& c = plan_.cmds[i];

    if (c.core >= 0 && c.core < hw_.num_cores && c.kind != CmdKind::SYNC &&
        c.kind != CmdKind::PIM_MACRO) {
        --outstanding_[static_cast<size_t>(c.core)];
    }

    switch (c.kind) {
        case CmdKind::MU_FC:
        case CmdKind::MU_ATTN: {
            ctx_.rep.counters.mu_macs += mu_execute(c, hw_).macs;
            const size_t ui = uidx(c.core, Unit::MU);
            unit_running_[ui] = false;
            ctx_.rep.unit_busy[ui] += r.end - r.start;
            kick_unit(c.core, Unit::MU, t);
            break;
        }
        case CmdKind::VU: {
            ctx_.rep.counters.vu_lane_ops += vu_execute(c, hw_).lane_ops;
            const size_t ui = uidx(c.core, Unit::VU);
            unit_running_[ui] = false;
            ctx_.rep.unit_busy[ui] += r.end - r.start;
            kick_unit(c.core, Unit::VU, t);
            break;
        }
        case CmdKind::DMA: {
            if (c.dma_op == DmaOp::onchip_transpose) {
                for (Unit u : {Unit::DMA_IN, Unit::DMA_OUT}) {
                    const size_t ui = uidx(c.core, u);
                    unit_running_[ui] = false;
                    ctx_.rep.unit_busy[ui] += r.end - r.start;
                }
                kick_unit(c.core, Unit::DMA_IN, t);
                kick_unit(c.core, Unit::DMA_OUT, t);
            } else {
                const Unit u = unit_for(c);
                const size_t ui = uidx(c.core, u);
                unit_running_[ui] = false;
                unit_free_[ui] = t;
                ctx_.rep.unit_busy[ui] += r.end - r.start;
                bus_busy_ = false;
                kick_bus(t);
                kick_pcu(t);
                kick_unit(c.core, u, t);
                // A transpose parked at the head of the load engine may have
                // been waiting for the store engine.
                if (u == Unit::DMA_OUT) kick_unit(c.core, Unit::DMA_IN, t);
            }
            break;
        }
        case CmdKind::PIM_MACRO:
            pcu_busy_ = false;
            kick_pcu(t);
            kick_bus(t);
            break;
        case CmdKind::SYNC:
            break;
    }

    for (size_t j : dependents_[i]) {
        if (--rt_[j].remaining == 0) dispatch(j, t);
    }
}

time_ps StageExec::run() {
    for (size_t i = 0; i < rt_.size(); ++i) {
        if (rt_[i].remaining == 0) dispatch(i, t0_);
    }
    while (!events_.empty()) {
        auto [t, seq, i] = events_.top();
        events_.pop();
        last_time_ = std::max(last_time_, t);
        complete(i, t);
    }
    if (done_ != static_cast<int64_t>(rt_.size())) {
        std::ostringstream o;
        o << "engine deadlock: " << rt_.size() - static_cast<size_t>(done_)
          << " commands never completed; first stuck:";
        int listed = 0;
        for (size_t i = 0; i < rt_.size() && listed < 8; ++i) {
            if (rt_[i].state != St::done) {
                o << " id=" << plan_.cmds[i].id << "(" << to_string(plan_.cmds[i].kind)
                  << ",deps_left=" << rt_[i].remaining
                  << ",st=" << static_cast<int>(rt_[i].state) << ")";
                ++listed;
            }
        }
        o << " [bus_busy=" << bus_busy_ << " bus_q=" << bus_q_.size()
          << " pcu_busy=" << pcu_busy_ << " pcu_q=" << pcu_q_.size();
        for (size_t u = 0; u < unit_q_.size(); ++u) {
            if (!unit_q_[u].empty() || unit_running_[u]) {
                o << " u" << u << "(run=" << unit_running_[u] << ",q=" << unit_q_[u].size()
                  << ",head=" << (unit_q_[u].empty() ? -1 : plan_.cmds[unit_q_[u].front()].id)
                  << ")";
            }
        }
        o << "]";
        throw std::runtime_error(o.str());
    }
    for (size_t k = 0; k < kNumOpClasses; ++k) {
        class_busy_[k] = merged_length(class_iv_[k]);
    }
    ctx_.rep.dma_pim_overlap_ps += sorted_overlap(dma_iv_, pim_iv_);
    return last_time_;
}

void add_stage_stats(StageStats& st, const std::array<time_ps, kNumOpClasses>& busy,
                     time_ps wall) {
    st.wall += wall;
    time_ps sum = 0;
    for (size_t k = 0; k < kNumOpClasses; ++k) {
        st.class_busy[k] += busy[k];
        sum += busy[k];
    }
    if (sum > 0) {
        for (size_t k = 0; k < kNumOpClasses; ++k) {
            st.class_attributed[k] +=
                static_cast<time_ps>(static_cast<double>(busy[k]) / static_cast<double>(sum) *
                                     static_cast<double>(wall));
        }
    }
}

} // namespace

AllocationPlan plan_allocation_sharded(const ModelConfig& model, const HardwareConfig& hw,
                                       MemoryMode mode, int64_t devices, bool enforce_capacity) {
    return plan_allocation(model, hw, mode, devices, enforce_capacity);
}

time_ps simulate_stage(const StagePlan& plan, const HardwareConfig& hw, SimReport& rep) {
    static const RunOptions defaults;
    if (rep.unit_busy.empty()) rep.unit_busy.assign(static_cast<size_t>(hw.num_cores) * 4, 0);
    if (rep.num_devices <= 0) rep.num_devices = 1;
    RunCtx ctx(hw, defaults, rep);
    StageExec exec(plan, ctx, 0);
    const time_ps wall = exec.run();
    add_stage_stats(plan.stage == Stage::summarization ? rep.summ : rep.gen, exec.class_busy(),
                    wall);
    rep.total_ps += wall;
    rep.energy = account_energy(rep.counters, hw.energy);
    return wall;
}

SimReport run(const ModelConfig& model_in, const HardwareConfig& hw_in, const RunOptions& opts) {
    ModelConfig model = model_in;
    model.validate();
    HardwareConfig hw = hw_in;
    if (hw.memory_mode == MemoryMode::partitioned) {
        // Half the channels carry PUs, the other half is the NPU's own DRAM.
        hw.pim_compute_channels = std::max<int64_t>(1, hw.num_channels / 2);
    }
    hw.validate();

    SimReport rep;
    rep.model_name = model.name;
    rep.hw_name = hw.name;
    rep.mode = hw.memory_mode;
    rep.gen_variant = opts.gen_variant;
    rep.policy = opts.policy;
    rep.num_devices = opts.num_devices;
    rep.input_tokens = model.input_tokens;
    rep.output_tokens = model.output_tokens;
    rep.unit_busy.assign(static_cast<size_t>(hw.num_cores) * 4, 0);

    AllocationPlan alloc =
        plan_allocation(model, hw, hw.memory_mode, opts.num_devices, !opts.ignore_capacity);
    rep.fragmentation_bytes = alloc.fragmentation_bytes;

    RunCtx ctx(hw, opts, rep);
    TraceValidator validator(hw);
    if (!opts.trace_path.empty()) {
        ctx.trace_out.open(opts.trace_path);
        if (!ctx.trace_out) throw std::runtime_error("cannot open trace file " + opts.trace_path);
        ctx.tracing = true;
    }
    if (opts.validate) {
        ctx.validator = &validator;
        ctx.tracing = true;
    }

    CompileOptions copts;
    copts.gen_variant = opts.gen_variant;
    copts.policy = opts.policy;
    copts.force_fc_mu = opts.force_fc_mu || hw.memory_mode == MemoryMode::plain;
    copts.force_fc_pim = opts.force_fc_pim;
    copts.num_devices = opts.num_devices;

    time_ps cursor = 0;
    {
        StagePlan plan = build_commands(model, hw, Stage::summarization, 0, alloc, copts);
        StageExec exec(plan, ctx, cursor);
        const time_ps end = exec.run();
        add_stage_stats(rep.summ, exec.class_busy(), end - cursor);
        cursor = end;
    }
    rep.summarization_ps = cursor;

    rep.gen_steps = model.family == ModelFamily::gpt ? model.output_tokens - 1 : 0;
    for (int64_t k = 1; k <= rep.gen_steps; ++k) {
        StagePlan plan = build_commands(model, hw, Stage::generation, k, alloc, copts);
        if (k == 1) rep.qkt_pim_row_utilization = plan.attention.qkt_pim_row_utilization;
        StageExec exec(plan, ctx, cursor);
        const time_ps end = exec.run();
        add_stage_stats(rep.gen, exec.class_busy(), end - cursor);
        cursor = end;
    }
    rep.generation_ps = cursor - rep.summarization_ps;
    rep.total_ps = cursor;
    if (rep.gen_steps > 0) rep.per_gen_token_ps = rep.generation_ps / rep.gen_steps;

    for (size_t k = 0; k < kNumOpClasses; ++k) {
        rep.class_busy[k] = rep.summ.class_busy[k] + rep.gen.class_busy[k];
    }
    rep.energy = account_energy(rep.counters, hw.energy);
    if (opts.validate) {
        rep.validation_violations = static_cast<int64_t>(validator.violations().size());
    }
    return rep;
}

SimReport run_multi_device(const ModelConfig& model, const HardwareConfig& hw, int64_t n_devices,
                           const RunOptions& opts_in) {
    RunOptions opts = opts_in;
    opts.num_devices = std::max<int64_t>(1, n_devices);
    return run(model, hw, opts);
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

namespace {
const char* kClassNames[kNumOpClasses] = {"embed",      "fc_qkv",   "self_attn", "fc_proj",
                                          "ffn",        "layer_norm", "residual",  "lm_head",
                                          "task_head",  "sync",     "other"};
} // namespace

std::string SimReport::to_json() const {
    nlohmann::json j;
    j["model"] = model_name;
    j["hardware"] = hw_name;
    j["mode"] = to_string(mode);
    j["gen_variant"] = to_string(gen_variant);
    j["policy"] = policy == SchedulingPolicy::pas ? "pas" : "naive";
    j["devices"] = num_devices;
    j["input_tokens"] = input_tokens;
    j["output_tokens"] = output_tokens;
    j["total_ns"] = total_ps / 1000.0;
    j["summarization_ns"] = summarization_ps / 1000.0;
    j["generation_ns"] = generation_ps / 1000.0;
    j["gen_steps"] = gen_steps;
    j["per_gen_token_ns"] = per_gen_token_ps / 1000.0;
    for (size_t k = 0; k < kNumOpClasses; ++k) {
        j["class_busy_ns"][kClassNames[k]] = class_busy[k] / 1000.0;
        j["summ_class_busy_ns"][kClassNames[k]] = summ.class_busy[k] / 1000.0;
        j["gen_class_busy_ns"][kClassNames[k]] = gen.class_busy[k] / 1000.0;
        j["gen_class_attributed_ns"][kClassNames[k]] = gen.class_attributed[k] / 1000.0;
    }
    j["pim_busy_ns"] = pim_busy / 1000.0;
    j["energy_j"]["core_compute"] = energy.core_compute;
    j["energy_j"]["normal_mem"] = energy.normal_mem;
    j["energy_j"]["pim_ops"] = energy.pim_ops;
    j["energy_j"]["total"] = energy.total();
    j["counters"]["mu_macs"] = counters.mu_macs;
    j["counters"]["vu_lane_ops"] = counters.vu_lane_ops;
    j["counters"]["dram_col_reads"] = counters.dram_col_reads;
    j["counters"]["dram_col_writes"] = counters.dram_col_writes;
    j["counters"]["dram_activations"] = counters.dram_activations;
    j["counters"]["pim_mac_bursts"] = counters.pim_mac_bursts;
    j["counters"]["pim_act_funcs"] = counters.pim_act_funcs;
    j["counters"]["pim_gb_writes"] = counters.pim_gb_writes;
    j["counters"]["pim_acc_reads"] = counters.pim_acc_reads;
    j["counters"]["pim_activations"] = counters.pim_activations;
    j["dma_pim_overlap_ns"] = dma_pim_overlap_ps / 1000.0;
    j["pim_macros"] = pim_macros;
    j["micro_commands"] = micro_commands;
    j["dma_bytes"] = dma_bytes;
    j["noc_bytes"] = noc_bytes;
    j["pcie_bytes"] = pcie_bytes;
    j["max_pending_occupancy"] = max_pending_occupancy;
    j["max_issue_occupancy"] = max_issue_occupancy;
    j["fragmentation_bytes"] = fragmentation_bytes;
    j["qkt_pim_row_utilization"] = qkt_pim_row_utilization;
    j["validation_violations"] = validation_violations;
    return j.dump(2);
}

std::string SimReport::to_text() const {
    std::ostringstream o;
    auto ms = [](time_ps t) { return static_cast<double>(t) / 1e9; };
    o << "model " << model_name << "  hw " << hw_name << "  mode " << to_string(mode)
      << "  variant " << to_string(gen_variant) << "  policy "
      << (policy == SchedulingPolicy::pas ? "pas" : "naive") << "  devices " << num_devices
      << "\n";
    o << "tokens in/out " << input_tokens << "/" << output_tokens << "\n";
    o << std::fixed << std::setprecision(4);
    o << "total          " << ms(total_ps) << " ms\n";
    o << "  summarization " << ms(summarization_ps) << " ms\n";
    o << "  generation    " << ms(generation_ps) << " ms (" << gen_steps << " steps, "
      << ms(per_gen_token_ps) << " ms/token)\n";
    o << "class busy (ms, union over run):\n";
    for (size_t k = 0; k < kNumOpClasses; ++k) {
        if (!class_busy[k]) continue;
        o << "  " << std::left << std::setw(11) << kClassNames[k] << std::right << ms(class_busy[k])
          << "\n";
    }
    o << "pim busy " << ms(pim_busy) << " ms, macros " << pim_macros << ", micro "
      << micro_commands << "\n";
    o << "energy (J): core " << energy.core_compute << ", mem " << energy.normal_mem << ", pim "
      << energy.pim_ops << ", total " << energy.total() << "\n";
    o << "dma/pim overlap " << ms(dma_pim_overlap_ps) << " ms; dma " << dma_bytes << " B; noc "
      << noc_bytes << " B; pcie " << pcie_bytes << " B\n";
    return o.str();
}

std::string SimReport::csv_header() {
    std::ostringstream o;
    o << "model,mode,variant,policy,devices,in_tokens,out_tokens,total_ns,summarization_ns,"
         "generation_ns,gen_steps,per_gen_token_ns";
    for (size_t k = 0; k < kNumOpClasses; ++k) o << ",busy_" << kClassNames[k] << "_ns";
    for (size_t k = 0; k < kNumOpClasses; ++k) o << ",gen_busy_" << kClassNames[k] << "_ns";
    o << ",energy_core_j,energy_mem_j,energy_pim_j,energy_total_j,dma_pim_overlap_ns,pim_macros,"
         "micro_commands,qkt_pim_row_utilization";
    return o.str();
}

std::string SimReport::to_csv_row() const {
    std::ostringstream o;
    o << model_name << ',' << to_string(mode) << ',' << to_string(gen_variant) << ','
      << (policy == SchedulingPolicy::pas ? "pas" : "naive") << ',' << num_devices << ','
      << input_tokens << ',' << output_tokens << ',' << total_ps / 1000.0 << ','
      << summarization_ps / 1000.0 << ',' << generation_ps / 1000.0 << ',' << gen_steps << ','
      << per_gen_token_ps / 1000.0;
    for (size_t k = 0; k < kNumOpClasses; ++k) o << ',' << class_busy[k] / 1000.0;
    for (size_t k = 0; k < kNumOpClasses; ++k) o << ',' << gen.class_busy[k] / 1000.0;
    o << ',' << energy.core_compute << ',' << energy.normal_mem << ',' << energy.pim_ops << ','
      << energy.total() << ',' << dma_pim_overlap_ps / 1000.0 << ',' << pim_macros << ','
      << micro_commands << ',' << qkt_pim_row_utilization;
    return o.str();
}

} // namespace ianus
