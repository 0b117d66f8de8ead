#include "ianus/pim.hpp"

#include <algorithm>
#include <stdexcept>

namespace ianus {

PimCounts& PimCounts::operator+=(const PimCounts& o) {
    bank_activations += o.bank_activations;
    mac_bursts += o.mac_bursts;
    gb_writes += o.gb_writes;
    acc_reads += o.acc_reads;
    act_funcs += o.act_funcs;
    precharges += o.precharges;
    normal_reads += o.normal_reads;
    normal_writes += o.normal_writes;
    micro_issued += o.micro_issued;
    return *this;
}

PimCounts PimCounts::scaled(int64_t n) const {
    PimCounts s = *this;
    s.bank_activations *= n;
    s.mac_bursts *= n;
    s.gb_writes *= n;
    s.acc_reads *= n;
    s.act_funcs *= n;
    s.precharges *= n;
    s.normal_reads *= n;
    s.normal_writes *= n;
    s.micro_issued *= n;
    return s;
}

ChannelState::ChannelState(const HardwareConfig& hw, int32_t channel_id)
    : hw_(hw), channel_(channel_id), banks_(static_cast<size_t>(hw.banks_per_channel)) {}

time_ps ChannelState::all_banks_act_ok() const {
    time_ps t = 0;
    for (const auto& b : banks_) t = std::max(t, b.act_ok);
    return t;
}

void ChannelState::open_all(int64_t row, time_ps t) {
    const auto& tm = hw_.timing;
    for (auto& b : banks_) {
        b.phase = BankPhase::row_open;
        b.open_row = row;
        b.rd_ok = t + tm.trcdrd_ps();
        b.wr_ok = t + tm.trcdwr_ps();
        b.ras_ok = t + tm.tras_ps();
    }
}

void ChannelState::precharge_all(time_ps t) {
    const auto& tm = hw_.timing;
    for (auto& b : banks_) {
        b.phase = BankPhase::idle;
        b.open_row = -1;
        b.act_ok = t + tm.trp_ps();
    }
}

MacroResult ChannelState::run_micro_stream(std::span<const MicroPimCommand> cmds, time_ps start,
                                           const TraceFn& trace) {
    const auto& tm = hw_.timing;
    const time_ps tck = tm.tck_ps();
    const time_ps tccd = tm.tccd_l_ps();
    cmd_ok_ = std::max(cmd_ok_, start);
    col_ok_ = std::max(col_ok_, start);

    PimCounts before = counts_;
    time_ps last_pre = start;

    for (const MicroPimCommand& c : cmds) {
        time_ps t = cmd_ok_;
        switch (c.kind) {
            case MicroKind::WRITE_GB: {
                t = std::max({t, col_ok_, last_mac_end_});
                col_ok_ = t + tm.gb_write_ps();
                gb_ready_ = col_ok_;
                ++counts_.gb_writes;
                break;
            }
            case MicroKind::ACT_ALL_BANKS: {
                for (const auto& b : banks_) {
                    if (b.open_row != -1) {
                        throw std::runtime_error("PIM ACT_ALL_BANKS on open banks");
                    }
                }
                t = std::max(t, all_banks_act_ok());
                open_all(c.row, t);
                counts_.bank_activations += hw_.banks_per_channel;
                break;
            }
            case MicroKind::MAC_ALL_BANKS: {
                for (const auto& b : banks_) {
                    if (b.open_row != c.row) {
                        throw std::runtime_error("PIM MAC on wrong/closed row");
                    }
                }
                t = std::max({t, col_ok_, banks_.front().rd_ok, gb_ready_});
                for (auto& b : banks_) b.phase = BankPhase::pim_mac;
                col_ok_ = t + tm.mac_burst_ps();
                last_mac_end_ = col_ok_;
                ++counts_.mac_bursts;
                break;
            }
            case MicroKind::ACT_FUNC: {
                t = std::max(t, col_ok_);
                col_ok_ = t + hw_.gelu_lut_ns * kPsPerNs;
                ++counts_.act_funcs;
                break;
            }
            case MicroKind::READ_ACC: {
                t = std::max(t, col_ok_);
                col_ok_ = t + hw_.banks_per_channel * tccd; // one drain per bank, pipelined
                counts_.acc_reads += hw_.banks_per_channel;
                break;
            }
            case MicroKind::PRECHARGE_ALL: {
                time_ps ok = col_ok_; // column path drained before closing the row
                for (const auto& b : banks_) ok = std::max({ok, b.ras_ok, b.wr_recover});
                t = std::max(t, ok);
                precharge_all(t);
                counts_.precharges += hw_.banks_per_channel;
                last_pre = t;
                break;
            }
        }
        cmd_ok_ = t + tck;
        ++counts_.micro_issued;
        if (trace) trace(t, channel_, -1, to_string(c.kind), c.row, c.column);
    }

    MacroResult r;
    r.end = std::max(col_ok_, last_pre + tm.trp_ps());
    busy_until_ = std::max(busy_until_, r.end);
    r.counts = counts_;
    r.counts.bank_activations -= before.bank_activations;
    r.counts.mac_bursts -= before.mac_bursts;
    r.counts.gb_writes -= before.gb_writes;
    r.counts.acc_reads -= before.acc_reads;
    r.counts.act_funcs -= before.act_funcs;
    r.counts.precharges -= before.precharges;
    r.counts.normal_reads -= before.normal_reads;
    r.counts.normal_writes -= before.normal_writes;
    r.counts.micro_issued -= before.micro_issued;
    return r;
}

time_ps ChannelState::earliest_issue(const MemCommand& c, time_ps now) const {
    const BankState& b = banks_.at(static_cast<size_t>(c.bank));
    time_ps t = std::max(now, cmd_ok_);
    switch (c.kind) {
        case MemKind::ACT:
            t = std::max(t, b.act_ok);
            break;
        case MemKind::RD:
            t = std::max({t, col_ok_, b.rd_ok});
            break;
        case MemKind::WR:
            t = std::max({t, col_ok_, b.wr_ok});
            break;
        case MemKind::PRE:
            t = std::max({t, b.ras_ok, b.wr_recover});
            break;
    }
    return t;
}

void ChannelState::issue(const MemCommand& c, time_ps t, const TraceFn& trace) {
    const auto& tm = hw_.timing;
    if (t < earliest_issue(c, t)) {
        throw std::runtime_error(std::string("illegal ") + to_string(c.kind) + " issue: held by timing");
    }
    BankState& b = banks_.at(static_cast<size_t>(c.bank));
    switch (c.kind) {
        case MemKind::ACT:
            if (b.open_row != -1) throw std::runtime_error("ACT on open bank");
            b.phase = BankPhase::row_open;
            b.open_row = c.row;
            b.rd_ok = t + tm.trcdrd_ps();
            b.wr_ok = t + tm.trcdwr_ps();
            b.ras_ok = t + tm.tras_ps();
            ++counts_.bank_activations;
            break;
        case MemKind::RD:
            if (b.open_row != c.row) throw std::runtime_error("RD to closed/other row");
            col_ok_ = t + tm.tccd_l_ps();
            ++counts_.normal_reads;
            break;
        case MemKind::WR:
            if (b.open_row != c.row) throw std::runtime_error("WR to closed/other row");
            col_ok_ = t + tm.tccd_l_ps();
            b.wr_recover = t + tm.twr_ps();
            ++counts_.normal_writes;
            break;
        case MemKind::PRE:
            if (b.open_row == -1) throw std::runtime_error("PRE on idle bank");
            b.phase = BankPhase::idle;
            b.open_row = -1;
            b.act_ok = t + tm.trp_ps();
            ++counts_.precharges;
            break;
    }
    cmd_ok_ = t + tm.tck_ps();
    busy_until_ = std::max(busy_until_, cmd_ok_);
    if (trace) trace(t, channel_, c.bank, to_string(c.kind), c.row, c.column);
}

time_ps ChannelState::service_requests(std::span<const Request> reqs, time_ps start,
                                       const TraceFn& trace) {
    // FCFS over requests; a request reuses an open row when it can (row hit),
    // otherwise closes and reopens. Strict priority between the pim queue and
    // this path is enforced by the caller: a macro owns the channel outright.
    time_ps now = start;
    for (const Request& r : reqs) {
        const BankState& b = bank(r.bank);
        if (b.open_row != r.row) {
            if (b.open_row != -1) {
                MemCommand pre{MemKind::PRE, channel_, r.bank, b.open_row, 0};
                time_ps t = earliest_issue(pre, now);
                issue(pre, t, trace);
                now = t;
            }
            MemCommand act{MemKind::ACT, channel_, r.bank, r.row, 0};
            time_ps t = earliest_issue(act, now);
            issue(act, t, trace);
            now = t;
        }
        MemCommand col{r.is_write ? MemKind::WR : MemKind::RD, channel_, r.bank, r.row, r.column};
        time_ps t = earliest_issue(col, now);
        issue(col, t, trace);
        now = t;
    }
    return std::max(now, busy_until_);
}

MacroResult micro_stream_timing(std::span<const MicroPimCommand> cmds, const HardwareConfig& hw) {
    ChannelState ch(hw, 0);
    return ch.run_micro_stream(cmds, 0);
}

} // namespace ianus
