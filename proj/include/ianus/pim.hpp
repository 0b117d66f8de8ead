#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ianus/config.hpp"
#include "ianus/isa.hpp"

namespace ianus {

enum class BankPhase : uint8_t { idle, activating, row_open, pim_mac, precharging };

struct BankState {
    BankPhase phase = BankPhase::idle;
    int64_t open_row = -1;
    time_ps act_ok = 0;     // earliest next ACT (tRP after the last PRE)
    time_ps rd_ok = 0;      // earliest column read / MAC after ACT (tRCDRD)
    time_ps wr_ok = 0;      // earliest column write after ACT (tRCDWR)
    time_ps ras_ok = 0;     // earliest PRE after ACT (tRAS)
    time_ps wr_recover = 0; // earliest PRE after the last WR (tWR)
};

// Energy-relevant event counts for one executed stream (single channel).
struct PimCounts {
    int64_t bank_activations = 0; // per-bank row activations
    int64_t mac_bursts = 0;       // MAC_ALL_BANKS issues (per channel)
    int64_t gb_writes = 0;
    int64_t acc_reads = 0; // per-bank column-read equivalents from READ_ACC
    int64_t act_funcs = 0;
    int64_t precharges = 0; // per-bank
    int64_t normal_reads = 0;
    int64_t normal_writes = 0;
    int64_t micro_issued = 0;

    PimCounts& operator+=(const PimCounts& o);
    PimCounts scaled(int64_t channels) const;
};

struct MacroResult {
    time_ps end = 0;
    PimCounts counts;
};

using TraceFn = std::function<void(time_ps, int32_t channel, int32_t bank, const char* kind,
                                   int64_t row, int64_t column)>;

// One memory channel: sixteen bank state machines, the per-channel global
// buffer, the PU accumulators, and the unified controller that serves both
// micro PIM commands and normal memory commands. Commands within a stream
// issue strictly in order; each issue time is the earliest instant legal
// under the Table-style timing constraints.
class ChannelState {
public:
    ChannelState(const HardwareConfig& hw, int32_t channel_id);

    // Runs a macro's micro sequence to completion, starting no earlier than
    // `start`. The channel is left fully precharged; the returned end time
    // already covers the final tRP so a following macro may activate
    // immediately.
    MacroResult run_micro_stream(std::span<const MicroPimCommand> cmds, time_ps start,
                                 const TraceFn& trace = nullptr);

    // Normal memory path. earliest_issue returns the first legal time >= now;
    // issue applies the command (throws on protocol violations such as a
    // column access to a closed row).
    time_ps earliest_issue(const MemCommand& c, time_ps now) const;
    void issue(const MemCommand& c, time_ps t, const TraceFn& trace = nullptr);

    // FCFS service of 32-byte read/write bursts with open-row hits preferred:
    // generates the ACT/RD/WR/PRE stream for a batch of requests and returns
    // the finish time. Used by tests and fine-grained transfers.
    struct Request {
        int32_t bank = 0;
        int64_t row = 0;
        int64_t column = 0;
        bool is_write = false;
    };
    time_ps service_requests(std::span<const Request> reqs, time_ps start,
                             const TraceFn& trace = nullptr);

    const BankState& bank(int32_t b) const { return banks_.at(static_cast<size_t>(b)); }
    int32_t id() const { return channel_; }
    const PimCounts& counts() const { return counts_; }
    time_ps busy_until() const { return busy_until_; }

private:
    time_ps all_banks_act_ok() const;
    void open_all(int64_t row, time_ps t);
    void precharge_all(time_ps t);

    const HardwareConfig& hw_;
    int32_t channel_ = 0;
    std::vector<BankState> banks_;
    time_ps cmd_ok_ = 0;       // command bus: one command per tCK
    time_ps col_ok_ = 0;       // column/data path occupancy
    time_ps gb_ready_ = 0;     // completion of the latest WRITE_GB
    time_ps last_mac_end_ = 0; // guards global-buffer overwrite
    time_ps busy_until_ = 0;
    PimCounts counts_;
};

// Closed-form duration of a micro stream on an idle channel (start = 0),
// computed with the same issue rules. Shared by the compile-time analytical
// model so that estimates and the simulated controller agree exactly.
MacroResult micro_stream_timing(std::span<const MicroPimCommand> cmds, const HardwareConfig& hw);

} // namespace ianus
