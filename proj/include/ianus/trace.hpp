#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ianus/config.hpp"
#include "ianus/time.hpp"

namespace ianus {

// Trace line: time_ps,channel,bank,kind,row,column
// channel -1 means broadcast to every PIM compute channel; bank -1 means all
// banks of the channel.
struct TraceRecord {
    time_ps t = 0;
    int32_t channel = 0;
    int32_t bank = 0;
    std::string kind;
    int64_t row = 0;
    int64_t column = 0;
};

std::string format_trace_record(const TraceRecord& r);
TraceRecord parse_trace_record(const std::string& line, int lineno);

// Checks every (bank, command) pair in a command trace against the DRAM/PIM
// timing constraints (tCK, tCCD, tRAS, tWR, tRP, tRCDRD, tRCDWR) plus row
// state legality. Deliberately a from-scratch encoding of the rules, separate
// from the controller implementation, so it can catch controller bugs.
class TraceValidator {
public:
    explicit TraceValidator(const HardwareConfig& hw);

    void observe(const TraceRecord& r);
    void observe(time_ps t, int32_t channel, int32_t bank, const char* kind, int64_t row,
                 int64_t column);

    const std::vector<std::string>& violations() const { return violations_; }
    int64_t records_checked() const { return records_; }

private:
    struct Bank {
        int64_t open_row = -1;
        time_ps last_act = -1;
        time_ps pre_ready = 0; // last PRE + tRP
        time_ps last_wr = -1;
    };
    struct Chan {
        std::vector<Bank> banks;
        time_ps col_busy_until = 0;
        time_ps last_issue = -1;
    };

    void check_one(time_ps t, int32_t channel, int32_t bank, const std::string& kind, int64_t row);
    void fail(time_ps t, int32_t channel, const std::string& what);

    const HardwareConfig& hw_;
    std::vector<Chan> chans_;
    std::vector<std::string> violations_;
    int64_t records_ = 0;
};

// Validate a dumped trace file; returns the violation list (empty = clean).
std::vector<std::string> validate_trace_file(const std::string& path, const HardwareConfig& hw,
                                             int64_t* checked = nullptr);

} // namespace ianus
