#include "ianus/trace.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ianus {

std::string format_trace_record(const TraceRecord& r) {
    std::ostringstream o;
    o << r.t << ',' << r.channel << ',' << r.bank << ',' << r.kind << ',' << r.row << ','
      << r.column;
    return o.str();
}

TraceRecord parse_trace_record(const std::string& line, int lineno) {
    TraceRecord r;
    std::istringstream in(line);
    std::string field;
    auto next = [&](const char* what) {
        if (!std::getline(in, field, ',')) {
            throw std::runtime_error("trace line " + std::to_string(lineno) + ": missing " + what);
        }
        return field;
    };
    r.t = std::stoll(next("time"));
    r.channel = static_cast<int32_t>(std::stol(next("channel")));
    r.bank = static_cast<int32_t>(std::stol(next("bank")));
    r.kind = next("kind");
    r.row = std::stoll(next("row"));
    r.column = std::stoll(next("column"));
    return r;
}

TraceValidator::TraceValidator(const HardwareConfig& hw) : hw_(hw) {
    chans_.resize(static_cast<size_t>(hw.num_channels));
    for (auto& c : chans_) c.banks.resize(static_cast<size_t>(hw.banks_per_channel));
}

void TraceValidator::fail(time_ps t, int32_t channel, const std::string& what) {
    violations_.push_back("t=" + std::to_string(t) + "ps ch" + std::to_string(channel) + ": " +
                          what);
}

void TraceValidator::observe(time_ps t, int32_t channel, int32_t bank, const char* kind,
                             int64_t row, int64_t column) {
    TraceRecord r{t, channel, bank, kind, row, column};
    observe(r);
}

void TraceValidator::observe(const TraceRecord& r) {
    ++records_;
    if (r.channel == -1) {
        for (int32_t c = 0; c < hw_.pim_compute_channels; ++c) {
            check_one(r.t, c, r.bank, r.kind, r.row);
        }
    } else {
        check_one(r.t, r.channel, r.bank, r.kind, r.row);
    }
}

void TraceValidator::check_one(time_ps t, int32_t channel, int32_t bank, const std::string& kind,
                               int64_t row) {
    if (channel < 0 || channel >= hw_.num_channels) {
        fail(t, channel, "channel out of range");
        return;
    }
    Chan& ch = chans_[static_cast<size_t>(channel)];
    const auto& tp = hw_.timing;
    const time_ps tck = tp.tck_ps();
    const time_ps tccd = tp.tccd_l_ps();

    if (ch.last_issue >= 0 && t < ch.last_issue) {
        fail(t, channel, "trace not time-ordered on channel");
        return;
    }
    if (ch.last_issue >= 0 && t - ch.last_issue < tck) {
        fail(t, channel, kind + ": command bus spacing < tCK");
    }
    ch.last_issue = t;

    auto banks_of = [&](int32_t b) {
        std::vector<int32_t> v;
        if (b == -1) {
            for (int32_t i = 0; i < hw_.banks_per_channel; ++i) v.push_back(i);
        } else {
            v.push_back(b);
        }
        return v;
    };

    auto col_gate = [&](const std::string& k) {
        if (t < ch.col_busy_until) fail(t, channel, k + ": column path busy (tCCD window)");
    };

    if (kind == "ACT" || kind == "ACT_ALL_BANKS") {
        for (int32_t b : banks_of(kind == "ACT_ALL_BANKS" ? -1 : bank)) {
            Bank& bk = ch.banks[static_cast<size_t>(b)];
            if (bk.open_row != -1) fail(t, channel, "ACT bank " + std::to_string(b) + " already open");
            if (t < bk.pre_ready) fail(t, channel, "ACT: tRP not elapsed on bank " + std::to_string(b));
            bk.open_row = row;
            bk.last_act = t;
            bk.last_wr = -1;
        }
    } else if (kind == "RD" || kind == "WR" || kind == "MAC_ALL_BANKS") {
        col_gate(kind);
        const bool is_wr = kind == "WR";
        for (int32_t b : banks_of(kind == "MAC_ALL_BANKS" ? -1 : bank)) {
            Bank& bk = ch.banks[static_cast<size_t>(b)];
            if (bk.open_row != row) {
                fail(t, channel, kind + ": row " + std::to_string(row) + " not open on bank " +
                                     std::to_string(b));
                continue;
            }
            const time_ps rcd = is_wr ? tp.trcdwr_ps() : tp.trcdrd_ps();
            if (bk.last_act >= 0 && t - bk.last_act < rcd) {
                fail(t, channel, kind + (is_wr ? ": tRCDWR" : ": tRCDRD") + " not elapsed");
            }
            if (is_wr) bk.last_wr = t;
        }
        ch.col_busy_until = t + (kind == "MAC_ALL_BANKS" ? tp.mac_burst_ps() : tccd);
    } else if (kind == "WRITE_GB") {
        col_gate(kind);
        ch.col_busy_until = t + tp.gb_write_ps();
    } else if (kind == "READ_ACC") {
        col_gate(kind);
        ch.col_busy_until = t + hw_.banks_per_channel * tccd;
    } else if (kind == "ACT_FUNC") {
        col_gate(kind);
        ch.col_busy_until = t + hw_.gelu_lut_ns * kPsPerNs;
    } else if (kind == "PRE" || kind == "PRECHARGE_ALL") {
        for (int32_t b : banks_of(kind == "PRECHARGE_ALL" ? -1 : bank)) {
            Bank& bk = ch.banks[static_cast<size_t>(b)];
            if (bk.open_row == -1) {
                fail(t, channel, "PRE on idle bank " + std::to_string(b));
                continue;
            }
            if (bk.last_act >= 0 && t - bk.last_act < tp.tras_ps()) {
                fail(t, channel, "PRE: tRAS not elapsed on bank " + std::to_string(b));
            }
            if (bk.last_wr >= 0 && t - bk.last_wr < tp.twr_ps()) {
                fail(t, channel, "PRE: tWR not elapsed on bank " + std::to_string(b));
            }
            bk.open_row = -1;
            bk.pre_ready = t + tp.trp_ps();
        }
    } else {
        fail(t, channel, "unknown command kind '" + kind + "'");
    }
}

std::vector<std::string> validate_trace_file(const std::string& path, const HardwareConfig& hw,
                                             int64_t* checked) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trace file: " + path);
    TraceValidator v(hw);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        v.observe(parse_trace_record(line, lineno));
    }
    if (checked) *checked = v.records_checked();
    return v.violations();
}

} // namespace ianus
