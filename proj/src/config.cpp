#include "ianus/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ianus {

const char* to_string(MemoryMode m) {
    switch (m) {
        case MemoryMode::unified: return "unified";
        case MemoryMode::partitioned: return "partitioned";
        case MemoryMode::plain: return "plain";
    }
    return "?";
}

MemoryMode memory_mode_from_string(const std::string& s) {
    if (s == "unified") return MemoryMode::unified;
    if (s == "partitioned") return MemoryMode::partitioned;
    if (s == "plain") return MemoryMode::plain;
    throw std::runtime_error("unknown memory mode: " + s);
}

const char* to_string(ModelFamily f) { return f == ModelFamily::gpt ? "gpt" : "bert"; }

namespace {

[[noreturn]] void invariant_fail(const std::string& what) {
    throw std::runtime_error("config invariant violated: " + what);
}

void check(bool ok, const std::string& what) {
    if (!ok) invariant_fail(what);
}

} // namespace

void HardwareConfig::validate() const {
    check(num_cores > 0, "num_cores > 0");
    check(mu_rows > 0 && mu_cols > 0 && macs_per_pe > 0, "matrix unit dimensions positive");
    check(vu_lanes > 0 && vu_width > 0, "vector unit dimensions positive");
    check(num_channels > 0 && banks_per_channel > 0, "channel/bank counts positive");
    check(channels_per_chip > 0 && num_channels % channels_per_chip == 0,
          "num_channels divisible by channels_per_chip");
    check(pim_compute_channels > 0 && pim_compute_channels <= num_channels,
          "pim_compute_channels in [1, num_channels]");
    check(row_size > 0 && column_bytes > 0 && row_size % column_bytes == 0,
          "row_size multiple of column_bytes");
    check(global_buffer_size == row_size,
          "global buffer holds exactly one DRAM row worth of input vector");
    check(am_entry_bytes == 2 * wm_entry_bytes, "AM entry size = 2 x WM entry size");
    check(issue_queue_slots > 0 && pending_queue_slots > 0, "queue capacities positive");

    const TimingParams& t = timing;
    for (double v : {t.tCK_ns, t.tCCD_S_ns, t.tCCD_L_ns, t.tRAS_ns, t.tWR_ns, t.tRP_ns,
                     t.tRCDRD_ns, t.tRCDWR_ns}) {
        check(v > 0, "timing parameters strictly positive");
    }
    check(t.pim_mac_cycles_per_column_burst > 0 && t.pim_gb_write_cycles > 0,
          "PIM pacing cycles positive");

    check(energy.e_pim_op == 3 * energy.e_dram_read, "e_pim_op = 3 x e_dram_read");

    // Cross-checks against derived peaks; these tie the record to the machine
    // it claims to describe.
    const PeakReport p = derive_peaks(*this);
    check(p.mu_flops_per_core ==
              static_cast<double>(mu_rows * mu_cols * macs_per_pe * 2) * static_cast<double>(npu_freq_hz),
          "per-core MU peak = mu_rows x mu_cols x macs_per_pe x 2 x freq");
    check(p.pim_flops_per_chip ==
              static_cast<double>(banks_per_channel * channels_per_chip) * static_cast<double>(pu_flops),
          "per-chip PIM peak = banks x channels_per_chip x pu_flops");
}

PeakReport derive_peaks(const HardwareConfig& hw) {
    PeakReport p;
    p.mu_flops_per_core = static_cast<double>(hw.mu_rows * hw.mu_cols * hw.macs_per_pe * 2) *
                          static_cast<double>(hw.npu_freq_hz);
    p.mu_flops_total = p.mu_flops_per_core * static_cast<double>(hw.num_cores);
    p.pim_flops_per_chip = static_cast<double>(hw.banks_per_channel * hw.channels_per_chip) *
                           static_cast<double>(hw.pu_flops);
    p.pim_flops_total = p.pim_flops_per_chip * static_cast<double>(hw.num_chips());
    p.ext_bw_bytes = static_cast<double>(hw.ext_bandwidth());
    // Internal bandwidth: every bank streams one column burst per tCCD.
    const double bursts_per_sec = 1e12 / static_cast<double>(hw.timing.tccd_l_ps());
    p.int_bw_per_chip_bytes = static_cast<double>(hw.banks_per_channel * hw.channels_per_chip *
                                                  hw.column_bytes) *
                              bursts_per_sec;
    p.int_bw_bytes = p.int_bw_per_chip_bytes * static_cast<double>(hw.num_chips());
    return p;
}

void ModelConfig::validate() const {
    check(dtype_bytes == 2, "dtype is fixed to BF16 (2 bytes)");
    check(embedding_dim == head_dim * num_heads, "embedding_dim = head_dim x num_heads");
    check(num_blocks > 0 && num_heads > 0 && head_dim > 0, "model dimensions positive");
    check(input_tokens > 0, "input_tokens >= 1");
    if (family == ModelFamily::gpt) {
        check(output_tokens >= 1, "output_tokens >= 1 for gpt");
    } else {
        check(output_tokens == 1, "output_tokens = 1 for bert");
    }
}

std::vector<std::string> builtin_model_names() {
    return {"bert-b", "bert-l", "bert-1.3b", "bert-3.9b",
            "gpt2-m", "gpt2-l", "gpt2-xl", "gpt2-2.5b",
            "gpt-6.7b", "gpt-13b", "gpt-30b"};
}

ModelConfig builtin_model(const std::string& name) {
    ModelConfig m;
    m.name = name;
    auto gpt = [&](int64_t emb, int64_t hd, int64_t heads, int64_t blocks, int64_t params) {
        m.family = ModelFamily::gpt;
        m.embedding_dim = emb;
        m.head_dim = hd;
        m.num_heads = heads;
        m.num_blocks = blocks;
        m.num_params = params;
        m.vocab_size = 50257;
    };
    auto bert = [&](int64_t emb, int64_t heads, int64_t blocks, int64_t params) {
        m.family = ModelFamily::bert;
        m.embedding_dim = emb;
        m.head_dim = 64;
        m.num_heads = heads;
        m.num_blocks = blocks;
        m.num_params = params;
        m.vocab_size = 30522;
        m.output_tokens = 1;
    };
    if (name == "bert-b") bert(768, 12, 12, 110'000'000);
    else if (name == "bert-l") bert(1024, 16, 24, 340'000'000);
    else if (name == "bert-1.3b") bert(2048, 32, 24, 1'300'000'000);
    else if (name == "bert-3.9b") bert(2560, 40, 48, 3'900'000'000);
    else if (name == "gpt2-m") gpt(1024, 64, 16, 24, 345'000'000);
    else if (name == "gpt2-l") gpt(1280, 64, 20, 36, 762'000'000);
    else if (name == "gpt2-xl") gpt(1536, 64, 24, 48, 1'500'000'000); // 25 heads reduced to 24
    else if (name == "gpt2-2.5b") gpt(1920, 96, 20, 54, 2'500'000'000);
    else if (name == "gpt-6.7b") gpt(4096, 128, 32, 32, 6'700'000'000);
    else if (name == "gpt-13b") gpt(5120, 128, 40, 40, 13'000'000'000);
    else if (name == "gpt-30b") gpt(7168, 128, 56, 48, 30'000'000'000);
    else throw std::runtime_error("unknown builtin model: " + name);
    return m;
}

HardwareConfig builtin_hardware() { return HardwareConfig{}; }

// ---------------------------------------------------------------------------
// key = value parsing
// ---------------------------------------------------------------------------

namespace {

struct KvLine {
    std::string key;
    std::string value;
    int line = 0;
};

std::vector<KvLine> tokenize(const std::string& text, const std::string& origin) {
    std::vector<KvLine> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                     ": expected 'key = value'");
        }
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        KvLine kv;
        kv.key = trim(line.substr(0, eq));
        kv.value = trim(line.substr(eq + 1));
        kv.line = lineno;
        if (kv.key.empty() || kv.value.empty()) {
            throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                     ": empty key or value");
        }
        out.push_back(std::move(kv));
    }
    return out;
}

int64_t parse_i64(const KvLine& kv, const std::string& origin) {
    try {
        size_t pos = 0;
        int64_t v = std::stoll(kv.value, &pos);
        if (pos != kv.value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (...) {
        throw std::runtime_error(origin + ":" + std::to_string(kv.line) + ": bad integer for '" +
                                 kv.key + "': " + kv.value);
    }
}

double parse_f64(const KvLine& kv, const std::string& origin) {
    try {
        size_t pos = 0;
        double v = std::stod(kv.value, &pos);
        if (pos != kv.value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (...) {
        throw std::runtime_error(origin + ":" + std::to_string(kv.line) + ": bad number for '" +
                                 kv.key + "': " + kv.value);
    }
}

} // namespace

HardwareConfig parse_hardware(const std::string& text, const std::string& origin) {
    HardwareConfig hw;
    bool pim_compute_set = false;
    for (const KvLine& kv : tokenize(text, origin)) {
        const std::string& k = kv.key;
        auto i = [&] { return parse_i64(kv, origin); };
        auto f = [&] { return parse_f64(kv, origin); };
        if (k == "name") hw.name = kv.value;
        else if (k == "num_cores") hw.num_cores = i();
        else if (k == "npu_freq_hz") hw.npu_freq_hz = i();
        else if (k == "mu_rows") hw.mu_rows = i();
        else if (k == "mu_cols") hw.mu_cols = i();
        else if (k == "macs_per_pe") hw.macs_per_pe = i();
        else if (k == "vu_lanes") hw.vu_lanes = i();
        else if (k == "vu_width") hw.vu_width = i();
        else if (k == "am_capacity") hw.am_capacity = i();
        else if (k == "wm_capacity") hw.wm_capacity = i();
        else if (k == "am_entry_bytes") hw.am_entry_bytes = i();
        else if (k == "wm_entry_bytes") hw.wm_entry_bytes = i();
        else if (k == "issue_queue_slots") hw.issue_queue_slots = i();
        else if (k == "pending_queue_slots") hw.pending_queue_slots = i();
        else if (k == "num_channels") hw.num_channels = i();
        else if (k == "banks_per_channel") hw.banks_per_channel = i();
        else if (k == "channels_per_chip") hw.channels_per_chip = i();
        else if (k == "row_size") hw.row_size = i();
        else if (k == "pins_per_channel") hw.pins_per_channel = i();
        else if (k == "pin_rate_bits") hw.pin_rate_bits = i();
        else if (k == "pu_freq_hz") hw.pu_freq_hz = i();
        else if (k == "pu_flops") hw.pu_flops = i();
        else if (k == "global_buffer_size") hw.global_buffer_size = i();
        else if (k == "dram_capacity") hw.dram_capacity = i();
        else if (k == "column_bytes") hw.column_bytes = i();
        else if (k == "pim_compute_channels") { hw.pim_compute_channels = i(); pim_compute_set = true; }
        else if (k == "memory_mode") hw.memory_mode = memory_mode_from_string(kv.value);
        else if (k == "tCK_ns") hw.timing.tCK_ns = f();
        else if (k == "tCCD_S_ns") hw.timing.tCCD_S_ns = f();
        else if (k == "tCCD_L_ns") hw.timing.tCCD_L_ns = f();
        else if (k == "tRAS_ns") hw.timing.tRAS_ns = f();
        else if (k == "tWR_ns") hw.timing.tWR_ns = f();
        else if (k == "tRP_ns") hw.timing.tRP_ns = f();
        else if (k == "tRCDRD_ns") hw.timing.tRCDRD_ns = f();
        else if (k == "tRCDWR_ns") hw.timing.tRCDWR_ns = f();
        else if (k == "pim_mac_cycles_per_column_burst") hw.timing.pim_mac_cycles_per_column_burst = i();
        else if (k == "pim_gb_write_cycles") hw.timing.pim_gb_write_cycles = i();
        else if (k == "e_dram_read") { hw.energy.e_dram_read = f(); hw.energy.e_pim_op = 3 * hw.energy.e_dram_read; }
        else if (k == "e_dram_write") hw.energy.e_dram_write = f();
        else if (k == "e_dram_activate") hw.energy.e_dram_activate = f();
        else if (k == "e_mu_mac") hw.energy.e_mu_mac = f();
        else if (k == "e_vu_op") hw.energy.e_vu_op = f();
        else if (k == "dma_transfer_overhead_ns") hw.dma_transfer_overhead_ns = i();
        else if (k == "pcu_launch_ns") hw.pcu_launch_ns = i();
        else if (k == "gelu_lut_ns") hw.gelu_lut_ns = i();
        else if (k == "noc_latency_ns") hw.noc_latency_ns = i();
        else if (k == "onchip_stream_bytes_per_cycle") hw.onchip_stream_bytes_per_cycle = i();
        else if (k == "vu_startup_cycles") hw.vu_startup_cycles = i();
        else if (k == "mu_stream_quantum") hw.mu_stream_quantum = i();
        else if (k == "sync_barrier_ns") hw.sync_barrier_ns = i();
        else if (k == "pcie_bw") hw.pcie_bw = i();
        else if (k == "pcie_latency_ns") hw.pcie_latency_ns = i();
        else
            throw std::runtime_error(origin + ":" + std::to_string(kv.line) +
                                     ": unknown hardware key '" + k + "'");
    }
    if (!pim_compute_set) hw.pim_compute_channels = hw.num_channels;
    hw.validate();
    return hw;
}

ModelConfig parse_model(const std::string& text, const std::string& origin) {
    ModelConfig m;
    m.name = "custom";
    for (const KvLine& kv : tokenize(text, origin)) {
        const std::string& k = kv.key;
        auto i = [&] { return parse_i64(kv, origin); };
        if (k == "name") m.name = kv.value;
        else if (k == "family") {
            if (kv.value == "gpt") m.family = ModelFamily::gpt;
            else if (kv.value == "bert") m.family = ModelFamily::bert;
            else
                throw std::runtime_error(origin + ":" + std::to_string(kv.line) +
                                         ": family must be gpt or bert");
        }
        else if (k == "embedding_dim") m.embedding_dim = i();
        else if (k == "head_dim") m.head_dim = i();
        else if (k == "num_heads") m.num_heads = i();
        else if (k == "num_blocks") m.num_blocks = i();
        else if (k == "num_params") m.num_params = i();
        else if (k == "dtype_bytes") m.dtype_bytes = i();
        else if (k == "vocab_size") m.vocab_size = i();
        else if (k == "ffn_mult") m.ffn_mult = i();
        else if (k == "input_tokens") m.input_tokens = i();
        else if (k == "output_tokens") m.output_tokens = i();
        else
            throw std::runtime_error(origin + ":" + std::to_string(kv.line) +
                                     ": unknown model key '" + k + "'");
    }
    m.validate();
    return m;
}

namespace {
std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}
} // namespace

HardwareConfig load_hardware_file(const std::string& path) {
    return parse_hardware(slurp(path), path);
}

ModelConfig load_model_file(const std::string& path) { return parse_model(slurp(path), path); }

ModelConfig resolve_model(const std::string& name_or_path) {
    for (const auto& n : builtin_model_names()) {
        if (n == name_or_path) return builtin_model(n);
    }
    return load_model_file(name_or_path);
}

std::string serialize(const HardwareConfig& hw) {
    std::ostringstream o;
    o << "name = " << hw.name << "\n";
    o << "num_cores = " << hw.num_cores << "\n";
    o << "npu_freq_hz = " << hw.npu_freq_hz << "\n";
    o << "mu_rows = " << hw.mu_rows << "\n";
    o << "mu_cols = " << hw.mu_cols << "\n";
    o << "macs_per_pe = " << hw.macs_per_pe << "\n";
    o << "vu_lanes = " << hw.vu_lanes << "\n";
    o << "vu_width = " << hw.vu_width << "\n";
    o << "am_capacity = " << hw.am_capacity << "\n";
    o << "wm_capacity = " << hw.wm_capacity << "\n";
    o << "am_entry_bytes = " << hw.am_entry_bytes << "\n";
    o << "wm_entry_bytes = " << hw.wm_entry_bytes << "\n";
    o << "issue_queue_slots = " << hw.issue_queue_slots << "\n";
    o << "pending_queue_slots = " << hw.pending_queue_slots << "\n";
    o << "num_channels = " << hw.num_channels << "\n";
    o << "banks_per_channel = " << hw.banks_per_channel << "\n";
    o << "channels_per_chip = " << hw.channels_per_chip << "\n";
    o << "row_size = " << hw.row_size << "\n";
    o << "pins_per_channel = " << hw.pins_per_channel << "\n";
    o << "pin_rate_bits = " << hw.pin_rate_bits << "\n";
    o << "pu_freq_hz = " << hw.pu_freq_hz << "\n";
    o << "pu_flops = " << hw.pu_flops << "\n";
    o << "global_buffer_size = " << hw.global_buffer_size << "\n";
    o << "dram_capacity = " << hw.dram_capacity << "\n";
    o << "column_bytes = " << hw.column_bytes << "\n";
    o << "pim_compute_channels = " << hw.pim_compute_channels << "\n";
    o << "memory_mode = " << to_string(hw.memory_mode) << "\n";
    o << "tCK_ns = " << hw.timing.tCK_ns << "\n";
    o << "tCCD_S_ns = " << hw.timing.tCCD_S_ns << "\n";
    o << "tCCD_L_ns = " << hw.timing.tCCD_L_ns << "\n";
    o << "tRAS_ns = " << hw.timing.tRAS_ns << "\n";
    o << "tWR_ns = " << hw.timing.tWR_ns << "\n";
    o << "tRP_ns = " << hw.timing.tRP_ns << "\n";
    o << "tRCDRD_ns = " << hw.timing.tRCDRD_ns << "\n";
    o << "tRCDWR_ns = " << hw.timing.tRCDWR_ns << "\n";
    o << "pim_mac_cycles_per_column_burst = " << hw.timing.pim_mac_cycles_per_column_burst << "\n";
    o << "pim_gb_write_cycles = " << hw.timing.pim_gb_write_cycles << "\n";
    o << "e_dram_read = " << hw.energy.e_dram_read << "\n";
    o << "e_dram_write = " << hw.energy.e_dram_write << "\n";
    o << "e_dram_activate = " << hw.energy.e_dram_activate << "\n";
    o << "e_mu_mac = " << hw.energy.e_mu_mac << "\n";
    o << "e_vu_op = " << hw.energy.e_vu_op << "\n";
    o << "dma_transfer_overhead_ns = " << hw.dma_transfer_overhead_ns << "\n";
    o << "pcu_launch_ns = " << hw.pcu_launch_ns << "\n";
    o << "gelu_lut_ns = " << hw.gelu_lut_ns << "\n";
    o << "noc_latency_ns = " << hw.noc_latency_ns << "\n";
    o << "onchip_stream_bytes_per_cycle = " << hw.onchip_stream_bytes_per_cycle << "\n";
    o << "vu_startup_cycles = " << hw.vu_startup_cycles << "\n";
    o << "mu_stream_quantum = " << hw.mu_stream_quantum << "\n";
    o << "sync_barrier_ns = " << hw.sync_barrier_ns << "\n";
    o << "pcie_bw = " << hw.pcie_bw << "\n";
    o << "pcie_latency_ns = " << hw.pcie_latency_ns << "\n";
    return o.str();
}

std::string serialize(const ModelConfig& m) {
    std::ostringstream o;
    o << "name = " << m.name << "\n";
    o << "family = " << to_string(m.family) << "\n";
    o << "embedding_dim = " << m.embedding_dim << "\n";
    o << "head_dim = " << m.head_dim << "\n";
    o << "num_heads = " << m.num_heads << "\n";
    o << "num_blocks = " << m.num_blocks << "\n";
    o << "num_params = " << m.num_params << "\n";
    o << "dtype_bytes = " << m.dtype_bytes << "\n";
    o << "vocab_size = " << m.vocab_size << "\n";
    o << "ffn_mult = " << m.ffn_mult << "\n";
    o << "input_tokens = " << m.input_tokens << "\n";
    o << "output_tokens = " << m.output_tokens << "\n";
    return o.str();
}

} // namespace ianus
