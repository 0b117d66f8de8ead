#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ianus/time.hpp"

namespace ianus {

enum class MemoryMode { unified, partitioned, plain };

const char* to_string(MemoryMode m);
MemoryMode memory_mode_from_string(const std::string& s);

// DRAM / PIM timing. Values are GDDR6-AiM figures and are used verbatim;
// in particular tRAS (21 ns) is smaller than tRCDRD (36 ns) and the bank
// state machine must not "fix" that.
struct TimingParams {
    double tCK_ns = 0.5;
    double tCCD_S_ns = 1.0;
    double tCCD_L_ns = 1.0;
    double tRAS_ns = 21.0;
    double tWR_ns = 36.0;
    double tRP_ns = 30.0;
    double tRCDRD_ns = 36.0;
    double tRCDWR_ns = 24.0;
    // PIM-specific pacing, in DRAM clock cycles (tCK).
    int64_t pim_mac_cycles_per_column_burst = 2; // one MAC burst per tCCD
    int64_t pim_gb_write_cycles = 2;             // one 32 B GB segment per tCCD

    time_ps tck_ps() const { return ns_to_ps(tCK_ns); }
    time_ps tccd_s_ps() const { return ns_to_ps(tCCD_S_ns); }
    time_ps tccd_l_ps() const { return ns_to_ps(tCCD_L_ns); }
    time_ps tras_ps() const { return ns_to_ps(tRAS_ns); }
    time_ps twr_ps() const { return ns_to_ps(tWR_ns); }
    time_ps trp_ps() const { return ns_to_ps(tRP_ns); }
    time_ps trcdrd_ps() const { return ns_to_ps(tRCDRD_ns); }
    time_ps trcdwr_ps() const { return ns_to_ps(tRCDWR_ns); }
    time_ps mac_burst_ps() const { return pim_mac_cycles_per_column_burst * tck_ps(); }
    time_ps gb_write_ps() const { return pim_gb_write_cycles * tck_ps(); }
};

struct EnergyParams {
    double e_dram_read = 1.9e-9;  // J per 32 B column access
    double e_dram_write = 1.9e-9; // J per 32 B column access
    double e_dram_activate = 2.0e-9; // J per per-bank row activation
    double e_pim_op = 3 * 1.9e-9; // J per PIM MAC column burst (per channel); 3x read
    double e_mu_mac = 1.5e-12;    // J per BF16 MAC in the matrix unit
    double e_vu_op = 2.0e-12;     // J per vector-unit lane op
};

struct HardwareConfig {
    std::string name = "ianus-default";

    // NPU
    int64_t num_cores = 4;
    int64_t npu_freq_hz = 700'000'000;
    int64_t mu_rows = 128;
    int64_t mu_cols = 64;
    int64_t macs_per_pe = 4;
    int64_t vu_lanes = 16; // sixteen 4-wide VLIW processors
    int64_t vu_width = 4;
    int64_t am_capacity = 12LL << 20;
    int64_t wm_capacity = 4LL << 20;
    int64_t am_entry_bytes = 256;
    int64_t wm_entry_bytes = 128;
    int64_t issue_queue_slots = 4;
    int64_t pending_queue_slots = 256;

    // PIM memory system
    int64_t num_channels = 8;
    int64_t banks_per_channel = 16;
    int64_t channels_per_chip = 2;
    int64_t row_size = 2048;           // bytes per DRAM row (page)
    int64_t pins_per_channel = 16;     // x16 organization
    int64_t pin_rate_bits = 16'000'000'000; // 16 Gb/s per pin
    int64_t pu_freq_hz = 1'000'000'000;
    int64_t pu_flops = 32'000'000'000; // per PU
    int64_t global_buffer_size = 2048; // bytes per channel
    int64_t dram_capacity = 8LL << 30; // 2 GB/chip x 4 chips; not stated per-chip in the source material
    int64_t column_bytes = 32;         // 16 pins x burst 16; access granularity

    // Channels that carry per-bank processing units. Defaults to all; the
    // sensitivity study scales this down without touching memory bandwidth.
    int64_t pim_compute_channels = 8;

    TimingParams timing;
    EnergyParams energy;
    MemoryMode memory_mode = MemoryMode::unified;

    // Modeling knobs (values the source hardware does not pin down).
    int64_t dma_transfer_overhead_ns = 200; // fixed per off-chip DMA transfer
    int64_t pcu_launch_ns = 300;            // macro dispatch + completion handshake
    int64_t gelu_lut_ns = 52;               // ACT_FUNC: LUT row activate + interpolation per 16 outputs
    int64_t noc_latency_ns = 20;            // all-to-all crossbar traversal
    int64_t onchip_stream_bytes_per_cycle = 256; // AM<->WM streaming buffer, one AM entry/cycle
    int64_t vu_startup_cycles = 32;
    int64_t mu_stream_quantum = 64;          // analytical model streams tokens in wavefronts of mu_cols
    int64_t sync_barrier_ns = 100;           // on-device barrier resolution cost

    // Host / multi-device link (PCIe 5.0 x16)
    int64_t pcie_bw = 64'000'000'000;
    int64_t pcie_latency_ns = 5000; // one-way; a cross-device sync costs a round trip

    int64_t num_chips() const { return num_channels / channels_per_chip; }
    int64_t ext_bandwidth() const {
        return num_channels * pins_per_channel * pin_rate_bits / 8;
    }
    int64_t channel_bandwidth() const { return pins_per_channel * pin_rate_bits / 8; }
    int64_t elems_per_column(int64_t dtype_bytes) const { return column_bytes / dtype_bytes; }
    int64_t cols_per_dram_row(int64_t dtype_bytes) const { return row_size / dtype_bytes; }
    // Rows of a weight tile: one row per (channel, bank) pair over the
    // compute-capable channels.
    int64_t rows_per_tile() const { return banks_per_channel * pim_compute_channels; }

    void validate() const; // throws std::runtime_error naming the failed invariant
};

struct PeakReport {
    double mu_flops_per_core = 0;
    double mu_flops_total = 0;
    double pim_flops_per_chip = 0;
    double pim_flops_total = 0;
    double ext_bw_bytes = 0;
    double int_bw_per_chip_bytes = 0;
    double int_bw_bytes = 0;
};

PeakReport derive_peaks(const HardwareConfig& hw);

enum class ModelFamily { gpt, bert };

const char* to_string(ModelFamily f);

struct ModelConfig {
    std::string name;
    ModelFamily family = ModelFamily::gpt;
    int64_t embedding_dim = 1024;
    int64_t head_dim = 64;
    int64_t num_heads = 16;
    int64_t num_blocks = 24;
    int64_t num_params = 345'000'000;
    int64_t dtype_bytes = 2; // BF16 only
    int64_t vocab_size = 50257;
    int64_t ffn_mult = 4;
    int64_t input_tokens = 128;
    int64_t output_tokens = 8;

    int64_t ffn_dim() const { return ffn_mult * embedding_dim; }
    void validate() const;
};

// Named presets: hardware "ianus-default"; models gpt2-m/l/xl/2.5b,
// bert-b/l/1.3b/3.9b, gpt-6.7b/13b/30b.
std::vector<std::string> builtin_model_names();
ModelConfig builtin_model(const std::string& name);
HardwareConfig builtin_hardware();

// Line-oriented "key = value" text format, '#' comments. Parse errors carry
// the offending line number.
HardwareConfig parse_hardware(const std::string& text, const std::string& origin = "<string>");
ModelConfig parse_model(const std::string& text, const std::string& origin = "<string>");
HardwareConfig load_hardware_file(const std::string& path);
ModelConfig load_model_file(const std::string& path);
// Model argument resolution: builtin name first, else treated as a file path.
ModelConfig resolve_model(const std::string& name_or_path);

std::string serialize(const HardwareConfig& hw);
std::string serialize(const ModelConfig& m);

} // namespace ianus
