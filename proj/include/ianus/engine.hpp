#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ianus/compiler.hpp"
#include "ianus/config.hpp"
#include "ianus/npu.hpp"
#include "ianus/pim.hpp"

namespace ianus {

constexpr size_t kNumOpClasses = 11;

struct EnergyCounters {
    int64_t mu_macs = 0;
    int64_t vu_lane_ops = 0;
    int64_t dram_col_reads = 0;  // 32 B column accesses, normal traffic
    int64_t dram_col_writes = 0;
    int64_t dram_activations = 0; // per-bank
    int64_t pim_mac_bursts = 0;   // per-channel MAC column accesses
    int64_t pim_act_funcs = 0;
    int64_t pim_gb_writes = 0;
    int64_t pim_acc_reads = 0;
    int64_t pim_activations = 0; // per-bank, during macros
};

struct EnergyReport {
    double core_compute = 0; // J
    double normal_mem = 0;
    double pim_ops = 0;
    double total() const { return core_compute + normal_mem + pim_ops; }
};

// Converts counted events into joules. PIM compute accesses (MAC bursts and
// LUT activations) are charged at e_pim_op = 3x a DRAM read; the rest of the
// macro traffic (input vector delivery, accumulator drains, row activations)
// is standard DRAM work and lands in normal_mem.
EnergyReport account_energy(const EnergyCounters& c, const EnergyParams& e);

struct StageStats {
    time_ps wall = 0;
    std::array<time_ps, kNumOpClasses> class_busy{};
    std::array<time_ps, kNumOpClasses> class_attributed{};
};

struct SimReport {
    std::string model_name;
    std::string hw_name;
    MemoryMode mode = MemoryMode::unified;
    AttentionVariant gen_variant = AttentionVariant::gen_mu_qkt;
    SchedulingPolicy policy = SchedulingPolicy::pas;
    int64_t num_devices = 1;
    int64_t input_tokens = 0;
    int64_t output_tokens = 0;

    time_ps total_ps = 0;
    time_ps summarization_ps = 0;
    time_ps generation_ps = 0;
    int64_t gen_steps = 0;
    time_ps per_gen_token_ps = 0;

    StageStats summ;
    StageStats gen;
    std::array<time_ps, kNumOpClasses> class_busy{}; // whole run, union per class

    std::vector<time_ps> unit_busy; // cores x {MU,VU,DMA_IN,DMA_OUT}
    time_ps pim_busy = 0;

    EnergyCounters counters;
    EnergyReport energy;

    time_ps dma_pim_overlap_ps = 0; // off-chip DMA execution inside macro windows
    int64_t pim_macros = 0;
    int64_t micro_commands = 0;
    int64_t dma_bytes = 0;
    int64_t noc_bytes = 0;
    int64_t pcie_bytes = 0;
    int64_t max_pending_occupancy = 0;
    int64_t max_issue_occupancy = 0;
    int64_t fragmentation_bytes = 0;
    double qkt_pim_row_utilization = 0;
    int64_t validation_violations = -1; // -1 when the inline validator is off

    time_ps class_time(OpClass c) const { return class_busy[static_cast<size_t>(c)]; }

    std::string to_json() const;
    std::string to_text() const;
    static std::string csv_header();
    std::string to_csv_row() const;
};

struct RunOptions {
    AttentionVariant gen_variant = AttentionVariant::gen_mu_qkt;
    SchedulingPolicy policy = SchedulingPolicy::pas;
    bool force_fc_mu = false;
    bool force_fc_pim = false;
    int64_t num_devices = 1;
    bool ignore_capacity = false; // device-normalized scaling baselines only
    std::string trace_path;      // dump micro/DRAM command trace
    bool validate = false;       // inline timing-legality validator
};

// Deterministic end-to-end simulation: one summarization pass, then one
// generation step per produced token after the first.
SimReport run(const ModelConfig& model, const HardwareConfig& hw, const RunOptions& opts = {});

// Symmetric multi-device run; weights and heads are sharded across devices,
// every block synchronization crosses the PCIe link. n_devices = 1 is exactly
// run().
SimReport run_multi_device(const ModelConfig& model, const HardwareConfig& hw, int64_t n_devices,
                           const RunOptions& opts = {});

// Capacity-aware allocation entry point shared with run(); devices shards
// matrix rows.
AllocationPlan plan_allocation_sharded(const ModelConfig& model, const HardwareConfig& hw,
                                       MemoryMode mode, int64_t devices, bool enforce_capacity);

// Executes one prebuilt stage plan from time zero and folds its stats into
// `rep`; returns the stage wall time. The scheduler, PCU, memory-controller
// and bus interactions are exactly those of run().
time_ps simulate_stage(const StagePlan& plan, const HardwareConfig& hw, SimReport& rep);

} // namespace ianus
