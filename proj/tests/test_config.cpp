#include "doctest.h"

#include <stdexcept>

#include <random>

#include "ianus/config.hpp"

using namespace ianus;

TEST_CASE("default hardware satisfies the published peak identities") {
    HardwareConfig hw = builtin_hardware();
    hw.validate();
    PeakReport p = derive_peaks(hw);
    // 128 x 64 PEs x 4 MACs x 2 FLOP at 700 MHz
    CHECK(p.mu_flops_per_core == doctest::Approx(45.875e12));
    CHECK(p.mu_flops_total == doctest::Approx(183.5e12)); // ~184 TFLOPS
    CHECK(p.pim_flops_per_chip == doctest::Approx(1.024e12));
    CHECK(p.pim_flops_total == doctest::Approx(4.096e12));
    // 8 channels x 16 pins x 16 Gb/s
    CHECK(p.ext_bw_bytes == doctest::Approx(256e9));
    CHECK(p.int_bw_per_chip_bytes == doctest::Approx(1024e9));
    CHECK(p.int_bw_bytes == doctest::Approx(4096e9));
}

TEST_CASE("zero-compute PIM config derives zero peak") {
    HardwareConfig hw = builtin_hardware();
    hw.num_channels = 1;
    hw.pim_compute_channels = 1;
    hw.channels_per_chip = 1;
    hw.banks_per_channel = 1;
    hw.pu_flops = 0;
    CHECK(derive_peaks(hw).pim_flops_total == 0.0);
}

TEST_CASE("builtin models match the published network configurations") {
    ModelConfig xl = builtin_model("gpt2-xl");
    CHECK(xl.embedding_dim == 1536);
    CHECK(xl.head_dim == 64);
    CHECK(xl.num_heads == 24);
    CHECK(xl.num_blocks == 48);
    xl.validate();

    ModelConfig b25 = builtin_model("gpt2-2.5b");
    CHECK(b25.embedding_dim == 1920);
    CHECK(b25.head_dim == 96);
    CHECK(b25.num_heads == 20);
    CHECK(b25.num_blocks == 54);

    ModelConfig bb = builtin_model("bert-b");
    CHECK(bb.family == ModelFamily::bert);
    CHECK(bb.embedding_dim == 768);
    CHECK(bb.output_tokens == 1);

    ModelConfig big = builtin_model("gpt-6.7b");
    CHECK(big.embedding_dim == 4096);
    CHECK(big.head_dim == 128);
    CHECK(big.num_heads == 32);
    CHECK(big.num_blocks == 32);
}

TEST_CASE("config text round-trips") {
    HardwareConfig hw = builtin_hardware();
    hw.num_cores = 2;
    hw.timing.tRCDRD_ns = 40;
    hw.memory_mode = MemoryMode::partitioned;
    hw.pim_compute_channels = 4;
    HardwareConfig back = parse_hardware(serialize(hw), "rt");
    CHECK(serialize(back) == serialize(hw));

    ModelConfig m = builtin_model("gpt2-l");
    m.input_tokens = 77;
    ModelConfig mb = parse_model(serialize(m), "rt");
    CHECK(serialize(mb) == serialize(m));
}

TEST_CASE("parse errors carry line numbers and key names") {
    CHECK_THROWS_WITH_AS(parse_hardware("num_cores = x", "f"),
                         doctest::Contains("f:1"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_hardware("nope = 3", "f"),
                         doctest::Contains("unknown hardware key"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_model("family = llama", "f"),
                         doctest::Contains("gpt or bert"), std::runtime_error);
    // invariant violations name the failed check
    CHECK_THROWS_WITH_AS(parse_model("embedding_dim = 100\nhead_dim = 64\nnum_heads = 2", "f"),
                         doctest::Contains("embedding_dim = head_dim x num_heads"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_model("dtype_bytes = 4", "f"), doctest::Contains("BF16"),
                         std::runtime_error);
}

TEST_CASE("derived peaks match an independent closed form on random configs") {
    std::mt19937 rng(7);
    std::uniform_int_distribution<int64_t> cores(1, 8), rows(8, 256), cols(8, 128), macs(1, 8),
        chans(1, 16), banks(1, 32), cpc(1, 2);
    for (int trial = 0; trial < 200; ++trial) {
        HardwareConfig hw = builtin_hardware();
        hw.num_cores = cores(rng);
        hw.mu_rows = rows(rng);
        hw.mu_cols = cols(rng);
        hw.macs_per_pe = macs(rng);
        hw.channels_per_chip = cpc(rng);
        hw.num_channels = chans(rng) * hw.channels_per_chip;
        hw.pim_compute_channels = hw.num_channels;
        hw.banks_per_channel = banks(rng);
        PeakReport p = derive_peaks(hw);
        const double mu = 2.0 * hw.mu_rows * hw.mu_cols * hw.macs_per_pe * hw.npu_freq_hz;
        CHECK(p.mu_flops_per_core == doctest::Approx(mu));
        CHECK(p.mu_flops_total == doctest::Approx(mu * hw.num_cores));
        const double pim = 1.0 * hw.banks_per_channel * hw.channels_per_chip * hw.pu_flops;
        CHECK(p.pim_flops_per_chip == doctest::Approx(pim));
        CHECK(p.pim_flops_total ==
              doctest::Approx(pim * (hw.num_channels / hw.channels_per_chip)));
        CHECK(p.ext_bw_bytes ==
              doctest::Approx(1.0 * hw.num_channels * hw.pins_per_channel * hw.pin_rate_bits / 8));
    }
}

TEST_CASE("energy invariant holds after overrides") {
    HardwareConfig hw = parse_hardware("e_dram_read = 2e-9", "f");
    CHECK(hw.energy.e_pim_op == doctest::Approx(6e-9));
}
