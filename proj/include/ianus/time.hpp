#pragma once

#include <cstdint>

namespace ianus {

// All simulation timestamps and durations are integer picoseconds. The three
// clock domains (NPU 700 MHz, PU 1 GHz, DRAM tCK 0.5 ns) do not share a
// common cycle, so durations are converted with exact integer arithmetic and
// rounded up; the engine never touches floating point on the hot path.
using time_ps = int64_t;

constexpr time_ps kPsPerNs = 1000;

constexpr time_ps ns_to_ps(double ns) { return static_cast<time_ps>(ns * 1000.0 + 0.5); }

inline time_ps cycles_to_ps(int64_t cycles, int64_t freq_hz) {
    if (cycles <= 0) return 0;
    const auto num = static_cast<__int128>(cycles) * 1'000'000'000'000LL;
    return static_cast<time_ps>((num + freq_hz - 1) / freq_hz);
}

inline time_ps bytes_to_ps(int64_t bytes, int64_t bytes_per_sec) {
    if (bytes <= 0) return 0;
    const auto num = static_cast<__int128>(bytes) * 1'000'000'000'000LL;
    return static_cast<time_ps>((num + bytes_per_sec - 1) / bytes_per_sec);
}

inline int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

} // namespace ianus
