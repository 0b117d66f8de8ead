#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ianus/config.hpp"

namespace ianus {

// Physical DRAM coordinates. Bit layout, MSB to LSB: row | channel | bank |
// column | intra-column byte offset.
struct PhysAddr {
    int64_t row = 0;
    int64_t channel = 0;
    int64_t bank = 0;
    int64_t column = 0;
    int64_t byte_offset = 0;

    uint64_t encode(const HardwareConfig& hw) const;
};

// Placement of one weight matrix as PIM tiles. A tile covers rows_per_tile
// matrix rows (one per (channel, bank) pair over `channels`) and up to
// cols_per_tile elements of each row, all sharing a single DRAM row address.
// Tiles are ordered row-major and occupy consecutive row addresses from
// base_row.
struct TileMap {
    std::string matrix_id;
    int64_t rows = 0; // output dimension
    int64_t cols = 0; // reduction dimension, elements per matrix row
    int64_t dtype_bytes = 2;
    int64_t rows_per_tile = 128;
    int64_t cols_per_tile = 1024;
    int64_t banks_per_channel = 16;
    int64_t base_row = 0;
    std::vector<int32_t> channels; // channel set carrying this matrix

    int64_t row_tiles() const { return ceil_div(rows, rows_per_tile); }
    int64_t col_tiles() const { return ceil_div(cols, cols_per_tile); }
    int64_t num_tiles() const { return row_tiles() * col_tiles(); }
    int64_t tile_rows(int64_t rt) const;   // real extent of row-tile rt
    int64_t tile_cols(int64_t ct) const;   // real extent of col-tile ct
    int64_t dram_row(int64_t rt, int64_t ct) const { return base_row + rt * col_tiles() + ct; }
    // Full DRAM rows consumed, edge tiles included.
    int64_t rows_reserved() const { return num_tiles(); }
    int64_t wasted_bytes(const HardwareConfig& hw) const;
};

TileMap tile_weight_matrix(const std::string& matrix_id, int64_t rows, int64_t cols,
                           const HardwareConfig& hw, int64_t dtype_bytes = 2);

// Same, restricted to an explicit channel subset (head-wise placements).
TileMap tile_weight_matrix_on(const std::string& matrix_id, int64_t rows, int64_t cols,
                              const HardwareConfig& hw, std::vector<int32_t> channels,
                              int64_t dtype_bytes = 2);

PhysAddr map_address(const TileMap& tm, int64_t rt, int64_t ct, int64_t row_in_tile,
                     int64_t col_in_tile, const HardwareConfig& hw);

enum class Region { pim_rows, plain_rows };

struct ParamPlacement {
    std::string name;
    int64_t rows = 0;
    int64_t cols = 0;
    int64_t bytes = 0;
    Region region = Region::plain_rows;
    bool is_fc = false;
    bool duplicated = false; // partitioned mode: copy in both memories
    bool npu_only = false;   // partitioned overflow: never computed on PIM
    bool head_wise = false;  // Q/K/V: per-head channel placement
    int64_t base_row = 0;    // pim_rows region
    int64_t plain_offset = 0; // plain_rows region
};

struct AllocationPlan {
    MemoryMode mode = MemoryMode::unified;
    std::vector<ParamPlacement> params;
    int64_t tiled_rows_used = 0;     // DRAM row addresses consumed by tiles
    int64_t tiled_bytes = 0;         // bytes reserved by the tiled region
    int64_t plain_bytes = 0;         // linear region (non-FC data, duplicates, KV)
    int64_t fragmentation_bytes = 0; // edge-tile waste inside reserved rows
    int64_t total_footprint = 0;

    const ParamPlacement* find(const std::string& name) const;
};

// Lay out every model parameter plus the KV-cache region. Throws when the
// model does not fit the configured capacity (unless enforcement is off, for
// device-normalized baselines). `devices` shards matrix rows for symmetric
// multi-device runs.
AllocationPlan plan_allocation(const ModelConfig& model, const HardwareConfig& hw,
                               MemoryMode mode, int64_t devices = 1,
                               bool enforce_capacity = true);

// CSV: matrix,tile_row,tile_col,row_in_tile,channel,bank,dram_row
std::string dump_allocation_csv(const AllocationPlan& plan, const HardwareConfig& hw,
                                int64_t max_rows_per_matrix = 256);

} // namespace ianus
