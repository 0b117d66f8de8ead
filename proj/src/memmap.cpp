#include "ianus/memmap.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ianus {

uint64_t PhysAddr::encode(const HardwareConfig& hw) const {
    const int64_t cols_per_row = hw.row_size / hw.column_bytes;
    uint64_t a = static_cast<uint64_t>(row);
    a = a * static_cast<uint64_t>(hw.num_channels) + static_cast<uint64_t>(channel);
    a = a * static_cast<uint64_t>(hw.banks_per_channel) + static_cast<uint64_t>(bank);
    a = a * static_cast<uint64_t>(cols_per_row) + static_cast<uint64_t>(column);
    a = a * static_cast<uint64_t>(hw.column_bytes) + static_cast<uint64_t>(byte_offset);
    return a;
}

int64_t TileMap::tile_rows(int64_t rt) const {
    if (rt < 0 || rt >= row_tiles()) throw std::out_of_range("row tile index");
    if (rt + 1 < row_tiles()) return rows_per_tile;
    return rows - rt * rows_per_tile;
}

int64_t TileMap::tile_cols(int64_t ct) const {
    if (ct < 0 || ct >= col_tiles()) throw std::out_of_range("col tile index");
    if (ct + 1 < col_tiles()) return cols_per_tile;
    return cols - ct * cols_per_tile;
}

int64_t TileMap::wasted_bytes(const HardwareConfig& hw) const {
    // Edge tiles occupy a full DRAM row per (channel, bank); unused columns
    // and unused rows are dead capacity.
    const int64_t full = rows_per_tile * cols_per_tile * dtype_bytes;
    int64_t waste = 0;
    for (int64_t rt = 0; rt < row_tiles(); ++rt) {
        for (int64_t ct = 0; ct < col_tiles(); ++ct) {
            waste += full - tile_rows(rt) * tile_cols(ct) * dtype_bytes;
        }
    }
    (void)hw;
    return waste;
}

TileMap tile_weight_matrix_on(const std::string& matrix_id, int64_t rows, int64_t cols,
                              const HardwareConfig& hw, std::vector<int32_t> channels,
                              int64_t dtype_bytes) {
    if (rows <= 0 || cols <= 0) {
        throw std::runtime_error("tile_weight_matrix: non-positive shape for " + matrix_id);
    }
    if (channels.empty()) throw std::runtime_error("tile_weight_matrix: empty channel set");
    TileMap tm;
    tm.matrix_id = matrix_id;
    tm.rows = rows;
    tm.cols = cols;
    tm.dtype_bytes = dtype_bytes;
    tm.banks_per_channel = hw.banks_per_channel;
    tm.rows_per_tile = hw.banks_per_channel * static_cast<int64_t>(channels.size());
    tm.cols_per_tile = hw.cols_per_dram_row(dtype_bytes);
    tm.channels = std::move(channels);
    return tm;
}

TileMap tile_weight_matrix(const std::string& matrix_id, int64_t rows, int64_t cols,
                           const HardwareConfig& hw, int64_t dtype_bytes) {
    std::vector<int32_t> chans(static_cast<size_t>(hw.pim_compute_channels));
    std::iota(chans.begin(), chans.end(), 0);
    return tile_weight_matrix_on(matrix_id, rows, cols, hw, std::move(chans), dtype_bytes);
}

PhysAddr map_address(const TileMap& tm, int64_t rt, int64_t ct, int64_t row_in_tile,
                     int64_t col_in_tile, const HardwareConfig& hw) {
    if (row_in_tile < 0 || row_in_tile >= tm.tile_rows(rt)) {
        throw std::out_of_range("map_address: row_in_tile out of range");
    }
    if (col_in_tile < 0 || col_in_tile >= tm.tile_cols(ct)) {
        throw std::out_of_range("map_address: col_in_tile out of range");
    }
    PhysAddr a;
    // Bank varies fastest within a tile's row group, then channel.
    a.bank = row_in_tile % tm.banks_per_channel;
    a.channel = tm.channels.at(static_cast<size_t>(row_in_tile / tm.banks_per_channel));
    a.row = tm.dram_row(rt, ct);
    const int64_t elems_per_col = hw.elems_per_column(tm.dtype_bytes);
    a.column = col_in_tile / elems_per_col;
    a.byte_offset = (col_in_tile % elems_per_col) * tm.dtype_bytes;
    return a;
}

const ParamPlacement* AllocationPlan::find(const std::string& name) const {
    for (const auto& p : params) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

namespace {

struct MatrixDesc {
    std::string name;
    int64_t rows = 0; // output dim
    int64_t cols = 0; // reduction dim
    bool is_fc = false;
    bool head_wise = false;
};

std::vector<MatrixDesc> enumerate_matrices(const ModelConfig& m, int64_t devices) {
    // Matrix rows (the output dimensions) shard evenly across devices.
    auto shard = [&](int64_t rows) { return ceil_div(rows, devices); };
    std::vector<MatrixDesc> out;
    out.push_back({"embedding", shard(m.vocab_size), m.embedding_dim, false, false});
    for (int64_t b = 0; b < m.num_blocks; ++b) {
        const std::string p = "blk" + std::to_string(b) + ".";
        out.push_back({p + "qkv", shard(3 * m.embedding_dim), m.embedding_dim, true, true});
        out.push_back({p + "proj", shard(m.embedding_dim), m.embedding_dim, true, false});
        out.push_back({p + "fc1", shard(m.ffn_dim()), m.embedding_dim, true, false});
        out.push_back({p + "fc2", shard(m.embedding_dim), m.ffn_dim(), true, false});
    }
    if (m.family == ModelFamily::gpt) {
        out.push_back({"lm_head", shard(m.vocab_size), m.embedding_dim, true, false});
    } else {
        out.push_back({"task_head", 2, m.embedding_dim, false, false});
    }
    return out;
}

} // namespace

AllocationPlan plan_allocation(const ModelConfig& model, const HardwareConfig& hw,
                               MemoryMode mode, int64_t devices, bool enforce_capacity) {
    AllocationPlan plan;
    plan.mode = mode;

    const auto mats = enumerate_matrices(model, std::max<int64_t>(1, devices));
    const int64_t row_bytes_all = hw.row_size * hw.banks_per_channel * hw.num_channels;

    // Capacity split: partitioned mode dedicates the PIM-compute channels to
    // PIM and the remainder to the NPU's own DRAM; plain/unified see the full
    // device.
    int64_t pim_half = hw.dram_capacity;
    int64_t npu_half = 0;
    if (mode == MemoryMode::partitioned) {
        pim_half = hw.dram_capacity * hw.pim_compute_channels / hw.num_channels / 2;
        npu_half = hw.dram_capacity - pim_half;
        // Equal halves by default (4 GB + 4 GB for the stock device).
        pim_half = hw.dram_capacity / 2;
        npu_half = hw.dram_capacity - pim_half;
    }

    int64_t row_cursor = 0;
    int64_t plain_cursor = 0;
    int64_t pim_bytes = 0;

    // Pass 1: place every parameter once. FC weights go PIM-tiled while the
    // tiled region has room; overflow keeps a single linear copy on the NPU
    // side and is never targeted with PIM compute.
    for (const auto& md : mats) {
        ParamPlacement p;
        p.name = md.name;
        p.rows = md.rows;
        p.cols = md.cols;
        p.is_fc = md.is_fc;
        p.head_wise = md.head_wise;
        p.bytes = md.rows * md.cols * model.dtype_bytes;

        const bool tile_it = md.is_fc && mode != MemoryMode::plain;
        bool tiled = false;
        if (tile_it) {
            TileMap tm = tile_weight_matrix(md.name, md.rows, md.cols, hw, model.dtype_bytes);
            const int64_t reserved = tm.rows_reserved() * hw.row_size * hw.banks_per_channel *
                                     hw.pim_compute_channels;
            const int64_t budget = !enforce_capacity ? INT64_MAX
                                   : (mode == MemoryMode::partitioned) ? pim_half
                                                                       : hw.dram_capacity;
            if (pim_bytes + reserved <= budget) {
                p.region = Region::pim_rows;
                p.base_row = row_cursor;
                row_cursor += tm.rows_reserved();
                plan.tiled_rows_used += tm.rows_reserved();
                plan.tiled_bytes += reserved;
                plan.fragmentation_bytes += tm.wasted_bytes(hw);
                pim_bytes += reserved;
                tiled = true;
            }
        }
        if (!tiled) {
            p.region = Region::plain_rows;
            p.npu_only = md.is_fc && mode == MemoryMode::partitioned;
            p.plain_offset = plain_cursor;
            plain_cursor += p.bytes;
            plan.plain_bytes += p.bytes;
        }
        plan.params.push_back(std::move(p));
    }

    // KV cache lives in the linear region above the tiled weights.
    if (model.family == ModelFamily::gpt) {
        const int64_t max_seq = model.input_tokens + model.output_tokens;
        ParamPlacement kv;
        kv.name = "kv_cache";
        kv.rows = ceil_div(2 * model.num_blocks * max_seq, std::max<int64_t>(1, devices));
        kv.cols = model.embedding_dim;
        kv.bytes = kv.rows * kv.cols * model.dtype_bytes;
        kv.region = Region::plain_rows;
        kv.plain_offset = plain_cursor;
        plain_cursor += kv.bytes;
        plan.plain_bytes += kv.bytes;
        plan.params.push_back(std::move(kv));
    }

    // Pass 2 (partitioned only): duplicate PIM-resident FC weights into the
    // NPU half while it has room, so the matrix unit can read them without
    // cross-partition traffic. Whatever stays non-duplicated is computed on
    // the PIM alone.
    if (mode == MemoryMode::partitioned) {
        for (auto& p : plan.params) {
            if (!p.is_fc || p.region != Region::pim_rows) continue;
            if (plain_cursor + p.bytes > npu_half) continue;
            p.duplicated = true;
            p.plain_offset = plain_cursor;
            plain_cursor += p.bytes;
            plan.plain_bytes += p.bytes;
        }
    }

    plan.total_footprint = plan.tiled_bytes + plan.plain_bytes;

    if (enforce_capacity) {
        if (mode == MemoryMode::partitioned) {
            if (plan.plain_bytes > npu_half) {
                throw std::runtime_error(
                    "allocation failure: NPU half exceeded (" + std::to_string(plan.plain_bytes) +
                    " > " + std::to_string(npu_half) + " bytes); consider multiple devices");
            }
        } else if (plan.total_footprint > hw.dram_capacity) {
            throw std::runtime_error("allocation failure: model footprint " +
                                     std::to_string(plan.total_footprint) +
                                     " bytes exceeds capacity " +
                                     std::to_string(hw.dram_capacity) +
                                     "; consider multiple devices");
        }
    }
    (void)row_bytes_all;
    return plan;
}

std::string dump_allocation_csv(const AllocationPlan& plan, const HardwareConfig& hw,
                                int64_t max_rows_per_matrix) {
    std::ostringstream o;
    o << "matrix,tile_row,tile_col,row_in_tile,channel,bank,dram_row\n";
    for (const auto& p : plan.params) {
        if (p.region != Region::pim_rows) continue;
        TileMap tm = tile_weight_matrix(p.name, p.rows, p.cols, hw);
        tm.base_row = p.base_row;
        int64_t emitted = 0;
        for (int64_t rt = 0; rt < tm.row_tiles() && emitted < max_rows_per_matrix; ++rt) {
            for (int64_t ct = 0; ct < tm.col_tiles() && emitted < max_rows_per_matrix; ++ct) {
                for (int64_t r = 0; r < tm.tile_rows(rt) && emitted < max_rows_per_matrix; ++r) {
                    PhysAddr a = map_address(tm, rt, ct, r, 0, hw);
                    o << p.name << ',' << rt << ',' << ct << ',' << r << ',' << a.channel << ','
                      << a.bank << ',' << a.row << '\n';
                    ++emitted;
                }
            }
        }
    }
    return o.str();
}

} // namespace ianus
