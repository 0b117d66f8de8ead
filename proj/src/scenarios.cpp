#include "ianus/scenarios.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ianus {

bool ScenarioResult::passed() const {
    for (const auto& c : checks) {
        if (!c.pass) return false;
    }
    return true;
}

std::vector<std::string> scenario_names() {
    return {"e2e-latency", "breakdown", "energy", "adaptive-map",
            "compare-modes", "sensitivity", "scaling"};
}

std::map<std::string, double> load_expectations(const std::string& path) {
    // Paper-derived regression bands. Keys are <scenario>.<check>.
    std::map<std::string, double> e = {
        {"breakdown.decoder_speedup_min", 2.8},
        {"breakdown.decoder_speedup_max", 5.2},
        {"energy.mem_reduction_min", 8.0},
        {"energy.total_gain_min", 2.5},
        {"energy.total_gain_max", 5.5},
        {"compare-modes.unified_speedup_min", 1.2},
        {"compare-modes.unified_speedup_max", 1.8},
        {"compare-modes.partitioned_sched_gain_min", 1.15},
        {"compare-modes.scheduling_gain_min", 1.20},
        {"scaling.speedup_4dev_min", 2.0},
        {"scaling.speedup_4dev_max", 3.0},
    };
    if (path.empty()) return e;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open expectations file: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    for (auto& [k, v] : j.items()) e[k] = v.get<double>();
    return e;
}

namespace {

namespace fs = std::filesystem;

struct Grid {
    std::vector<std::string> models;
    std::vector<int64_t> in_tokens;
    std::vector<int64_t> out_tokens;
};

Grid grid_or(const ScenarioOptions& o, Grid def) {
    Grid g = std::move(def);
    if (!o.models.empty()) g.models = o.models;
    if (!o.in_tokens.empty()) g.in_tokens = o.in_tokens;
    if (!o.out_tokens.empty()) g.out_tokens = o.out_tokens;
    return g;
}

std::string write_file(const std::string& dir, const std::string& name,
                       const std::string& content) {
    fs::create_directories(dir);
    const std::string path = (fs::path(dir) / name).string();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
    return path;
}

SimReport run_one(const ScenarioOptions& o, const std::string& model_name, int64_t in, int64_t out,
                  MemoryMode mode, RunOptions ropts = {}) {
    ModelConfig m = resolve_model(model_name);
    m.input_tokens = in;
    m.output_tokens = out;
    HardwareConfig hw = o.hw;
    hw.memory_mode = mode;
    return run(m, hw, ropts);
}

void check(ScenarioResult& r, const std::string& name, bool pass, double value,
           std::string detail) {
    r.checks.push_back({name, pass, value, std::move(detail)});
}

void write_summary(ScenarioResult& r, const std::string& dir) {
    nlohmann::json j;
    j["scenario"] = r.scenario;
    j["passed"] = r.passed();
    for (const auto& c : r.checks) {
        j["checks"][c.name] = {{"pass", c.pass}, {"value", c.value}, {"detail", c.detail}};
    }
    for (const auto& f : r.files) j["files"].push_back(f);
    r.files.push_back(write_file(dir, r.scenario + "_summary.json", j.dump(2)));
}

double class_ns(const StageStats& st, OpClass c) {
    return static_cast<double>(st.class_busy[static_cast<size_t>(c)]);
}

// Generation-stage decoder time: everything the decoder blocks spend, i.e.
// the walls minus the LM head's attributed share.
double decoder_ns(const SimReport& r) {
    return static_cast<double>(r.gen.wall) -
           static_cast<double>(r.gen.class_attributed[static_cast<size_t>(OpClass::lm_head)]);
}

ScenarioResult scenario_e2e(const ScenarioOptions& o) {
    ScenarioResult r{"e2e-latency", {}, {}};
    Grid g = grid_or(o, {{"gpt2-m", "gpt2-l", "gpt2-xl"}, {64}, {1, 8, 32}});
    std::ostringstream csv;
    csv << SimReport::csv_header() << "\n";
    for (const auto& mn : g.models) {
        for (int64_t in : g.in_tokens) {
            for (int64_t out : g.out_tokens) {
                SimReport rep = run_one(o, mn, in, out, MemoryMode::unified);
                csv << rep.to_csv_row() << "\n";
                check(r, mn + "_" + std::to_string(in) + "_" + std::to_string(out) + "_ran",
                      rep.total_ps > 0, rep.total_ps / 1e3, "total_ns");
            }
        }
    }
    r.files.push_back(write_file(o.out_dir, "e2e_latency.csv", csv.str()));
    return r;
}

ScenarioResult scenario_breakdown(const ScenarioOptions& o,
                                  const std::map<std::string, double>& ex) {
    ScenarioResult r{"breakdown", {}, {}};
    Grid g = grid_or(o, {{"gpt2-xl", "gpt2-l"}, {256}, {512}});
    std::ostringstream csv;
    csv << "model,mode,decoder_gen_ns,fc_qkv_ns,self_attn_ns,fc_proj_ns,ffn_ns,layer_norm_ns,"
           "residual_ns,lm_head_ns\n";
    for (const auto& mn : g.models) {
        SimReport plain = run_one(o, mn, g.in_tokens[0], g.out_tokens[0], MemoryMode::plain);
        SimReport unified = run_one(o, mn, g.in_tokens[0], g.out_tokens[0], MemoryMode::unified);
        for (const SimReport* rep : {&plain, &unified}) {
            csv << mn << ',' << to_string(rep->mode) << ',' << decoder_ns(*rep);
            for (OpClass c : {OpClass::fc_qkv, OpClass::self_attn, OpClass::fc_proj, OpClass::ffn,
                              OpClass::layer_norm, OpClass::residual, OpClass::lm_head}) {
                csv << ',' << class_ns(rep->gen, c);
            }
            csv << "\n";
        }
        const double speedup = decoder_ns(plain) / decoder_ns(unified);
        const double qkv_speedup = (class_ns(plain.gen, OpClass::fc_qkv) +
                                    class_ns(plain.gen, OpClass::fc_proj)) /
                                   (class_ns(unified.gen, OpClass::fc_qkv) +
                                    class_ns(unified.gen, OpClass::fc_proj));
        const double ffn_speedup =
            class_ns(plain.gen, OpClass::ffn) / class_ns(unified.gen, OpClass::ffn);
        if (o.regression && mn == "gpt2-xl") {
            check(r, "decoder_speedup_band",
                  speedup >= ex.at("breakdown.decoder_speedup_min") &&
                      speedup <= ex.at("breakdown.decoder_speedup_max"),
                  speedup, "plain/unified generation decoder");
            check(r, "ffn_speedup_exceeds_qkv", ffn_speedup > qkv_speedup, ffn_speedup,
                  "ffn=" + std::to_string(ffn_speedup) + " qkv=" + std::to_string(qkv_speedup));
        }
    }
    r.files.push_back(write_file(o.out_dir, "breakdown.csv", csv.str()));
    return r;
}

ScenarioResult scenario_energy(const ScenarioOptions& o, const std::map<std::string, double>& ex) {
    ScenarioResult r{"energy", {}, {}};
    Grid g = grid_or(o, {{"gpt2-m", "gpt2-l", "gpt2-xl", "gpt2-2.5b"}, {256}, {512}});
    std::ostringstream csv;
    csv << "model,mode,core_j,mem_j,pim_j,total_j\n";
    for (const auto& mn : g.models) {
        SimReport plain = run_one(o, mn, g.in_tokens[0], g.out_tokens[0], MemoryMode::plain);
        SimReport unified = run_one(o, mn, g.in_tokens[0], g.out_tokens[0], MemoryMode::unified);
        for (const SimReport* rep : {&plain, &unified}) {
            csv << mn << ',' << to_string(rep->mode) << ',' << rep->energy.core_compute << ','
                << rep->energy.normal_mem << ',' << rep->energy.pim_ops << ','
                << rep->energy.total() << "\n";
        }
        const double mem_ratio = plain.energy.normal_mem / unified.energy.normal_mem;
        const double total_ratio = plain.energy.total() / unified.energy.total();
        if (o.regression) {
            check(r, mn + "_mem_reduction", mem_ratio >= ex.at("energy.mem_reduction_min"),
                  mem_ratio, "normal-memory energy, plain/unified");
            check(r, mn + "_total_gain",
                  total_ratio >= ex.at("energy.total_gain_min") &&
                      total_ratio <= ex.at("energy.total_gain_max"),
                  total_ratio, "total energy, plain/unified");
        }
    }
    r.files.push_back(write_file(o.out_dir, "energy.csv", csv.str()));
    return r;
}

ScenarioResult scenario_adaptive(const ScenarioOptions& o) {
    ScenarioResult r{"adaptive-map", {}, {}};
    Grid g = grid_or(o, {{"gpt2-m", "gpt2-l", "gpt2-xl", "gpt2-2.5b"}, {4, 8, 16}, {1}});
    std::ostringstream csv;
    csv << "model,n,mapping,total_ns,pim_macros\n";
    for (const auto& mn : g.models) {
        for (int64_t n : g.in_tokens) {
            for (int mapping = 0; mapping < 3; ++mapping) {
                RunOptions ro;
                ro.force_fc_pim = mapping == 0;
                ro.force_fc_mu = mapping == 1;
                SimReport rep = run_one(o, mn, n, 1, MemoryMode::unified, ro);
                const char* name = mapping == 0 ? "pim" : mapping == 1 ? "mu" : "adaptive";
                csv << mn << ',' << n << ',' << name << ',' << rep.total_ps / 1e3 << ','
                    << rep.pim_macros << "\n";
            }
        }
    }
    if (o.regression) {
        // Fig-11 pinned decisions for the 1024-embedding model: PIM at 8
        // input tokens, MU at 16, for every decoder FC.
        HardwareConfig hw = o.hw;
        ModelConfig m = builtin_model("gpt2-m");
        AllocationPlan alloc = plan_allocation(m, hw, MemoryMode::unified);
        for (int64_t n : {int64_t{8}, int64_t{16}}) {
            ModelConfig mm = m;
            mm.input_tokens = n;
            StagePlan plan = build_commands(mm, hw, Stage::summarization, 0, alloc);
            bool all_pim = true, all_mu = true;
            for (const auto& d : plan.fc_decisions) {
                all_pim = all_pim && d.to_pim;
                all_mu = all_mu && !d.to_pim;
            }
            if (n == 8) {
                check(r, "gpt2m_n8_pim", all_pim, all_pim ? 1 : 0, "all decoder FCs map to PIM");
            } else {
                check(r, "gpt2m_n16_mu", all_mu, all_mu ? 1 : 0, "all decoder FCs map to MU");
            }
        }
    }
    r.files.push_back(write_file(o.out_dir, "adaptive_map.csv", csv.str()));
    return r;
}

ScenarioResult scenario_compare_modes(const ScenarioOptions& o,
                                      const std::map<std::string, double>& ex) {
    ScenarioResult r{"compare-modes", {}, {}};
    Grid g = grid_or(o, {{"gpt2-m", "gpt2-l", "gpt2-xl"}, {256}, {512}});
    std::ostringstream csv;
    csv << "model,mode,policy,variant,total_ns,dma_pim_overlap_ns\n";
    struct Variant {
        MemoryMode mode;
        SchedulingPolicy policy;
        AttentionVariant variant;
        const char* label;
    };
    const Variant variants[] = {
        {MemoryMode::partitioned, SchedulingPolicy::naive, AttentionVariant::gen_pim_qkt,
         "partitioned-naive"},
        {MemoryMode::partitioned, SchedulingPolicy::pas, AttentionVariant::gen_mu_qkt,
         "partitioned-scheduled"},
        {MemoryMode::unified, SchedulingPolicy::naive, AttentionVariant::gen_pim_qkt,
         "unified-naive"},
        {MemoryMode::unified, SchedulingPolicy::pas, AttentionVariant::gen_pim_qkt,
         "unified-pim-qkt"},
        {MemoryMode::unified, SchedulingPolicy::pas, AttentionVariant::gen_mu_qkt,
         "unified-mu-qkt"},
    };
    double sched_gain_sum = 0, unified_speedup_sum = 0, part_gain_sum = 0;
    int models_done = 0;
    bool mu_beats_pim_all = true;
    for (const auto& mn : g.models) {
        std::map<std::string, SimReport> reps;
        for (const auto& v : variants) {
            RunOptions ro;
            ro.policy = v.policy;
            ro.gen_variant = v.variant;
            SimReport rep = run_one(o, mn, g.in_tokens[0], g.out_tokens[0], v.mode, ro);
            csv << mn << ',' << to_string(v.mode) << ','
                << (v.policy == SchedulingPolicy::pas ? "pas" : "naive") << ','
                << to_string(v.variant) << ',' << rep.total_ps / 1e3 << ','
                << rep.dma_pim_overlap_ps / 1e3 << "\n";
            reps[v.label] = std::move(rep);
        }
        const double t_part_naive = static_cast<double>(reps["partitioned-naive"].total_ps);
        const double t_part = static_cast<double>(reps["partitioned-scheduled"].total_ps);
        const double t_naive = static_cast<double>(reps["unified-naive"].total_ps);
        const double t_pimq = static_cast<double>(reps["unified-pim-qkt"].total_ps);
        const double t_best = static_cast<double>(reps["unified-mu-qkt"].total_ps);
        unified_speedup_sum += t_part / t_best;
        part_gain_sum += t_part_naive / t_part;
        sched_gain_sum += t_naive / t_best;
        mu_beats_pim_all = mu_beats_pim_all && t_best < t_pimq;
        ++models_done;
        check(r, mn + "_unified_overlap_zero", reps["unified-mu-qkt"].dma_pim_overlap_ps == 0,
              static_cast<double>(reps["unified-mu-qkt"].dma_pim_overlap_ps),
              "no off-chip DMA inside PIM macro windows");
        check(r, mn + "_partitioned_overlap_seen",
              reps["partitioned-scheduled"].dma_pim_overlap_ps > 0,
              static_cast<double>(reps["partitioned-scheduled"].dma_pim_overlap_ps),
              "DRAM access runs beside PIM compute");
    }
    if (o.regression && models_done > 0) {
        const double uni = unified_speedup_sum / models_done;
        const double part = part_gain_sum / models_done;
        const double sched = sched_gain_sum / models_done;
        check(r, "unified_vs_partitioned_band",
              uni >= ex.at("compare-modes.unified_speedup_min") &&
                  uni <= ex.at("compare-modes.unified_speedup_max"),
              uni, "avg partitioned-scheduled / unified");
        check(r, "partitioned_scheduling_gain",
              part >= ex.at("compare-modes.partitioned_sched_gain_min"), part,
              "avg partitioned naive/scheduled");
        check(r, "scheduling_gain", sched >= ex.at("compare-modes.scheduling_gain_min"), sched,
              "avg unified naive/scheduled");
        check(r, "mu_qkt_beats_pim_qkt", mu_beats_pim_all, mu_beats_pim_all ? 1 : 0,
              "every head_dim-64 model");
    }
    r.files.push_back(write_file(o.out_dir, "compare_modes.csv", csv.str()));
    return r;
}

ScenarioResult scenario_sensitivity(const ScenarioOptions& o) {
    ScenarioResult r{"sensitivity", {}, {}};
    std::vector<int64_t> cores = o.cores.empty() ? std::vector<int64_t>{1, 2, 4} : o.cores;
    std::vector<int64_t> chips = o.pim_chips.empty() ? std::vector<int64_t>{1, 2, 4} : o.pim_chips;
    const std::string mn = o.models.empty() ? "gpt2-l" : o.models.front();
    std::ostringstream csv;
    csv << "cores,pim_chips,in,out,total_ns,normalized\n";
    std::map<std::tuple<int64_t, int64_t, int64_t>, double> totals;
    for (int64_t in_out = 0; in_out < 2; ++in_out) {
        const int64_t out = in_out == 0 ? 1 : 512;
        double base = 0;
        for (int64_t nc : cores) {
            for (int64_t ch : chips) {
                if (nc != cores.back() && ch != chips.back()) continue; // vary one axis at a time
                HardwareConfig hw = o.hw;
                hw.num_cores = nc;
                hw.pim_compute_channels = ch * hw.channels_per_chip;
                ScenarioOptions oo = o;
                oo.hw = hw;
                SimReport rep = run_one(oo, mn, 256, out, MemoryMode::unified);
                totals[{nc, ch, out}] = static_cast<double>(rep.total_ps);
                if (nc == cores.back() && ch == chips.back()) base = static_cast<double>(rep.total_ps);
            }
        }
        for (auto& [k, v] : totals) {
            if (std::get<2>(k) != out) continue;
            csv << std::get<0>(k) << ',' << std::get<1>(k) << ",256," << out << ',' << v / 1e3
                << ',' << (base > 0 ? v / base : 0) << "\n";
        }
    }
    if (o.regression) {
        // Ordinal shape: fewer cores hurt the summarization-only case more;
        // fewer PIM chips hurt the generation-dominant case more.
        const double core_slow_summ = totals[{cores.front(), chips.back(), 1}] /
                                      totals[{cores.back(), chips.back(), 1}];
        const double core_slow_gen = totals[{cores.front(), chips.back(), 512}] /
                                     totals[{cores.back(), chips.back(), 512}];
        const double chip_slow_summ = totals[{cores.back(), chips.front(), 1}] /
                                      totals[{cores.back(), chips.back(), 1}];
        const double chip_slow_gen = totals[{cores.back(), chips.front(), 512}] /
                                     totals[{cores.back(), chips.back(), 512}];
        check(r, "cores_hit_summarization_more", core_slow_summ > core_slow_gen, core_slow_summ,
              "slowdown(256,1)=" + std::to_string(core_slow_summ) +
                  " vs (256,512)=" + std::to_string(core_slow_gen));
        check(r, "pim_hit_generation_more", chip_slow_gen > chip_slow_summ, chip_slow_gen,
              "slowdown(256,512)=" + std::to_string(chip_slow_gen) +
                  " vs (256,1)=" + std::to_string(chip_slow_summ));
    }
    r.files.push_back(write_file(o.out_dir, "sensitivity.csv", csv.str()));
    return r;
}

ScenarioResult scenario_scaling(const ScenarioOptions& o, const std::map<std::string, double>& ex) {
    ScenarioResult r{"scaling", {}, {}};
    const std::string mn = o.models.empty() ? "gpt-6.7b" : o.models.front();
    std::vector<int64_t> devices = o.devices.empty() ? std::vector<int64_t>{1, 2, 4} : o.devices;
    std::ostringstream csv;
    csv << "model,devices,total_ns,speedup_vs_1\n";
    std::map<int64_t, double> totals;
    for (int64_t d : devices) {
        RunOptions ro;
        ro.num_devices = d;
        ro.ignore_capacity = d == 1; // single-device-equivalent baseline
        SimReport rep = run_one(o, mn, 256, 64, MemoryMode::unified, ro);
        totals[d] = static_cast<double>(rep.total_ps);
    }
    for (int64_t d : devices) {
        csv << mn << ',' << d << ',' << totals[d] / 1e3 << ','
            << (totals.count(1) ? totals[1] / totals[d] : 0) << "\n";
    }
    if (o.regression && totals.count(1) && totals.count(4)) {
        const double s4 = totals[1] / totals[4];
        check(r, "speedup_4dev_band",
              s4 >= ex.at("scaling.speedup_4dev_min") && s4 <= ex.at("scaling.speedup_4dev_max"),
              s4, "6.7B (256,64), 4 devices vs 1-device-equivalent");
        check(r, "sublinear", s4 < 4.0, s4, "strictly below linear");
        if (totals.count(2)) {
            check(r, "monotone", totals[2] < totals[1] && totals[4] < totals[2],
                  totals[1] / totals[2], "more devices, less time");
        }
    }
    r.files.push_back(write_file(o.out_dir, "scaling.csv", csv.str()));
    return r;
}

} // namespace

ScenarioResult run_scenario(const std::string& name, const ScenarioOptions& opts) {
    const auto ex = load_expectations(opts.expectations_path);
    ScenarioResult r;
    if (name == "e2e-latency") r = scenario_e2e(opts);
    else if (name == "breakdown") r = scenario_breakdown(opts, ex);
    else if (name == "energy") r = scenario_energy(opts, ex);
    else if (name == "adaptive-map") r = scenario_adaptive(opts);
    else if (name == "compare-modes") r = scenario_compare_modes(opts, ex);
    else if (name == "sensitivity") r = scenario_sensitivity(opts);
    else if (name == "scaling") r = scenario_scaling(opts, ex);
    else throw std::runtime_error("unknown scenario: " + name);
    write_summary(r, opts.out_dir);
    return r;
}

} // namespace ianus
