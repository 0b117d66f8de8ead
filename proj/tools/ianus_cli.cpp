#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ianus/engine.hpp"
#include "ianus/scenarios.hpp"
#include "ianus/trace.hpp"

namespace {

std::string out_dir_default() {
    const char* env = std::getenv("IANUS_OUT");
    return env ? std::string(env) : std::string(".");
}

struct CommonArgs {
    std::string hw_file;
    std::string model = "gpt2-m";
    int64_t in_tokens = 128;
    int64_t out_tokens = 8;
    std::string mode = "unified";
    std::string variant = "gen_mu_qkt";
    std::string policy = "pas";
    int64_t devices = 1;

    void attach(CLI::App* app) {
        app->add_option("--hw", hw_file, "hardware config file (defaults built in)");
        app->add_option("--model", model, "builtin model name or config file");
        app->add_option("--in-tokens", in_tokens, "input (summarization) tokens");
        app->add_option("--out-tokens", out_tokens, "output (generation) tokens");
        app->add_option("--mode", mode, "unified|partitioned|plain");
        app->add_option("--variant", variant, "generation attention: gen_mu_qkt|gen_pim_qkt");
        app->add_option("--policy", policy, "pas|naive");
        app->add_option("--devices", devices, "number of devices (symmetric sharding)");
    }

    ianus::HardwareConfig hardware() const {
        ianus::HardwareConfig hw =
            hw_file.empty() ? ianus::builtin_hardware() : ianus::load_hardware_file(hw_file);
        hw.memory_mode = ianus::memory_mode_from_string(mode);
        return hw;
    }

    ianus::ModelConfig model_cfg() const {
        ianus::ModelConfig m = ianus::resolve_model(model);
        m.input_tokens = in_tokens;
        m.output_tokens = out_tokens;
        m.validate();
        return m;
    }

    ianus::RunOptions run_opts() const {
        ianus::RunOptions o;
        o.gen_variant = variant == "gen_pim_qkt" ? ianus::AttentionVariant::gen_pim_qkt
                                                 : ianus::AttentionVariant::gen_mu_qkt;
        o.policy = policy == "naive" ? ianus::SchedulingPolicy::naive
                                     : ianus::SchedulingPolicy::pas;
        o.num_devices = devices;
        return o;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"IANUS NPU-PIM unified-memory accelerator simulator"};
    app.require_subcommand(1);

    CommonArgs compile_args, sim_args, dump_args;
    std::string emit_plan_stage = "generation";
    int64_t emit_plan_step = 1;
    bool emit_plan = false;

    auto* compile = app.add_subcommand("compile", "lower a workload into command streams");
    compile_args.attach(compile);
    compile->add_flag("--emit-plan", emit_plan, "dump the command stream as text");
    compile->add_option("--stage", emit_plan_stage, "summarization|generation");
    compile->add_option("--step", emit_plan_step, "generation step index");

    auto* simulate = app.add_subcommand("simulate", "run one end-to-end simulation");
    sim_args.attach(simulate);
    std::string trace_path, report_json, report_csv;
    bool validate = false, text_report = true;
    simulate->add_option("--trace", trace_path, "dump micro/DRAM command trace to a file");
    simulate->add_flag("--validate", validate, "run the inline timing-legality validator");
    simulate->add_option("--json", report_json, "write the report as JSON");
    simulate->add_option("--csv", report_csv, "append the report as a CSV row");
    simulate->add_flag("!--no-text", text_report, "suppress the text report");

    auto* runsc = app.add_subcommand("run", "run a named experiment scenario");
    std::string scenario_name;
    std::vector<std::string> sc_models;
    std::vector<int64_t> sc_tokens, sc_out, sc_cores, sc_chips, sc_devices;
    std::string out_dir = out_dir_default(), expectations;
    bool explore = false;
    runsc->add_option("scenario", scenario_name, "one of: e2e-latency, breakdown, energy, "
                                                 "adaptive-map, compare-modes, sensitivity, "
                                                 "scaling")
        ->required();
    runsc->add_option("--models", sc_models, "model grid override")->delimiter(',');
    runsc->add_option("--tokens", sc_tokens, "input-token grid override")->delimiter(',');
    runsc->add_option("--out-tokens", sc_out, "output-token grid override")->delimiter(',');
    runsc->add_option("--cores", sc_cores, "sensitivity core grid")->delimiter(',');
    runsc->add_option("--pim-chips", sc_chips, "sensitivity PIM-chip grid")->delimiter(',');
    runsc->add_option("--devices", sc_devices, "scaling device grid")->delimiter(',');
    runsc->add_option("--out-dir", out_dir, "output directory (or $IANUS_OUT)");
    runsc->add_option("--expectations", expectations, "JSON threshold overrides");
    runsc->add_flag("--explore", explore, "skip regression thresholds");

    auto* valid = app.add_subcommand("validate-trace", "check a trace dump against the timing rules");
    std::string trace_file, val_hw_file;
    valid->add_option("file", trace_file, "trace file")->required();
    valid->add_option("--hw", val_hw_file, "hardware config file");

    auto* dump = app.add_subcommand("dump-allocation", "emit the weight-tile placement CSV");
    dump_args.attach(dump);
    std::string alloc_out;
    dump->add_option("--out", alloc_out, "output CSV (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (compile->parsed()) {
            auto hw = compile_args.hardware();
            auto m = compile_args.model_cfg();
            auto alloc = ianus::plan_allocation(m, hw, hw.memory_mode, compile_args.devices);
            ianus::CompileOptions copts;
            copts.gen_variant = compile_args.run_opts().gen_variant;
            copts.policy = compile_args.run_opts().policy;
            copts.force_fc_mu = hw.memory_mode == ianus::MemoryMode::plain;
            copts.num_devices = compile_args.devices;
            const auto stage = emit_plan_stage == "summarization" ? ianus::Stage::summarization
                                                                  : ianus::Stage::generation;
            auto plan = ianus::build_commands(m, hw, stage, emit_plan_step, alloc, copts);
            if (emit_plan) {
                std::cout << ianus::emit_plan_text(plan);
            } else {
                std::cout << "commands: " << plan.cmds.size() << ", syncs: " << plan.sync_count
                          << ", pim macros: " << plan.pim_macro_count << "\n";
            }
        } else if (simulate->parsed()) {
            auto hw = sim_args.hardware();
            auto m = sim_args.model_cfg();
            auto opts = sim_args.run_opts();
            opts.trace_path = trace_path;
            opts.validate = validate;
            auto rep = ianus::run(m, hw, opts);
            if (text_report) std::cout << rep.to_text();
            if (!report_json.empty()) {
                std::ofstream(report_json) << rep.to_json() << "\n";
            }
            if (!report_csv.empty()) {
                const bool fresh = !std::ifstream(report_csv).good();
                std::ofstream out(report_csv, std::ios::app);
                if (fresh) out << ianus::SimReport::csv_header() << "\n";
                out << rep.to_csv_row() << "\n";
            }
            if (validate && rep.validation_violations != 0) {
                std::cerr << "timing violations: " << rep.validation_violations << "\n";
                return 2;
            }
        } else if (runsc->parsed()) {
            ianus::ScenarioOptions so;
            so.out_dir = out_dir;
            so.models = sc_models;
            so.in_tokens = sc_tokens;
            so.out_tokens = sc_out;
            so.cores = sc_cores;
            so.pim_chips = sc_chips;
            so.devices = sc_devices;
            so.regression = !explore;
            so.expectations_path = expectations;
            so.hw = ianus::builtin_hardware();
            auto res = ianus::run_scenario(scenario_name, so);
            for (const auto& c : res.checks) {
                std::cout << (c.pass ? "PASS " : "FAIL ") << res.scenario << '.' << c.name << " = "
                          << c.value << "  (" << c.detail << ")\n";
            }
            for (const auto& f : res.files) std::cout << "wrote " << f << "\n";
            if (so.regression && !res.passed()) return 1;
        } else if (valid->parsed()) {
            auto hw = val_hw_file.empty() ? ianus::builtin_hardware()
                                          : ianus::load_hardware_file(val_hw_file);
            int64_t checked = 0;
            auto violations = ianus::validate_trace_file(trace_file, hw, &checked);
            std::cout << "checked " << checked << " commands, " << violations.size()
                      << " violations\n";
            for (size_t i = 0; i < violations.size() && i < 20; ++i) {
                std::cout << "  " << violations[i] << "\n";
            }
            if (!violations.empty()) return 2;
        } else if (dump->parsed()) {
            auto hw = dump_args.hardware();
            auto m = dump_args.model_cfg();
            auto plan = ianus::plan_allocation(m, hw, hw.memory_mode, dump_args.devices);
            const std::string csv = ianus::dump_allocation_csv(plan, hw);
            if (alloc_out.empty()) {
                std::cout << csv;
            } else {
                std::ofstream(alloc_out) << csv;
                std::cout << "wrote " << alloc_out << "\n";
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
