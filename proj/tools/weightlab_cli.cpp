// Command-line driver for the full study protocol and its individual stages.
//
// Subcommands other than run-all re-drive the deterministic pipeline up to
// the stage they need, reusing artifacts already on disk when they were
// produced by the same config.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "weightlab/data.hpp"
#include "weightlab/paper_values.hpp"
#include "weightlab/protocol.hpp"
#include "weightlab/rng.hpp"

namespace fs = std::filesystem;
using namespace weightlab;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
};

ProtocolConfig resolve_config(const CommonOpts& opts) {
    ProtocolConfig cfg = opts.config_path.empty() ? default_protocol_config()
                                                  : load_protocol_config(opts.config_path);
    if (opts.seed_set) cfg.seeds = {opts.seed};
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "protocol config file (key = value lines)");
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", opts.seed, "restrict the run to a single protocol seed")
        ->each([&opts](const std::string&) { opts.seed_set = true; });
}

int drive(const CommonOpts& opts, const std::string& stop_after, bool resume) {
    ProtocolConfig cfg = resolve_config(opts);
    RunOptions options;
    options.resume = resume;
    options.stop_after = stop_after;
    RunManifest manifest = run_protocol(cfg, opts.out_dir, options);
    return manifest.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Model-initialization and weight-level ensemble study toolkit"};
    app.require_subcommand(1);

    CommonOpts gen_opts, train_opts, alpha_opts, ens_opts, eval_opts, sig_opts, report_opts,
        runall_opts;
    std::string train_model;
    std::string ens_family, ens_combo;
    std::string runall_stage;
    std::string replicate_out;
    bool runall_resume = false;

    CLI::App* c_generate = app.add_subcommand("generate", "write the synthetic cohorts as JSONL");
    add_common(c_generate, gen_opts);

    CLI::App* c_train = app.add_subcommand("train", "train one named model (plus dependencies)");
    add_common(c_train, train_opts);
    c_train->add_option("--model", train_model, "model name, e.g. Cold-RP or Warm-IF")->required();

    CLI::App* c_alpha = app.add_subcommand("search-alpha", "run both weight-scaling searches");
    add_common(c_alpha, alpha_opts);

    CLI::App* c_ens = app.add_subcommand("ensemble", "build the weight-level ensembles");
    add_common(c_ens, ens_opts);
    c_ens->add_option("--family", ens_family, "print details for one family (ewa|fslsqp|agelfs)");
    c_ens->add_option("--combo", ens_combo, "print details for one combination (cw|cs|ws|cws)");

    CLI::App* c_eval = app.add_subcommand("evaluate", "evaluate all models on all test sets");
    add_common(c_eval, eval_opts);

    CLI::App* c_sig = app.add_subcommand("significance", "pairwise significance tables");
    add_common(c_sig, sig_opts);

    CLI::App* c_rep = app.add_subcommand("replicate-paper",
                                         "run the SE/Z/p chain on the published study values");
    c_rep->add_option("--out", replicate_out, "optional CSV output path");

    CLI::App* c_report = app.add_subcommand("report", "emit every report file");
    add_common(c_report, report_opts);

    CLI::App* c_runall = app.add_subcommand("run-all", "full protocol over all configured seeds");
    add_common(c_runall, runall_opts);
    c_runall->add_option("--stage", runall_stage, "stop after this stage");
    c_runall->add_flag("--resume", runall_resume, "reuse artifacts from a previous matching run");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*c_generate) {
            ProtocolConfig cfg = resolve_config(gen_opts);
            for (std::uint64_t seed : cfg.seeds) {
                fs::path dir =
                    fs::path(gen_opts.out_dir) / ("seed_" + std::to_string(seed)) / "cohorts";
                fs::create_directories(dir);
                auto dump = [&](CohortConfig c, std::uint64_t stream, const std::string& name) {
                    c.seed = mix_seed(seed, stream);
                    write_cohort_jsonl(dir / (name + ".jsonl"), generate_cohort(c));
                };
                dump(cfg.internal_cfg, 1, "internal");
                dump(cfg.ext_adult_cfg, 2, "ext_adult");
                dump(cfg.ext_ped2_cfg, 3, "ext_ped2");
                dump(cfg.ext_ped11_cfg, 4, "ext_ped11");
                dump(cfg.ext_ped18_cfg, 5, "ext_ped18");
                dump(cfg.pretext_cfg, 6, "pretext");
                std::cout << "wrote cohorts for seed " << seed << " under " << dir << "\n";
            }
            return 0;
        }
        if (*c_rep) {
            auto rows = replicate_paper_significance();
            bool all_match = true;
            for (const auto& r : rows) {
                std::cout << r.comparison.group << ": " << r.comparison.first.label << " vs "
                          << r.comparison.second.label << "  z=" << r.result.z
                          << "  p=" << r.result.p_two_tailed
                          << (r.result.significant ? "  significant" : "  not significant")
                          << (r.matches_reported ? "" : "  [differs from reported verdict]")
                          << "\n";
                all_match = all_match && r.matches_reported;
            }
            if (!replicate_out.empty()) write_replication_csv(replicate_out, rows);
            return all_match ? 0 : 1;
        }
        if (*c_train) {
            bool known = false;
            for (const std::string& m : kIndividualModelNames) known = known || m == train_model;
            if (!known) throw std::runtime_error("unknown model name: " + train_model);
            std::string stage = "full";
            if (train_model == "Pretext") stage = "pretext";
            else if (train_model == "Cold-RP" || train_model == "Cold-IP") stage = "partial";
            return drive(train_opts, stage, true);
        }
        if (*c_alpha) return drive(alpha_opts, "alpha_search", true);
        if (*c_ens) return drive(ens_opts, "ensembles", true);
        if (*c_eval) return drive(eval_opts, "evaluate", true);
        if (*c_sig) return drive(sig_opts, "significance", true);
        if (*c_report) return drive(report_opts, "", true);
        if (*c_runall) return drive(runall_opts, runall_stage, runall_resume);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
