#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "weightlab/data.hpp"
#include "weightlab/gp.hpp"
#include "weightlab/stats.hpp"
#include "weightlab/train.hpp"

namespace weightlab {

/// Everything the batch pipeline needs: cohort configurations, training
/// settings, the alpha search, and ensemble settings.
struct ProtocolConfig {
    std::vector<std::uint64_t> seeds;
    NetworkSpec net;

    CohortConfig internal_cfg;
    CohortConfig ext_adult_cfg;
    CohortConfig ext_ped2_cfg;
    CohortConfig ext_ped11_cfg;
    CohortConfig ext_ped18_cfg;
    CohortConfig pretext_cfg;

    TrainConfig train_cfg;         // partial/full/pretext/head trainings
    TrainConfig search_train_cfg;  // short trainings inside the alpha objective
    BOConfig bo_cfg;
    int ensemble_restarts = 100;
    double shrink_beta = 0.01;

    /// Validation-loss level used to compare convergence speed of cold vs
    /// surrogate-pretrained starts.
    double val_loss_target = 0.63;

    void validate() const;
};

ProtocolConfig default_protocol_config();

/// Canonical key=value rendering; the config hash is FNV-1a over this text.
std::string serialize_config(const ProtocolConfig& config);
std::uint64_t config_hash(const ProtocolConfig& config);

/// Parses `key = value` lines (# comments) as overrides on the defaults.
ProtocolConfig load_protocol_config(const std::filesystem::path& path);
ProtocolConfig parse_protocol_config(const std::string& text);

extern const std::vector<std::string> kIndividualModelNames;  // the nine trained models
extern const std::vector<std::string> kEnsembleFamilies;      // EWA, F-SLSQP, AGELFS

struct StageStatus {
    std::string name;
    bool ok = true;
    std::string error;
};

struct ModelArtifact {
    std::string name;
    std::string weights_file;
    double best_val_loss = 0.0;
    int epochs_to_best = 0;
    int epochs_to_target = -1;  // first epoch with val_loss <= target, -1 if never
    double threshold = 0.5;
    double alpha = 0.0;  // shrink models record their scaling factor
};

struct EnsembleArtifact {
    std::string family;
    std::string name;
    std::vector<std::string> members;
    std::string file;
    std::vector<double> factors;      // F-SLSQP only
    double validation_error = 0.0;    // F-SLSQP only
    double fuzziness = 0.0;           // AGELFS only
    double threshold = 0.5;
};

struct SignificanceRow {
    std::string test;
    std::string metric;  // "mcc" or "recall"
    std::string first, second;
    double value1 = 0.0, value2 = 0.0;
    std::pair<double, double> ci1{0, 0}, ci2{0, 0};
    SignificanceResult result;
};

struct SeedResults {
    std::uint64_t seed = 0;
    std::map<std::string, ModelArtifact> models;
    std::vector<EnsembleArtifact> ensembles;
    double alpha1 = 0.0, alpha2 = 0.0;
    /// metrics[test_tag][model_name]
    std::map<std::string, std::map<std::string, MetricsReport>> metrics;
    std::vector<SignificanceRow> significance;
    std::vector<StageStatus> stages;
    bool ok = true;
};

struct RunManifest {
    std::uint64_t config_hash = 0;
    std::vector<SeedResults> seeds;
    bool ok = true;
};

struct RunOptions {
    /// Reuse per-model/ensemble artifacts already present under out_dir.
    /// Only honored when the stored config.txt matches the current config.
    bool resume = false;
    /// Stop the per-seed stage chain after this stage (empty = run all).
    std::string stop_after;
};

/// Runs the full study protocol for every configured seed, writing all
/// artifacts under out_dir. Stage failures are recorded in the manifest and
/// dependent stages skipped; the manifest's ok flag reflects overall
/// success. Every persisted byte is a deterministic function of the config
/// (wall-clock timings go to the console only).
RunManifest run_protocol(const ProtocolConfig& config, const std::filesystem::path& out_dir,
                         const RunOptions& options = {});

/// Per-seed stage names in execution order.
std::vector<std::string> protocol_stage_names();

void write_manifest_json(const std::filesystem::path& path, const RunManifest& manifest);

/// Names of the test sets every model is evaluated on, in report order.
std::vector<std::string> test_set_names();

}  // namespace weightlab
