#include "weightlab/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "weightlab/agelfs.hpp"
#include "weightlab/ensemble.hpp"
#include "weightlab/init.hpp"
#include "weightlab/paper_values.hpp"
#include "weightlab/rng.hpp"
#include "weightlab/weight_io.hpp"

namespace fs = std::filesystem;

namespace weightlab {

const std::vector<std::string> kIndividualModelNames = {
    "Pretext",   "Cold-RP", "Cold-IP", "Cold-RF", "Warm-RF",
    "Shrink-RF", "Cold-IF", "Warm-IF", "Shrink-IF"};

const std::vector<std::string> kEnsembleFamilies = {"EWA", "F-SLSQP", "AGELFS"};

std::vector<std::string> protocol_stage_names() {
    return {"cohorts",   "pretext",  "partial",      "alpha_search", "full",
            "ensembles", "evaluate", "significance", "figures",      "reports"};
}

namespace {

// Seed-stream identifiers; every random decision in the protocol draws from
// mix_seed(protocol_seed, one of these).
enum Stream : std::uint64_t {
    kStreamInternal = 1,
    kStreamExtAdult = 2,
    kStreamExtPed2 = 3,
    kStreamExtPed11 = 4,
    kStreamExtPed18 = 5,
    kStreamPretext = 6,
    kStreamColdRpInit = 10,
    kStreamColdRfInit = 11,
    kStreamBoAlpha1 = 12,
    kStreamBoAlpha2 = 13,
    kStreamShrinkRfNoise = 14,
    kStreamShrinkIfNoise = 15,
    kStreamSearchNoise = 16,
    kStreamSearchShuffle = 17,
    kStreamFslsqp = 20,        // +combo
    kStreamAgelfsHead = 30,    // +combo
    kStreamTrainShuffle = 40,  // +model index
    kStreamAgelfsShuffle = 50  // +combo
};

const std::vector<std::vector<std::string>> kCombos = {
    {"Cold-IF", "Warm-IF"},
    {"Cold-IF", "Shrink-IF"},
    {"Warm-IF", "Shrink-IF"},
    {"Cold-IF", "Warm-IF", "Shrink-IF"},
};

std::string combo_name(const std::vector<std::string>& members) {
    std::string out;
    for (std::size_t i = 0; i < members.size(); ++i) {
        if (i) out += '+';
        out += members[i];
    }
    return out;
}

std::string file_safe(std::string s) {
    for (char& c : s) {
        if (c == '+' || c == '(' || c == ')' || c == ',' || c == ' ') c = '_';
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return s;
}

}  // namespace

void ProtocolConfig::validate() const {
    if (seeds.empty()) throw std::invalid_argument("ProtocolConfig: needs at least one seed");
    validate_spec(net);
    internal_cfg.validate();
    ext_adult_cfg.validate();
    ext_ped2_cfg.validate();
    ext_ped11_cfg.validate();
    ext_ped18_cfg.validate();
    pretext_cfg.validate();
    train_cfg.validate();
    search_train_cfg.validate();
    bo_cfg.validate();
    if (ensemble_restarts < 1) throw std::invalid_argument("ProtocolConfig: restarts must be >= 1");
    if (!(shrink_beta >= 0.0)) throw std::invalid_argument("ProtocolConfig: shrink_beta must be >= 0");
}

ProtocolConfig default_protocol_config() {
    ProtocolConfig c;
    c.seeds = {101, 102, 103, 104, 105, 106, 107, 108, 109, 110};
    c.net = default_network_spec();

    c.internal_cfg = {2000, 0.65, {1.0, 1.0, 0.14}, 100, 0, CohortTag::internal};
    c.ext_adult_cfg = {500, 0.58, {1.25, 1.0, 0.14}, 25, 0, CohortTag::ext_adult};
    c.ext_ped2_cfg = {500, 0.37, {1.65, 0.55, 0.26}, 25, 0, CohortTag::ext_ped2};
    c.ext_ped11_cfg = {500, 0.31, {1.50, 0.70, 0.21}, 25, 0, CohortTag::ext_ped11};
    c.ext_ped18_cfg = {500, 0.42, {1.20, 0.90, 0.16}, 25, 0, CohortTag::ext_ped18};
    c.pretext_cfg = {1500, 0.50, {1.0, 1.0, 0.12}, 50, 0, CohortTag::pretext};

    c.train_cfg.learning_rate = 0.001;
    c.train_cfg.batch_size = 64;
    c.train_cfg.max_epochs = 15;
    c.train_cfg.patience = 4;

    c.search_train_cfg = c.train_cfg;
    c.search_train_cfg.max_epochs = 4;
    c.search_train_cfg.patience = 1;

    c.bo_cfg.lower = 0.1;
    c.bo_cfg.upper = 0.9;
    c.bo_cfg.n_calls = 16;
    c.bo_cfg.n_random_starts = 6;
    c.bo_cfg.kernel_length_scale = 0.2;
    c.bo_cfg.noise_variance = 1e-6;

    c.ensemble_restarts = 100;
    c.shrink_beta = 0.01;
    c.val_loss_target = 0.63;
    return c;
}

namespace {

void serialize_cohort(std::ostringstream& os, const std::string& prefix, const CohortConfig& c) {
    os << prefix << ".n_samples = " << c.n_samples << "\n";
    os << prefix << ".abnormal_fraction = " << format_double(c.abnormal_fraction) << "\n";
    os << prefix << ".groups = " << c.groups << "\n";
    os << prefix << ".contrast_gain = " << format_double(c.shift.contrast_gain) << "\n";
    os << prefix << ".structure_scale = " << format_double(c.shift.structure_scale) << "\n";
    os << prefix << ".noise_level = " << format_double(c.shift.noise_level) << "\n";
}

}  // namespace

std::string serialize_config(const ProtocolConfig& c) {
    std::ostringstream os;
    os << "seeds = ";
    for (std::size_t i = 0; i < c.seeds.size(); ++i) {
        if (i) os << ",";
        os << c.seeds[i];
    }
    os << "\n";
    serialize_cohort(os, "cohort.internal", c.internal_cfg);
    serialize_cohort(os, "cohort.ext_adult", c.ext_adult_cfg);
    serialize_cohort(os, "cohort.ext_ped2", c.ext_ped2_cfg);
    serialize_cohort(os, "cohort.ext_ped11", c.ext_ped11_cfg);
    serialize_cohort(os, "cohort.ext_ped18", c.ext_ped18_cfg);
    serialize_cohort(os, "cohort.pretext", c.pretext_cfg);
    os << "train.learning_rate = " << format_double(c.train_cfg.learning_rate) << "\n";
    os << "train.batch_size = " << c.train_cfg.batch_size << "\n";
    os << "train.max_epochs = " << c.train_cfg.max_epochs << "\n";
    os << "train.patience = " << c.train_cfg.patience << "\n";
    os << "search.max_epochs = " << c.search_train_cfg.max_epochs << "\n";
    os << "search.patience = " << c.search_train_cfg.patience << "\n";
    os << "bo.lower = " << format_double(c.bo_cfg.lower) << "\n";
    os << "bo.upper = " << format_double(c.bo_cfg.upper) << "\n";
    os << "bo.n_calls = " << c.bo_cfg.n_calls << "\n";
    os << "bo.n_random_starts = " << c.bo_cfg.n_random_starts << "\n";
    os << "bo.length_scale = " << format_double(c.bo_cfg.kernel_length_scale) << "\n";
    os << "bo.noise_variance = " << format_double(c.bo_cfg.noise_variance) << "\n";
    os << "ensemble.restarts = " << c.ensemble_restarts << "\n";
    os << "shrink.beta = " << format_double(c.shrink_beta) << "\n";
    os << "protocol.val_loss_target = " << format_double(c.val_loss_target) << "\n";
    return os.str();
}

std::uint64_t config_hash(const ProtocolConfig& config) {
    std::string repr = serialize_config(config);
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char ch : repr) {
        h ^= ch;
        h *= 0x100000001B3ULL;
    }
    return h;
}

ProtocolConfig parse_protocol_config(const std::string& text) {
    ProtocolConfig c = default_protocol_config();
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        auto issp = [](unsigned char ch) { return std::isspace(ch) != 0; };
        while (!s.empty() && issp(s.front())) s.erase(s.begin());
        while (!s.empty() && issp(s.back())) s.pop_back();
        return s;
    };
    while (std::getline(is, line)) {
        ++lineno;
        auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));

        auto as_u64 = [&] { return static_cast<std::uint64_t>(std::stoull(value)); };
        auto as_int = [&] { return std::stoi(value); };
        auto as_size = [&] { return static_cast<std::size_t>(std::stoull(value)); };
        auto as_double = [&] { return std::stod(value); };

        CohortConfig* cohort = nullptr;
        std::string field = key;
        if (key.rfind("cohort.", 0) == 0) {
            std::string rest = key.substr(7);
            auto dot = rest.find('.');
            if (dot == std::string::npos) {
                throw std::invalid_argument("config line " + std::to_string(lineno) +
                                            ": expected cohort.<name>.<field>");
            }
            std::string name = rest.substr(0, dot);
            field = rest.substr(dot + 1);
            if (name == "internal") cohort = &c.internal_cfg;
            else if (name == "ext_adult") cohort = &c.ext_adult_cfg;
            else if (name == "ext_ped2") cohort = &c.ext_ped2_cfg;
            else if (name == "ext_ped11") cohort = &c.ext_ped11_cfg;
            else if (name == "ext_ped18") cohort = &c.ext_ped18_cfg;
            else if (name == "pretext") cohort = &c.pretext_cfg;
            else throw std::invalid_argument("config line " + std::to_string(lineno) +
                                             ": unknown cohort " + name);
        }

        if (cohort != nullptr) {
            if (field == "n_samples") cohort->n_samples = as_size();
            else if (field == "abnormal_fraction") cohort->abnormal_fraction = as_double();
            else if (field == "groups") cohort->groups = as_int();
            else if (field == "contrast_gain") cohort->shift.contrast_gain = as_double();
            else if (field == "structure_scale") cohort->shift.structure_scale = as_double();
            else if (field == "noise_level") cohort->shift.noise_level = as_double();
            else throw std::invalid_argument("config line " + std::to_string(lineno) +
                                             ": unknown cohort field " + field);
        } else if (key == "seeds") {
            c.seeds.clear();
            std::istringstream vs(value);
            std::string tok;
            while (std::getline(vs, tok, ',')) {
                tok = trim(tok);
                if (!tok.empty()) c.seeds.push_back(std::stoull(tok));
            }
        } else if (key == "train.learning_rate") c.train_cfg.learning_rate = as_double();
        else if (key == "train.batch_size") c.train_cfg.batch_size = as_size();
        else if (key == "train.max_epochs") c.train_cfg.max_epochs = as_int();
        else if (key == "train.patience") c.train_cfg.patience = as_int();
        else if (key == "search.max_epochs") c.search_train_cfg.max_epochs = as_int();
        else if (key == "search.patience") c.search_train_cfg.patience = as_int();
        else if (key == "bo.lower") c.bo_cfg.lower = as_double();
        else if (key == "bo.upper") c.bo_cfg.upper = as_double();
        else if (key == "bo.n_calls") c.bo_cfg.n_calls = as_int();
        else if (key == "bo.n_random_starts") c.bo_cfg.n_random_starts = as_int();
        else if (key == "bo.length_scale") c.bo_cfg.kernel_length_scale = as_double();
        else if (key == "bo.noise_variance") c.bo_cfg.noise_variance = as_double();
        else if (key == "ensemble.restarts") c.ensemble_restarts = as_int();
        else if (key == "shrink.beta") c.shrink_beta = as_double();
        else if (key == "protocol.val_loss_target") c.val_loss_target = as_double();
        else if (key == "seed") { c.seeds = {as_u64()}; }
        else throw std::invalid_argument("config line " + std::to_string(lineno) +
                                         ": unknown key " + key);
    }
    // search config inherits the shared training basics
    c.search_train_cfg.learning_rate = c.train_cfg.learning_rate;
    c.search_train_cfg.batch_size = c.train_cfg.batch_size;
    c.validate();
    return c;
}

ProtocolConfig load_protocol_config(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_protocol_config(ss.str());
}

std::vector<std::string> test_set_names() {
    return {"internal", "ext_adult", "ext_ped2", "ext_ped11", "ext_ped18"};
}

namespace {

struct SeedContext {
    std::uint64_t seed = 0;
    fs::path dir;
    bool resume = false;

    Dataset p_train, p_val, f_train, f_val;
    Dataset pre_train, pre_val;
    std::map<std::string, Dataset> tests;

    std::map<std::string, WeightSet> model_weights;
    std::map<std::string, AgelfsModel> agelfs_models;
    std::map<std::string, std::map<std::string, std::vector<double>>> test_scores;
};

int epochs_to_target(const TrainResult& r, double target) {
    for (std::size_t i = 0; i < r.history.size(); ++i) {
        if (r.history[i].val_loss <= target) return static_cast<int>(i) + 1;
    }
    return -1;
}

bool run_stage(SeedResults& sr, const std::string& name, const std::function<void()>& fn) {
    if (!sr.ok) {
        sr.stages.push_back({name, false, "skipped: earlier stage failed"});
        return false;
    }
    try {
        fn();
        sr.stages.push_back({name, true, ""});
        return true;
    } catch (const std::exception& e) {
        sr.stages.push_back({name, false, e.what()});
        sr.ok = false;
        std::cerr << "seed " << sr.seed << " stage " << name << " failed: " << e.what() << "\n";
        return false;
    }
}

TrainConfig with_seed(TrainConfig cfg, std::uint64_t seed) {
    cfg.rng_seed = seed;
    return cfg;
}

std::size_t model_stream_index(const std::string& name) {
    for (std::size_t i = 0; i < kIndividualModelNames.size(); ++i) {
        if (kIndividualModelNames[i] == name) return i;
    }
    throw std::logic_error("unknown model name " + name);
}

fs::path model_weights_path(const SeedContext& ctx, const std::string& name) {
    return ctx.dir / "models" / (file_safe(name) + ".weights.json");
}

fs::path model_meta_path(const SeedContext& ctx, const std::string& name) {
    return ctx.dir / "models" / (file_safe(name) + ".train.json");
}

// Loads a previously trained model's weights and metadata, if present.
bool try_resume_model(const ProtocolConfig& config, SeedContext& ctx, SeedResults& sr,
                      const std::string& name) {
    if (!ctx.resume) return false;
    fs::path wpath = model_weights_path(ctx, name);
    fs::path mpath = model_meta_path(ctx, name);
    if (!fs::exists(wpath) || !fs::exists(mpath)) return false;
    WeightSet weights = load_weight_set(wpath, config.net);
    std::ifstream mf(mpath);
    nlohmann::json doc = nlohmann::json::parse(mf);
    ModelArtifact art;
    art.name = name;
    art.weights_file = fs::relative(wpath, ctx.dir.parent_path()).string();
    art.best_val_loss = doc.at("best_val_loss").get<double>();
    art.epochs_to_best = doc.at("epochs_to_best").get<int>();
    art.epochs_to_target = doc.at("epochs_to_target").get<int>();
    art.threshold = doc.at("threshold").get<double>();
    art.alpha = doc.value("alpha", 0.0);
    ctx.model_weights[name] = std::move(weights);
    sr.models[name] = art;
    std::cout << "  [" << name << "] resumed from " << art.weights_file << "\n";
    return true;
}

void record_model(SeedContext& ctx, SeedResults& sr, const ProtocolConfig& config,
                  const std::string& name, const WeightSet& weights, const TrainResult& result,
                  const Dataset& val_set, double alpha = 0.0) {
    ModelArtifact art;
    art.name = name;
    art.best_val_loss = result.best.val_loss;
    art.epochs_to_best = result.epochs_to_best;
    art.epochs_to_target = epochs_to_target(result, config.val_loss_target);
    art.alpha = alpha;

    std::vector<double> val_scores = predict_scores(config.net, weights, val_set);
    art.threshold = optimal_threshold(val_scores, dataset_labels(val_set));

    fs::path wpath = model_weights_path(ctx, name);
    save_weight_set(wpath, config.net, weights);
    art.weights_file = fs::relative(wpath, ctx.dir.parent_path()).string();

    std::ofstream mf(model_meta_path(ctx, name), std::ios::binary);
    mf << "{\"best_val_loss\":" << format_double(art.best_val_loss)
       << ",\"epochs_to_best\":" << art.epochs_to_best
       << ",\"epochs_to_target\":" << art.epochs_to_target
       << ",\"threshold\":" << format_double(art.threshold)
       << ",\"alpha\":" << format_double(art.alpha) << "}\n";

    ctx.model_weights[name] = weights;
    sr.models[name] = art;
    std::cout << "  [" << name << "] val_loss " << result.best.val_loss << " epochs "
              << result.epochs_to_best << " threshold " << art.threshold << " ("
              << result.wall_seconds << " s)\n";
}

TrainResult train_named(const ProtocolConfig& config, SeedContext& ctx, const std::string& name,
                        const WeightSet& init, const Dataset& train_set, const Dataset& val_set) {
    TrainConfig cfg = with_seed(
        config.train_cfg, mix_seed(ctx.seed, kStreamTrainShuffle + model_stream_index(name)));
    return train(config.net, init, train_set, val_set, cfg);
}

double alpha_objective(const ProtocolConfig& config, SeedContext& ctx, const WeightSet& base,
                       double alpha, int* counter) {
    ShrinkParams params;
    params.alpha = alpha;
    params.beta_scale = config.shrink_beta;
    params.noise_seed = mix_seed(mix_seed(ctx.seed, kStreamSearchNoise),
                                 static_cast<std::uint64_t>(*counter));
    WeightSet shrunk = shrink_perturb(base, params);
    TrainConfig cfg = with_seed(config.search_train_cfg,
                                mix_seed(mix_seed(ctx.seed, kStreamSearchShuffle),
                                         static_cast<std::uint64_t>(*counter)));
    ++*counter;
    TrainResult r = train(config.net, shrunk, ctx.f_train, ctx.f_val, cfg);
    return r.best.val_loss;
}

std::vector<std::pair<double, double>> pr_curve_points(const std::vector<double>& scores,
                                                       const std::vector<int>& labels) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::size_t pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    std::vector<std::pair<double, double>> points;
    std::size_t cum_tp = 0, cum_all = 0, i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        for (std::size_t k = i; k < j; ++k) cum_tp += static_cast<std::size_t>(labels[order[k]] == 1);
        cum_all += j - i;
        points.emplace_back(static_cast<double>(cum_tp) / static_cast<double>(pos),
                            static_cast<double>(cum_tp) / static_cast<double>(cum_all));
        i = j;
    }
    return points;
}

}  // namespace

RunManifest run_protocol(const ProtocolConfig& config, const fs::path& out_dir,
                         const RunOptions& options) {
    config.validate();
    RunManifest manifest;
    manifest.config_hash = config_hash(config);
    fs::create_directories(out_dir);

    // Resume is only meaningful against artifacts produced by this exact
    // config; otherwise stale files would leak into the run.
    bool resume = options.resume;
    if (resume) {
        std::ifstream cf(out_dir / "config.txt");
        std::ostringstream ss;
        ss << cf.rdbuf();
        if (!cf || ss.str() != serialize_config(config)) resume = false;
    }
    {
        std::ofstream cf(out_dir / "config.txt", std::ios::binary);
        cf << serialize_config(config);
    }

    if (!options.stop_after.empty()) {
        auto names = protocol_stage_names();
        if (std::find(names.begin(), names.end(), options.stop_after) == names.end()) {
            throw std::invalid_argument("unknown stage: " + options.stop_after);
        }
    }
    auto stage_enabled = [&](const std::string& name) {
        if (options.stop_after.empty()) return true;
        auto names = protocol_stage_names();
        auto stop = std::find(names.begin(), names.end(), options.stop_after);
        auto cur = std::find(names.begin(), names.end(), name);
        return cur <= stop;
    };

    for (std::uint64_t seed : config.seeds) {
        std::cout << "=== seed " << seed << " ===\n";
        SeedResults sr;
        sr.seed = seed;
        SeedContext ctx;
        ctx.seed = seed;
        ctx.dir = out_dir / ("seed_" + std::to_string(seed));
        ctx.resume = resume;
        fs::create_directories(ctx.dir / "models");
        fs::create_directories(ctx.dir / "ensembles");
        fs::create_directories(ctx.dir / "alpha");
        fs::create_directories(ctx.dir / "metrics");
        fs::create_directories(ctx.dir / "significance");
        fs::create_directories(ctx.dir / "figures");

        if (stage_enabled("cohorts")) run_stage(sr, "cohorts", [&] {
            auto make_cfg = [&](CohortConfig c, std::uint64_t stream) {
                c.seed = mix_seed(seed, stream);
                return c;
            };
            Cohort internal = generate_cohort(make_cfg(config.internal_cfg, kStreamInternal));
            GroupSplit split = split_group_level(internal);
            PeriodicSplit half = halve_periodic(split.train, split.val);
            ctx.f_train = make_dataset(split.train);
            ctx.f_val = make_dataset(split.val);
            ctx.p_train = make_dataset(half.p_train);
            ctx.p_val = make_dataset(half.p_val);
            ctx.tests["internal"] = make_dataset(split.test);

            ctx.tests["ext_adult"] = make_dataset(
                generate_cohort(make_cfg(config.ext_adult_cfg, kStreamExtAdult)).samples);
            ctx.tests["ext_ped2"] = make_dataset(
                generate_cohort(make_cfg(config.ext_ped2_cfg, kStreamExtPed2)).samples);
            ctx.tests["ext_ped11"] = make_dataset(
                generate_cohort(make_cfg(config.ext_ped11_cfg, kStreamExtPed11)).samples);
            ctx.tests["ext_ped18"] = make_dataset(
                generate_cohort(make_cfg(config.ext_ped18_cfg, kStreamExtPed18)).samples);

            Cohort pretext = generate_cohort(make_cfg(config.pretext_cfg, kStreamPretext));
            GroupSplit psplit = split_group_level(pretext);
            ctx.pre_train = make_dataset(psplit.train);
            ctx.pre_val = make_dataset(psplit.val);
        });

        if (stage_enabled("pretext")) run_stage(sr, "pretext", [&] {
            if (try_resume_model(config, ctx, sr, "Pretext")) return;
            TrainConfig cfg = with_seed(
                config.train_cfg,
                mix_seed(seed, kStreamTrainShuffle + model_stream_index("Pretext")));
            WeightSet start = cold_init(config.net, cfg.rng_seed);
            TrainResult r = train(config.net, start, ctx.pre_train, ctx.pre_val, cfg);
            record_model(ctx, sr, config, "Pretext", r.best.weights, r, ctx.pre_val);
        });

        if (stage_enabled("partial")) run_stage(sr, "partial", [&] {
            if (!try_resume_model(config, ctx, sr, "Cold-RP")) {
                WeightSet cold = cold_init(config.net, mix_seed(seed, kStreamColdRpInit));
                TrainResult rp = train_named(config, ctx, "Cold-RP", cold, ctx.p_train, ctx.p_val);
                record_model(ctx, sr, config, "Cold-RP", rp.best.weights, rp, ctx.p_val);
            }
            if (!try_resume_model(config, ctx, sr, "Cold-IP")) {
                TrainResult ip = train_named(config, ctx, "Cold-IP",
                                             ctx.model_weights.at("Pretext"), ctx.p_train,
                                             ctx.p_val);
                record_model(ctx, sr, config, "Cold-IP", ip.best.weights, ip, ctx.p_val);
            }
        });

        if (stage_enabled("alpha_search")) run_stage(sr, "alpha_search", [&] {
            fs::path alpha_file = ctx.dir / "alpha" / "alpha.json";
            if (ctx.resume && fs::exists(alpha_file)) {
                std::ifstream af(alpha_file);
                nlohmann::json doc = nlohmann::json::parse(af);
                sr.alpha1 = doc.at("alpha1").get<double>();
                sr.alpha2 = doc.at("alpha2").get<double>();
                std::cout << "  [alpha] resumed: " << sr.alpha1 << ", " << sr.alpha2 << "\n";
                return;
            }
            struct SearchSpec {
                const char* base;
                double* out;
                const char* trace;
                std::uint64_t stream;
            };
            for (const SearchSpec& ss : {SearchSpec{"Cold-RP", &sr.alpha1, "alpha1_trace.csv",
                                                    kStreamBoAlpha1},
                                         SearchSpec{"Cold-IP", &sr.alpha2, "alpha2_trace.csv",
                                                    kStreamBoAlpha2}}) {
                const WeightSet& base = ctx.model_weights.at(ss.base);
                BOConfig bo = config.bo_cfg;
                bo.seed = mix_seed(seed, ss.stream);
                int counter = 0;
                MinimizeResult res = minimize(
                    [&](double a) { return alpha_objective(config, ctx, base, a, &counter); },
                    bo);
                *ss.out = res.best_alpha;
                write_trace_csv(ctx.dir / "alpha" / ss.trace, res.trace);
                std::cout << "  [alpha from " << ss.base << "] best " << res.best_alpha
                          << " objective " << res.best_value << "\n";
            }
            std::ofstream af(alpha_file, std::ios::binary);
            af << "{\"alpha1\":" << format_double(sr.alpha1)
               << ",\"alpha2\":" << format_double(sr.alpha2) << "}\n";
        });

        if (stage_enabled("full")) run_stage(sr, "full", [&] {
            if (!try_resume_model(config, ctx, sr, "Cold-RF")) {
                WeightSet cold = cold_init(config.net, mix_seed(seed, kStreamColdRfInit));
                TrainResult rf = train_named(config, ctx, "Cold-RF", cold, ctx.f_train, ctx.f_val);
                record_model(ctx, sr, config, "Cold-RF", rf.best.weights, rf, ctx.f_val);
            }
            if (!try_resume_model(config, ctx, sr, "Warm-RF")) {
                Checkpoint rp_ck{ctx.model_weights.at("Cold-RP"), 0.0, 0, 0.5};
                TrainResult wrf = train_named(config, ctx, "Warm-RF",
                                              warm_init(config.net, rp_ck), ctx.f_train, ctx.f_val);
                record_model(ctx, sr, config, "Warm-RF", wrf.best.weights, wrf, ctx.f_val);
            }
            if (!try_resume_model(config, ctx, sr, "Shrink-RF")) {
                ShrinkParams sp{sr.alpha1, config.shrink_beta,
                                mix_seed(seed, kStreamShrinkRfNoise)};
                TrainResult srf = train_named(config, ctx, "Shrink-RF",
                                              shrink_perturb(ctx.model_weights.at("Cold-RP"), sp),
                                              ctx.f_train, ctx.f_val);
                record_model(ctx, sr, config, "Shrink-RF", srf.best.weights, srf, ctx.f_val,
                             sr.alpha1);
            }
            if (!try_resume_model(config, ctx, sr, "Cold-IF")) {
                TrainResult cif = train_named(config, ctx, "Cold-IF",
                                              ctx.model_weights.at("Pretext"), ctx.f_train,
                                              ctx.f_val);
                record_model(ctx, sr, config, "Cold-IF", cif.best.weights, cif, ctx.f_val);
            }
            if (!try_resume_model(config, ctx, sr, "Warm-IF")) {
                Checkpoint ip_ck{ctx.model_weights.at("Cold-IP"), 0.0, 0, 0.5};
                TrainResult wif = train_named(config, ctx, "Warm-IF",
                                              warm_init(config.net, ip_ck), ctx.f_train, ctx.f_val);
                record_model(ctx, sr, config, "Warm-IF", wif.best.weights, wif, ctx.f_val);
            }
            if (!try_resume_model(config, ctx, sr, "Shrink-IF")) {
                ShrinkParams sp{sr.alpha2, config.shrink_beta,
                                mix_seed(seed, kStreamShrinkIfNoise)};
                TrainResult sif = train_named(config, ctx, "Shrink-IF",
                                              shrink_perturb(ctx.model_weights.at("Cold-IP"), sp),
                                              ctx.f_train, ctx.f_val);
                record_model(ctx, sr, config, "Shrink-IF", sif.best.weights, sif, ctx.f_val,
                             sr.alpha2);
            }
        });

        if (stage_enabled("ensembles")) run_stage(sr, "ensembles", [&] {
            std::vector<int> val_labels = dataset_labels(ctx.f_val);
            for (std::size_t ci = 0; ci < kCombos.size(); ++ci) {
                const auto& members = kCombos[ci];
                std::vector<WeightSet> models;
                std::vector<std::string> refs;
                for (const std::string& m : members) {
                    models.push_back(ctx.model_weights.at(m));
                    refs.push_back(sr.models.at(m).weights_file);
                }
                std::string cname = combo_name(members);

                auto meta_path = [&](const std::string& stem) {
                    return ctx.dir / "ensembles" / (file_safe(stem + "_" + cname) + ".meta.json");
                };
                auto try_resume_weights_ensemble = [&](const std::string& family,
                                                       const std::string& stem,
                                                       const fs::path& wfile) -> bool {
                    if (!ctx.resume || !fs::exists(wfile) || !fs::exists(meta_path(stem))) {
                        return false;
                    }
                    EnsembleArtifact art;
                    art.family = family;
                    art.name = family + "(" + cname + ")";
                    art.members = members;
                    art.file = fs::relative(wfile, ctx.dir.parent_path()).string();
                    std::ifstream mf(meta_path(stem));
                    nlohmann::json doc = nlohmann::json::parse(mf);
                    art.threshold = doc.at("threshold").get<double>();
                    if (doc.contains("factors")) {
                        art.factors = doc.at("factors").get<std::vector<double>>();
                        art.validation_error = doc.at("validation_error").get<double>();
                    }
                    ctx.model_weights[art.name] = load_weight_set(wfile, config.net);
                    sr.ensembles.push_back(std::move(art));
                    return true;
                };

                {  // EWA
                    fs::path wfile =
                        ctx.dir / "ensembles" / (file_safe("ewa_" + cname) + ".weights.json");
                    if (!try_resume_weights_ensemble("EWA", "ewa", wfile)) {
                        EnsembleArtifact art;
                        art.family = "EWA";
                        art.name = "EWA(" + cname + ")";
                        art.members = members;
                        WeightSet avg = ewa(models);
                        save_weight_set(wfile, config.net, avg);
                        art.file = fs::relative(wfile, ctx.dir.parent_path()).string();
                        std::vector<double> vs = predict_scores(config.net, avg, ctx.f_val);
                        art.threshold = optimal_threshold(vs, val_labels);
                        std::ofstream mf(meta_path("ewa"), std::ios::binary);
                        mf << "{\"threshold\":" << format_double(art.threshold) << "}\n";
                        ctx.model_weights[art.name] = std::move(avg);
                        sr.ensembles.push_back(std::move(art));
                    }
                }

                {  // F-SLSQP
                    fs::path wfile =
                        ctx.dir / "ensembles" / (file_safe("fslsqp_" + cname) + ".weights.json");
                    if (!try_resume_weights_ensemble("F-SLSQP", "fslsqp", wfile)) {
                        EnsembleArtifact art;
                        art.family = "F-SLSQP";
                        art.name = "F-SLSQP(" + cname + ")";
                        art.members = members;
                        EnsembleResult er =
                            fslsqp(models, config.net, ctx.f_val, config.ensemble_restarts,
                                   mix_seed(seed, kStreamFslsqp + ci));
                        save_weight_set(wfile, config.net, er.weights);
                        art.file = fs::relative(wfile, ctx.dir.parent_path()).string();
                        art.factors = er.factors.factors;
                        art.validation_error = er.validation_error;
                        std::vector<double> vs = predict_scores(config.net, er.weights, ctx.f_val);
                        art.threshold = optimal_threshold(vs, val_labels);
                        std::ofstream mf(meta_path("fslsqp"), std::ios::binary);
                        mf << "{\"threshold\":" << format_double(art.threshold) << ",\"factors\":[";
                        for (std::size_t i = 0; i < art.factors.size(); ++i) {
                            if (i) mf << ',';
                            mf << format_double(art.factors[i]);
                        }
                        mf << "],\"validation_error\":" << format_double(art.validation_error)
                           << ",\"restarts_run\":" << er.restarts_run << "}\n";
                        ctx.model_weights[art.name] = std::move(er.weights);
                        std::cout << "  [" << art.name << "] error " << art.validation_error
                                  << "\n";
                        sr.ensembles.push_back(std::move(art));
                    }
                }

                {  // AGELFS
                    fs::path afile =
                        ctx.dir / "ensembles" / (file_safe("agelfs_" + cname) + ".model.json");
                    EnsembleArtifact art;
                    art.family = "AGELFS";
                    art.name = "AGELFS(" + cname + ")";
                    art.members = members;
                    bool resumed = false;
                    if (ctx.resume && fs::exists(afile) && fs::exists(meta_path("agelfs"))) {
                        AgelfsModelFile file = load_agelfs_model_file(afile);
                        std::vector<std::pair<NetworkSpec, WeightSet>> constituents;
                        for (const std::string& m : members) {
                            constituents.emplace_back(config.net, ctx.model_weights.at(m));
                        }
                        AgelfsModel model = assemble_agelfs(file, std::move(constituents),
                                                            mix_seed(seed, kStreamAgelfsHead + ci));
                        art.fuzziness = model.fuzziness();
                        art.file = fs::relative(afile, ctx.dir.parent_path()).string();
                        std::ifstream mf(meta_path("agelfs"));
                        nlohmann::json doc = nlohmann::json::parse(mf);
                        art.threshold = doc.at("threshold").get<double>();
                        ctx.agelfs_models.emplace(art.name, std::move(model));
                        resumed = true;
                    }
                    if (!resumed) {
                        AgelfsSpec aspec;
                        for (const std::string& m : members) {
                            aspec.constituents.emplace_back(config.net, ctx.model_weights.at(m));
                        }
                        aspec.head_seed = mix_seed(seed, kStreamAgelfsHead + ci);
                        TrainConfig cfg =
                            with_seed(config.train_cfg, mix_seed(seed, kStreamAgelfsShuffle + ci));
                        auto [model, result] = train_agelfs(aspec, ctx.f_train, ctx.f_val, cfg);
                        art.fuzziness = model.fuzziness();
                        save_agelfs_model(afile, model, refs);
                        art.file = fs::relative(afile, ctx.dir.parent_path()).string();

                        TensorF val_probs = forward_agelfs_features(
                            model, agelfs_features(model.spec, ctx.f_val.images));
                        std::vector<double> vs(ctx.f_val.size());
                        for (std::size_t s = 0; s < vs.size(); ++s) {
                            vs[s] = val_probs.values[s * 2 + 1];
                        }
                        art.threshold = optimal_threshold(vs, val_labels);
                        std::ofstream mf(meta_path("agelfs"), std::ios::binary);
                        mf << "{\"threshold\":" << format_double(art.threshold)
                           << ",\"fuzziness\":" << format_double(art.fuzziness) << "}\n";
                        ctx.agelfs_models.emplace(art.name, std::move(model));
                        std::cout << "  [" << art.name << "] fuzziness " << art.fuzziness
                                  << " epochs " << result.epochs_to_best << "\n";
                    }
                    sr.ensembles.push_back(std::move(art));
                }
            }
        });

        if (stage_enabled("evaluate")) run_stage(sr, "evaluate", [&] {
            // Pooled features of each frozen constituent, shared by every
            // attention ensemble evaluated on the same test set.
            std::map<std::string, TensorF> pooled;
            auto pooled_features = [&](const std::string& member, const Dataset& ds) {
                auto it = pooled.find(member);
                if (it == pooled.end()) {
                    it = pooled
                             .emplace(member, backbone_features(config.net,
                                                                ctx.model_weights.at(member),
                                                                ds.images))
                             .first;
                }
                return it;
            };
            auto scores_for = [&](const std::string& model, const Dataset& ds) {
                auto ag = ctx.agelfs_models.find(model);
                if (ag != ctx.agelfs_models.end()) {
                    const AgelfsModel& am = ag->second;
                    std::size_t n = ds.size();
                    std::size_t dim = am.spec.attention_dim();
                    TensorF features = TensorF::zeros({n, dim});
                    std::size_t offset = 0;
                    for (const EnsembleArtifact& e : sr.ensembles) {
                        if (e.name != model) continue;
                        for (const std::string& member : e.members) {
                            const TensorF& feats = pooled_features(member, ds)->second;
                            std::size_t c = feats.shape[1];
                            for (std::size_t s = 0; s < n; ++s) {
                                std::copy_n(feats.values.begin() + s * c, c,
                                            features.values.begin() + s * dim + offset);
                            }
                            offset += c;
                        }
                        break;
                    }
                    TensorF probs = forward_agelfs_features(am, features);
                    std::vector<double> s(n);
                    for (std::size_t i = 0; i < s.size(); ++i) s[i] = probs.values[i * 2 + 1];
                    return s;
                }
                return predict_scores(config.net, ctx.model_weights.at(model), ds);
            };
            auto threshold_for = [&](const std::string& model) {
                auto it = sr.models.find(model);
                if (it != sr.models.end()) return it->second.threshold;
                for (const EnsembleArtifact& e : sr.ensembles) {
                    if (e.name == model) return e.threshold;
                }
                throw std::logic_error("no threshold for " + model);
            };

            std::vector<std::string> all_models = kIndividualModelNames;
            for (const EnsembleArtifact& e : sr.ensembles) all_models.push_back(e.name);

            for (const std::string& test : test_set_names()) {
                const Dataset& ds = ctx.tests.at(test);
                std::vector<int> labels = dataset_labels(ds);
                pooled.clear();  // features are per test set
                for (const std::string& model : all_models) {
                    std::vector<double> scores = scores_for(model, ds);
                    sr.metrics[test][model] = evaluate_scores(scores, labels, threshold_for(model));
                    ctx.test_scores[test][model] = std::move(scores);
                }
            }
        });

        if (stage_enabled("significance")) run_stage(sr, "significance", [&] {
            auto add_mcc_row = [&](const std::string& test, const std::string& a,
                                   const std::string& b) {
                const MetricsReport& ra = sr.metrics.at(test).at(a);
                const MetricsReport& rb = sr.metrics.at(test).at(b);
                SignificanceRow row;
                row.test = test;
                row.metric = "mcc";
                row.first = a;
                row.second = b;
                row.value1 = ra.mcc;
                row.value2 = rb.mcc;
                row.ci1 = ra.mcc_ci;
                row.ci2 = rb.mcc_ci;
                row.result = significance(ra.mcc, ra.mcc_ci, rb.mcc, rb.mcc_ci);
                sr.significance.push_back(row);
            };

            add_mcc_row("internal", "Cold-RP", "Cold-IP");
            add_mcc_row("internal", "Cold-RF", "Cold-IF");
            add_mcc_row("internal", "Warm-RF", "Warm-IF");
            add_mcc_row("internal", "Shrink-RF", "Shrink-IF");
            for (const std::string& test : test_set_names()) {
                add_mcc_row(test, "Cold-IF", "Warm-IF");
                add_mcc_row(test, "Cold-IF", "Shrink-IF");
                add_mcc_row(test, "Warm-IF", "Shrink-IF");
            }

            // Recall comparisons: each ensemble against the best-MCC
            // constituent on that test set, CIs straight from the binomial
            // recall proportion.
            const std::vector<std::string> constituents = {"Cold-IF", "Warm-IF", "Shrink-IF"};
            for (const std::string& test : test_set_names()) {
                const Dataset& ds = ctx.tests.at(test);
                std::vector<int> labels = dataset_labels(ds);
                std::string baseline = constituents.front();
                for (const std::string& c : constituents) {
                    if (sr.metrics.at(test).at(c).mcc > sr.metrics.at(test).at(baseline).mcc) {
                        baseline = c;
                    }
                }
                auto recall_ci = [&](const std::string& model) {
                    const MetricsReport& rep = sr.metrics.at(test).at(model);
                    ConfusionCounts cc =
                        confusion(ctx.test_scores.at(test).at(model), labels, rep.threshold);
                    return std::pair{rep.recall, clopper_pearson(cc.tp, cc.tp + cc.fn)};
                };
                auto [base_recall, base_ci] = recall_ci(baseline);
                for (const EnsembleArtifact& e : sr.ensembles) {
                    auto [ens_recall, ens_ci] = recall_ci(e.name);
                    SignificanceRow row;
                    row.test = test;
                    row.metric = "recall";
                    row.first = baseline;
                    row.second = e.name;
                    row.value1 = base_recall;
                    row.value2 = ens_recall;
                    row.ci1 = base_ci;
                    row.ci2 = ens_ci;
                    row.result = significance(base_recall, base_ci, ens_recall, ens_ci);
                    sr.significance.push_back(row);
                }
            }

            std::ofstream f(ctx.dir / "significance" / "pairs.csv", std::ios::binary);
            f << "test,metric,model1,value1,ci1_lower,ci1_upper,model2,value2,ci2_lower,"
                 "ci2_upper,se1,se2,delta,delta_se,z,p_two_tailed,significant\n";
            for (const SignificanceRow& row : sr.significance) {
                f << row.test << ',' << row.metric << ',' << row.first << ','
                  << format_double(row.value1) << ',' << format_double(row.ci1.first) << ','
                  << format_double(row.ci1.second) << ',' << row.second << ','
                  << format_double(row.value2) << ',' << format_double(row.ci2.first) << ','
                  << format_double(row.ci2.second) << ',' << format_double(row.result.se1) << ','
                  << format_double(row.result.se2) << ',' << format_double(row.result.delta_mcc)
                  << ',' << format_double(row.result.delta_se) << ','
                  << format_double(row.result.z) << ',' << format_double(row.result.p_two_tailed)
                  << ',' << (row.result.significant ? 1 : 0) << '\n';
            }
        });

        if (stage_enabled("figures")) run_stage(sr, "figures", [&] {
            const Dataset& internal = ctx.tests.at("internal");
            std::vector<int> labels = dataset_labels(internal);

            {
                std::ofstream f(ctx.dir / "figures" / "pr_internal.csv", std::ios::binary);
                f << "model,recall,precision\n";
                for (const auto& [model, scores] : ctx.test_scores.at("internal")) {
                    for (const auto& [r, p] : pr_curve_points(scores, labels)) {
                        f << model << ',' << format_double(r) << ',' << format_double(p) << '\n';
                    }
                }
            }
            {
                std::ofstream f(ctx.dir / "figures" / "softmax_hist_internal.csv",
                                std::ios::binary);
                f << "model,bin_lower,bin_upper,positive_density,negative_density\n";
                for (const auto& [model, scores] : ctx.test_scores.at("internal")) {
                    SoftmaxHistogram h = softmax_histogram(scores, labels, 50);
                    for (int b = 0; b < h.bins; ++b) {
                        double lo = static_cast<double>(b) / h.bins;
                        double hi = static_cast<double>(b + 1) / h.bins;
                        f << model << ',' << format_double(lo) << ',' << format_double(hi) << ','
                          << format_double(h.positive_empty
                                               ? 0.0
                                               : h.positive_density[static_cast<std::size_t>(b)])
                          << ','
                          << format_double(h.negative_empty
                                               ? 0.0
                                               : h.negative_density[static_cast<std::size_t>(b)])
                          << '\n';
                    }
                }
            }
            {
                const std::vector<std::string> ifs = {"Cold-IF", "Warm-IF", "Shrink-IF"};
                std::ofstream f(ctx.dir / "figures" / "emd_if_models.csv", std::ios::binary);
                f << "model";
                for (const std::string& m : ifs) f << ',' << m;
                f << '\n';
                for (const std::string& a : ifs) {
                    f << a;
                    for (const std::string& b : ifs) {
                        f << ','
                          << format_double(
                                 emd_1d(ctx.model_weights.at(a), ctx.model_weights.at(b)));
                    }
                    f << '\n';
                }

                std::ofstream g(ctx.dir / "figures" / "weight_correlation_if_pairs.csv",
                                std::ios::binary);
                g << "model1,model2,correlation\n";
                for (std::size_t i = 0; i < ifs.size(); ++i) {
                    for (std::size_t j = i + 1; j < ifs.size(); ++j) {
                        g << ifs[i] << ',' << ifs[j] << ','
                          << format_double(weight_correlation(ctx.model_weights.at(ifs[i]),
                                                              ctx.model_weights.at(ifs[j])))
                          << '\n';
                        std::vector<double> wa = flatten_weights(ctx.model_weights.at(ifs[i]));
                        std::vector<double> wb = flatten_weights(ctx.model_weights.at(ifs[j]));
                        std::size_t stride = std::max<std::size_t>(1, wa.size() / 10000);
                        std::ofstream s(ctx.dir / "figures" /
                                            (file_safe("scatter_" + ifs[i] + "_" + ifs[j]) +
                                             ".csv"),
                                        std::ios::binary);
                        s << "w1,w2\n";
                        std::size_t emitted = 0;
                        for (std::size_t p = 0; p < wa.size() && emitted < 10000; p += stride) {
                            s << format_double(wa[p]) << ',' << format_double(wb[p]) << '\n';
                            ++emitted;
                        }
                    }
                }
            }
        });

        if (stage_enabled("reports")) run_stage(sr, "reports", [&] {
            for (const std::string& test : test_set_names()) {
                std::ofstream f(ctx.dir / "metrics" / (test + ".csv"), std::ios::binary);
                f << "model,auprc,balanced_accuracy,precision,recall,f_score,mcc,mcc_ci_lower,"
                     "mcc_ci_upper,threshold,n,epochs_to_best\n";
                std::vector<std::string> all_models = kIndividualModelNames;
                for (const EnsembleArtifact& e : sr.ensembles) all_models.push_back(e.name);
                for (const std::string& model : all_models) {
                    const MetricsReport& r = sr.metrics.at(test).at(model);
                    int epochs = 0;
                    auto it = sr.models.find(model);
                    if (it != sr.models.end()) epochs = it->second.epochs_to_best;
                    f << model << ',' << format_double(r.auprc) << ','
                      << format_double(r.balanced_accuracy) << ',' << format_double(r.precision)
                      << ',' << format_double(r.recall) << ',' << format_double(r.f_score) << ','
                      << format_double(r.mcc) << ',' << format_double(r.mcc_ci.first) << ','
                      << format_double(r.mcc_ci.second) << ',' << format_double(r.threshold)
                      << ',' << r.n << ',' << epochs << '\n';
                }
            }
        });

        manifest.seeds.push_back(std::move(sr));
        manifest.ok = manifest.ok && manifest.seeds.back().ok;
    }

    // Cross-seed summary used by the directional acceptance checks.
    {
        std::ofstream f(out_dir / "summary.csv", std::ios::binary);
        f << "seed,ok,alpha1,alpha2,coldrp_epochs_to_target,coldip_epochs_to_target";
        for (const char* m :
             {"Cold-RF", "Cold-IF", "Warm-RF", "Warm-IF", "Shrink-RF", "Shrink-IF"}) {
            f << ",internal_mcc_" << file_safe(m);
        }
        for (const char* t : {"ext_adult", "ext_ped2", "ext_ped11", "ext_ped18"}) {
            f << ",best_constituent_recall_" << t << ",best_ensemble_recall_" << t;
        }
        f << '\n';
        for (const SeedResults& sr : manifest.seeds) {
            f << sr.seed << ',' << (sr.ok ? 1 : 0);
            bool complete = sr.ok && sr.metrics.count("internal") > 0 &&
                            sr.models.count("Cold-RP") > 0 && sr.models.count("Cold-IP") > 0;
            if (!complete) {
                for (int i = 0; i < 18; ++i) f << ',';
                f << '\n';
                continue;
            }
            f << ',' << format_double(sr.alpha1) << ',' << format_double(sr.alpha2);
            f << ',' << sr.models.at("Cold-RP").epochs_to_target << ','
              << sr.models.at("Cold-IP").epochs_to_target;
            for (const char* m :
                 {"Cold-RF", "Cold-IF", "Warm-RF", "Warm-IF", "Shrink-RF", "Shrink-IF"}) {
                f << ',' << format_double(sr.metrics.at("internal").at(m).mcc);
            }
            for (const char* t : {"ext_adult", "ext_ped2", "ext_ped11", "ext_ped18"}) {
                double best_const = 0.0, best_ens = 0.0;
                for (const char* c : {"Cold-IF", "Warm-IF", "Shrink-IF"}) {
                    best_const = std::max(best_const, sr.metrics.at(t).at(c).recall);
                }
                for (const EnsembleArtifact& e : sr.ensembles) {
                    best_ens = std::max(best_ens, sr.metrics.at(t).at(e.name).recall);
                }
                f << ',' << format_double(best_const) << ',' << format_double(best_ens);
            }
            f << '\n';
        }
    }

    write_replication_csv((out_dir / "replicate_paper.csv").string(),
                          replicate_paper_significance());
    write_manifest_json(out_dir / "manifest.json", manifest);
    return manifest;
}

void write_manifest_json(const fs::path& path, const RunManifest& manifest) {
    nlohmann::ordered_json doc;
    char hex[20];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(manifest.config_hash));
    doc["config_hash"] = hex;
    doc["ok"] = manifest.ok;
    doc["seeds"] = nlohmann::ordered_json::array();
    for (const SeedResults& sr : manifest.seeds) {
        nlohmann::ordered_json s;
        s["seed"] = sr.seed;
        s["ok"] = sr.ok;
        s["alpha1"] = sr.alpha1;
        s["alpha2"] = sr.alpha2;
        s["stages"] = nlohmann::ordered_json::array();
        for (const StageStatus& st : sr.stages) {
            s["stages"].push_back({{"name", st.name}, {"ok", st.ok}, {"error", st.error}});
        }
        s["models"] = nlohmann::ordered_json::array();
        for (const std::string& name : kIndividualModelNames) {
            auto it = sr.models.find(name);
            if (it == sr.models.end()) continue;
            const ModelArtifact& a = it->second;
            s["models"].push_back({{"name", a.name},
                                   {"weights_file", a.weights_file},
                                   {"best_val_loss", a.best_val_loss},
                                   {"epochs_to_best", a.epochs_to_best},
                                   {"epochs_to_target", a.epochs_to_target},
                                   {"threshold", a.threshold},
                                   {"alpha", a.alpha}});
        }
        s["ensembles"] = nlohmann::ordered_json::array();
        for (const EnsembleArtifact& e : sr.ensembles) {
            nlohmann::ordered_json je;
            je["family"] = e.family;
            je["name"] = e.name;
            je["members"] = e.members;
            je["file"] = e.file;
            je["threshold"] = e.threshold;
            if (!e.factors.empty()) {
                je["factors"] = e.factors;
                je["validation_error"] = e.validation_error;
            }
            if (e.family == "AGELFS") je["fuzziness"] = e.fuzziness;
            s["ensembles"].push_back(je);
        }
        s["metrics"] = nlohmann::ordered_json::object();
        for (const auto& [test, per_model] : sr.metrics) {
            nlohmann::ordered_json jt = nlohmann::ordered_json::object();
            for (const auto& [model, r] : per_model) {
                jt[model] = {{"auprc", r.auprc},
                             {"balanced_accuracy", r.balanced_accuracy},
                             {"precision", r.precision},
                             {"recall", r.recall},
                             {"f_score", r.f_score},
                             {"mcc", r.mcc},
                             {"mcc_ci", {r.mcc_ci.first, r.mcc_ci.second}},
                             {"threshold", r.threshold},
                             {"n", r.n}};
            }
            s["metrics"][test] = jt;
        }
        doc["seeds"].push_back(std::move(s));
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f << doc.dump(1) << '\n';
}

}  // namespace weightlab
