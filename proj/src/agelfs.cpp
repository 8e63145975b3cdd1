#include "weightlab/agelfs.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>

#include <fstream>

#include <json.hpp>

#include "weightlab/adam.hpp"
#include "weightlab/rng.hpp"
#include "weightlab/softmax.hpp"
#include "weightlab/weight_io.hpp"

namespace weightlab {

std::size_t AgelfsSpec::attention_dim() const {
    std::size_t d = 0;
    for (const auto& [net, w] : constituents) {
        auto shapes = layer_output_shapes(net);
        d += shapes[net.layers.size() - 3].features();  // GlobalAvgPool output width
    }
    return d;
}

void AgelfsSpec::validate() const {
    if (constituents.size() < 2) {
        throw std::invalid_argument("AgelfsSpec: needs at least 2 constituents");
    }
    const NetworkSpec& first = constituents.front().first;
    for (const auto& [net, w] : constituents) {
        validate_spec(net);
        validate_weights(net, w);
        if (net.input_channels != first.input_channels || net.input_height != first.input_height ||
            net.input_width != first.input_width) {
            throw std::invalid_argument("AgelfsSpec: constituents must share input geometry");
        }
    }
    if (!(fuzziness_init > 0.0)) {
        throw std::invalid_argument("AgelfsSpec: fuzziness_init must be positive");
    }
}

double AgelfsModel::fuzziness() const { return std::exp(raw_fuzziness); }

TensorF agelfs_features(const AgelfsSpec& spec, const TensorF& batch) {
    spec.validate();
    std::size_t n = batch.shape.empty() ? 0 : batch.shape[0];
    std::size_t dim = spec.attention_dim();
    TensorF features = TensorF::zeros({n, dim});
    std::size_t offset = 0;
    for (const auto& [net, w] : spec.constituents) {
        TensorF pooled = backbone_features(net, w, batch);
        std::size_t c = pooled.shape[1];
        for (std::size_t s = 0; s < n; ++s) {
            std::copy_n(pooled.values.begin() + s * c, c,
                        features.values.begin() + s * dim + offset);
        }
        offset += c;
    }
    return features;
}

namespace {

constexpr double kClamp = 1e-12;
constexpr double kRawFuzzFloor = -6.907755278982137;  // ln(1e-3)

struct HeadForward {
    std::vector<double> gate;      // a = softmax(A h + b)
    std::vector<double> attended;  // a .* h
    std::vector<double> logits;    // W t + c
    std::vector<double> probs;     // fuzzy_softmax(logits)
};

HeadForward head_forward_one(const AgelfsModel& m, const double* h, std::size_t dim) {
    HeadForward f;
    std::vector<double> u(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        double acc = m.attention_bias.values[i];
        const double* row = m.attention_kernel.values.data() + i * dim;
        for (std::size_t d = 0; d < dim; ++d) acc += row[d] * h[d];
        u[i] = acc;
    }
    f.gate = softmax(std::span<const double>(u.data(), dim));
    f.attended.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) f.attended[i] = f.gate[i] * h[i];
    f.logits.resize(2);
    for (std::size_t o = 0; o < 2; ++o) {
        double acc = m.head_bias.values[o];
        const double* row = m.head_kernel.values.data() + o * dim;
        for (std::size_t d = 0; d < dim; ++d) acc += row[d] * f.attended[d];
        f.logits[o] = acc;
    }
    f.probs = fuzzy_softmax(std::span<const double>(f.logits.data(), 2), m.fuzziness());
    return f;
}

// Head parameters packed as a WeightSet so the Adam machinery applies
// unchanged: entry 0 = attention, entry 1 = dense head, entry 2 = raw
// fuzziness as a 1-element kernel.
WeightSet pack_head(const AgelfsModel& m) {
    WeightSet w;
    w.entries.resize(3);
    w.entries[0].layer_index = 0;
    w.entries[0].kernel = m.attention_kernel;
    w.entries[0].bias = m.attention_bias;
    w.entries[1].layer_index = 1;
    w.entries[1].kernel = m.head_kernel;
    w.entries[1].bias = m.head_bias;
    w.entries[2].layer_index = 2;
    w.entries[2].kernel.shape = {1};
    w.entries[2].kernel.values = {m.raw_fuzziness};
    w.entries[2].bias.shape = {0};
    return w;
}

void unpack_head(const WeightSet& w, AgelfsModel& m) {
    m.attention_kernel = w.entries[0].kernel;
    m.attention_bias = w.entries[0].bias;
    m.head_kernel = w.entries[1].kernel;
    m.head_bias = w.entries[1].bias;
    m.raw_fuzziness = w.entries[2].kernel.values[0];
}

void check_features(const AgelfsModel& m, const TensorF& features) {
    std::size_t dim = m.spec.attention_dim();
    if (features.shape.size() != 2 || features.shape[1] != dim) {
        throw std::invalid_argument("agelfs: feature matrix must have shape (n, " +
                                    std::to_string(dim) + ")");
    }
}

}  // namespace

TensorF forward_agelfs_features(const AgelfsModel& model, const TensorF& features) {
    check_features(model, features);
    std::size_t n = features.shape[0];
    std::size_t dim = features.shape[1];
    TensorF out = TensorF::zeros({n, 2});
    for (std::size_t s = 0; s < n; ++s) {
        HeadForward f = head_forward_one(model, features.values.data() + s * dim, dim);
        out.values[s * 2] = f.probs[0];
        out.values[s * 2 + 1] = f.probs[1];
    }
    return out;
}

TensorF forward_agelfs(const AgelfsModel& model, const TensorF& batch) {
    return forward_agelfs_features(model, agelfs_features(model.spec, batch));
}

AgelfsLossGrads agelfs_loss_and_gradients(const AgelfsModel& model, const TensorF& features,
                                          const TensorF& labels) {
    check_features(model, features);
    std::size_t n = features.shape[0];
    std::size_t dim = features.shape[1];
    if (labels.shape.size() != 2 || labels.shape[0] != n || labels.shape[1] != 2) {
        throw std::invalid_argument("agelfs: labels must have shape (n, 2)");
    }

    AgelfsLossGrads g;
    g.d_attention_kernel = TensorF::zeros(model.attention_kernel.shape);
    g.d_attention_bias = TensorF::zeros(model.attention_bias.shape);
    g.d_head_kernel = TensorF::zeros(model.head_kernel.shape);
    g.d_head_bias = TensorF::zeros(model.head_bias.shape);

    double fz = model.fuzziness();
    double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t s = 0; s < n; ++s) {
        const double* h = features.values.data() + s * dim;
        HeadForward f = head_forward_one(model, h, dim);
        const double* y = labels.values.data() + s * 2;

        for (std::size_t j = 0; j < 2; ++j) {
            if (y[j] == 1.0) {
                g.loss -= std::log(std::clamp(f.probs[j], kClamp, 1.0 - kClamp)) * inv_n;
            }
        }

        double d_logits[2];
        double d_fz_sample = 0.0;
        for (std::size_t j = 0; j < 2; ++j) {
            double diff = (f.probs[j] - y[j]) * inv_n;
            d_logits[j] = fz * diff;
            d_fz_sample += diff * f.logits[j];
        }
        g.d_raw_fuzziness += d_fz_sample * fz;  // raw -> fz = exp(raw)

        std::vector<double> d_attended(dim, 0.0);
        for (std::size_t o = 0; o < 2; ++o) {
            g.d_head_bias.values[o] += d_logits[o];
            double* dk = g.d_head_kernel.values.data() + o * dim;
            const double* kr = model.head_kernel.values.data() + o * dim;
            for (std::size_t d = 0; d < dim; ++d) {
                dk[d] += d_logits[o] * f.attended[d];
                d_attended[d] += d_logits[o] * kr[d];
            }
        }

        // t = a .* h ; a = softmax(u)
        std::vector<double> d_gate(dim);
        for (std::size_t d = 0; d < dim; ++d) d_gate[d] = d_attended[d] * h[d];
        double dot = 0.0;
        for (std::size_t d = 0; d < dim; ++d) dot += f.gate[d] * d_gate[d];
        for (std::size_t i = 0; i < dim; ++i) {
            double du = f.gate[i] * (d_gate[i] - dot);
            g.d_attention_bias.values[i] += du;
            double* row = g.d_attention_kernel.values.data() + i * dim;
            for (std::size_t d = 0; d < dim; ++d) row[d] += du * h[d];
        }
    }
    return g;
}

std::pair<AgelfsModel, TrainResult> train_agelfs(const AgelfsSpec& spec, const Dataset& train_set,
                                                 const Dataset& val_set,
                                                 const TrainConfig& config) {
    auto t0 = std::chrono::steady_clock::now();
    spec.validate();
    config.validate();
    if (train_set.size() == 0 || val_set.size() == 0) {
        throw std::invalid_argument("train_agelfs: empty dataset");
    }

    std::size_t dim = spec.attention_dim();

    // Frozen constituents: feature extraction happens exactly once.
    TensorF train_feats = agelfs_features(spec, train_set.images);
    TensorF val_feats = agelfs_features(spec, val_set.images);

    AgelfsModel model;
    model.spec = spec;
    {
        Rng rng(spec.head_seed);
        model.attention_kernel = TensorF::zeros({dim, dim});
        double lim_a = std::sqrt(6.0 / (static_cast<double>(dim) + static_cast<double>(dim)));
        for (double& v : model.attention_kernel.values) v = rng.uniform(-lim_a, lim_a);
        model.attention_bias = TensorF::zeros({dim});
        model.head_kernel = TensorF::zeros({2, dim});
        double lim_h = std::sqrt(6.0 / (static_cast<double>(dim) + 2.0));
        for (double& v : model.head_kernel.values) v = rng.uniform(-lim_h, lim_h);
        model.head_bias = TensorF::zeros({2});
        model.raw_fuzziness = std::log(spec.fuzziness_init);
    }

    WeightSet params = pack_head(model);
    AdamState adam = make_adam_state(params);
    AdamConfig adam_cfg{config.learning_rate, config.adam_beta1, config.adam_beta2,
                        config.adam_epsilon};

    auto eval_loss = [&](const TensorF& feats, const TensorF& labels) {
        std::size_t n = feats.shape[0];
        double loss = 0.0;
        TensorF probs = forward_agelfs_features(model, feats);
        for (std::size_t s = 0; s < n; ++s) {
            for (std::size_t j = 0; j < 2; ++j) {
                if (labels.values[s * 2 + j] == 1.0) {
                    loss -= std::log(std::clamp(probs.values[s * 2 + j], kClamp, 1.0 - kClamp));
                }
            }
        }
        return loss / static_cast<double>(n);
    };

    TrainResult result;
    result.best.val_loss = std::numeric_limits<double>::infinity();
    int no_improve = 0;
    std::vector<std::size_t> order(train_set.size());

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng rng(config.rng_seed + static_cast<std::uint64_t>(epoch - 1));
        rng.shuffle(order);

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            std::size_t count = std::min(config.batch_size, order.size() - start);
            TensorF bf = TensorF::zeros({count, dim});
            TensorF bl = TensorF::zeros({count, 2});
            for (std::size_t i = 0; i < count; ++i) {
                std::size_t s = order[start + i];
                std::copy_n(train_feats.values.begin() + s * dim, dim,
                            bf.values.begin() + i * dim);
                bl.values[i * 2] = train_set.labels.values[s * 2];
                bl.values[i * 2 + 1] = train_set.labels.values[s * 2 + 1];
            }
            AgelfsLossGrads g = agelfs_loss_and_gradients(model, bf, bl);
            if (!std::isfinite(g.loss)) {
                throw std::runtime_error("train_agelfs: non-finite loss at epoch " +
                                         std::to_string(epoch));
            }
            loss_sum += g.loss * static_cast<double>(count);

            WeightSet grads = pack_head(model);
            grads.entries[0].kernel = g.d_attention_kernel;
            grads.entries[0].bias = g.d_attention_bias;
            grads.entries[1].kernel = g.d_head_kernel;
            grads.entries[1].bias = g.d_head_bias;
            grads.entries[2].kernel.values[0] = g.d_raw_fuzziness;
            adam_step(params, grads, adam, adam_cfg);
            params.entries[2].kernel.values[0] =
                std::max(params.entries[2].kernel.values[0], kRawFuzzFloor);
            unpack_head(params, model);
        }
        double train_loss = loss_sum / static_cast<double>(train_set.size());
        double val_loss = eval_loss(val_feats, val_set.labels);
        result.history.push_back({train_loss, val_loss});

        if (val_loss < result.best.val_loss) {
            result.best.weights = params;
            result.best.val_loss = val_loss;
            result.best.epoch = epoch;
            no_improve = 0;
        } else {
            ++no_improve;
            if (no_improve > config.patience) break;
        }
    }

    unpack_head(result.best.weights, model);
    result.epochs_to_best = result.best.epoch;
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {model, result};
}

namespace {

void append_json_array(std::string& out, const TensorF& t) {
    out += '[';
    for (std::size_t i = 0; i < t.values.size(); ++i) {
        if (i) out += ',';
        out += format_double(t.values[i]);
    }
    out += ']';
}

}  // namespace

void save_agelfs_model(const std::filesystem::path& path, const AgelfsModel& model,
                       const std::vector<std::string>& member_refs) {
    if (member_refs.size() != model.spec.constituents.size()) {
        throw std::invalid_argument("save_agelfs_model: one member reference per constituent");
    }
    std::string out = "{\"members\":[";
    for (std::size_t i = 0; i < member_refs.size(); ++i) {
        if (i) out += ',';
        out += '"';
        out += member_refs[i];
        out += '"';
    }
    out += "],\"attention_dim\":" + std::to_string(model.spec.attention_dim());
    out += ",\"attention_kernel\":";
    append_json_array(out, model.attention_kernel);
    out += ",\"attention_bias\":";
    append_json_array(out, model.attention_bias);
    out += ",\"head_kernel\":";
    append_json_array(out, model.head_kernel);
    out += ",\"head_bias\":";
    append_json_array(out, model.head_bias);
    out += ",\"raw_fuzziness\":" + format_double(model.raw_fuzziness);
    out += ",\"fuzziness\":" + format_double(model.fuzziness());
    out += "}";
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f << out << '\n';
}

AgelfsModelFile load_agelfs_model_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    nlohmann::json doc = nlohmann::json::parse(f);
    AgelfsModelFile out;
    out.member_refs = doc.at("members").get<std::vector<std::string>>();
    std::size_t dim = doc.at("attention_dim").get<std::size_t>();
    out.attention_kernel.shape = {dim, dim};
    out.attention_kernel.values = doc.at("attention_kernel").get<std::vector<double>>();
    out.attention_bias.shape = {dim};
    out.attention_bias.values = doc.at("attention_bias").get<std::vector<double>>();
    out.head_kernel.shape = {2, dim};
    out.head_kernel.values = doc.at("head_kernel").get<std::vector<double>>();
    out.head_bias.shape = {2};
    out.head_bias.values = doc.at("head_bias").get<std::vector<double>>();
    out.attention_kernel.validate("attention_kernel");
    out.attention_bias.validate("attention_bias");
    out.head_kernel.validate("head_kernel");
    out.head_bias.validate("head_bias");
    out.raw_fuzziness = doc.at("raw_fuzziness").get<double>();
    return out;
}

AgelfsModel assemble_agelfs(const AgelfsModelFile& file,
                            std::vector<std::pair<NetworkSpec, WeightSet>> constituents,
                            std::uint64_t head_seed) {
    AgelfsModel model;
    model.spec.constituents = std::move(constituents);
    model.spec.head_seed = head_seed;
    model.spec.validate();
    if (model.spec.attention_dim() != file.attention_bias.numel()) {
        throw std::runtime_error("assemble_agelfs: constituents do not match the stored head size");
    }
    model.attention_kernel = file.attention_kernel;
    model.attention_bias = file.attention_bias;
    model.head_kernel = file.head_kernel;
    model.head_bias = file.head_bias;
    model.raw_fuzziness = file.raw_fuzziness;
    return model;
}

}  // namespace weightlab
