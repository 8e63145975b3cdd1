#include "weightlab/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "weightlab/adam.hpp"
#include "weightlab/rng.hpp"

namespace weightlab {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("TrainConfig: max_epochs must be >= 1");
    if (patience < 0) throw std::invalid_argument("TrainConfig: patience must be >= 0");
}

namespace {

void check_dataset(const Dataset& d, const char* name) {
    if (d.size() == 0) throw std::invalid_argument(std::string(name) + ": empty dataset");
    if (d.labels.shape.size() != 2 || d.labels.shape[0] != d.size() || d.labels.shape[1] != 2) {
        throw std::invalid_argument(std::string(name) + ": labels must have shape (n, 2)");
    }
}

Dataset gather(const Dataset& d, const std::vector<std::size_t>& idx, std::size_t start,
               std::size_t count) {
    std::size_t per_image = d.images.numel() / d.size();
    Dataset out;
    std::vector<std::size_t> ishape = d.images.shape;
    ishape[0] = count;
    out.images = TensorF::zeros(ishape);
    out.labels = TensorF::zeros({count, 2});
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t s = idx[start + i];
        std::copy_n(d.images.values.begin() + s * per_image, per_image,
                    out.images.values.begin() + i * per_image);
        out.labels.values[i * 2] = d.labels.values[s * 2];
        out.labels.values[i * 2 + 1] = d.labels.values[s * 2 + 1];
    }
    return out;
}

Dataset slice(const Dataset& d, std::size_t start, std::size_t count) {
    std::vector<std::size_t> idx(d.size());
    std::iota(idx.begin(), idx.end(), 0);
    return gather(d, idx, start, count);
}

constexpr std::size_t kEvalChunk = 256;

}  // namespace

double dataset_loss(const NetworkSpec& spec, const WeightSet& weights, const Dataset& data) {
    check_dataset(data, "dataset_loss");
    constexpr double kClamp = 1e-12;
    double total = 0.0;
    for (std::size_t start = 0; start < data.size(); start += kEvalChunk) {
        std::size_t count = std::min(kEvalChunk, data.size() - start);
        Dataset chunk = slice(data, start, count);
        TensorF probs = forward(spec, weights, chunk.images);
        for (std::size_t s = 0; s < count; ++s) {
            for (std::size_t j = 0; j < 2; ++j) {
                if (chunk.labels.values[s * 2 + j] == 1.0) {
                    double p = std::clamp(probs.values[s * 2 + j], kClamp, 1.0 - kClamp);
                    total -= std::log(p);
                }
            }
        }
    }
    return total / static_cast<double>(data.size());
}

std::vector<double> predict_scores(const NetworkSpec& spec, const WeightSet& weights,
                                   const Dataset& data) {
    check_dataset(data, "predict_scores");
    std::vector<double> scores;
    scores.reserve(data.size());
    for (std::size_t start = 0; start < data.size(); start += kEvalChunk) {
        std::size_t count = std::min(kEvalChunk, data.size() - start);
        Dataset chunk = slice(data, start, count);
        TensorF probs = forward(spec, weights, chunk.images);
        for (std::size_t s = 0; s < count; ++s) scores.push_back(probs.values[s * 2 + 1]);
    }
    return scores;
}

std::vector<int> dataset_labels(const Dataset& data) {
    check_dataset(data, "dataset_labels");
    std::vector<int> labels(data.size());
    for (std::size_t s = 0; s < data.size(); ++s) {
        labels[s] = data.labels.values[s * 2 + 1] == 1.0 ? 1 : 0;
    }
    return labels;
}

TrainResult train(const NetworkSpec& spec, const WeightSet& init, const Dataset& train_set,
                  const Dataset& val_set, const TrainConfig& config) {
    auto t0 = std::chrono::steady_clock::now();
    config.validate();
    check_dataset(train_set, "train");
    check_dataset(val_set, "val");
    validate_spec(spec);
    validate_weights(spec, init);

    AdamConfig adam_cfg{config.learning_rate, config.adam_beta1, config.adam_beta2,
                        config.adam_epsilon};
    WeightSet weights = init;
    AdamState state = make_adam_state(weights);

    TrainResult result;
    result.best.val_loss = std::numeric_limits<double>::infinity();
    int no_improve = 0;

    std::vector<std::size_t> order(train_set.size());
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        // One seeded permutation per epoch; determinism survives refactoring.
        std::iota(order.begin(), order.end(), 0);
        Rng rng(config.rng_seed + static_cast<std::uint64_t>(epoch - 1));
        rng.shuffle(order);

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < train_set.size(); start += config.batch_size) {
            std::size_t count = std::min(config.batch_size, train_set.size() - start);
            Dataset batch = gather(train_set, order, start, count);
            LossGrads lg = loss_and_gradients(spec, weights, batch.images, batch.labels);
            if (!std::isfinite(lg.loss)) {
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch offset " +
                                         std::to_string(start));
            }
            loss_sum += lg.loss * static_cast<double>(count);
            adam_step(weights, lg.grads, state, adam_cfg);
        }
        double train_loss = loss_sum / static_cast<double>(train_set.size());
        double val_loss = dataset_loss(spec, weights, val_set);
        if (!std::isfinite(val_loss)) {
            throw std::runtime_error("train: non-finite validation loss at epoch " +
                                     std::to_string(epoch));
        }
        result.history.push_back({train_loss, val_loss});

        if (val_loss < result.best.val_loss) {
            result.best.weights = weights;
            result.best.val_loss = val_loss;
            result.best.epoch = epoch;
            no_improve = 0;
        } else {
            ++no_improve;
            if (no_improve > config.patience) break;
        }
    }
    result.epochs_to_best = result.best.epoch;
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

}  // namespace weightlab
