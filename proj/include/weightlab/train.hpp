#pragma once

#include <cstdint>
#include <vector>

#include "weightlab/network.hpp"

namespace weightlab {

/// A labeled batch: images (n, c, h, w) and one-hot labels (n, 2).
struct Dataset {
    TensorF images;
    TensorF labels;
    std::size_t size() const { return images.shape.empty() ? 0 : images.shape[0]; }
};

struct TrainConfig {
    double learning_rate = 0.001;
    std::size_t batch_size = 64;
    int max_epochs = 30;
    int patience = 5;
    std::uint64_t rng_seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;

    void validate() const;
};

struct Checkpoint {
    WeightSet weights;
    double val_loss = 0.0;
    int epoch = 0;          // 1-based epoch the checkpoint was taken at
    double threshold = 0.5; // validation-optimal classification threshold, set post-training
};

struct EpochStats {
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    Checkpoint best;
    std::vector<EpochStats> history;
    double wall_seconds = 0.0;  // measured; everything else is deterministic
    int epochs_to_best = 0;
};

/// Mean cross-entropy of the model over a dataset (no gradient).
double dataset_loss(const NetworkSpec& spec, const WeightSet& weights, const Dataset& data);

/// Mini-batch Adam training with per-epoch validation, best-checkpoint
/// tracking, and early stopping after `patience` epochs without a new
/// validation-loss minimum. Apart from wall_seconds the result is a pure
/// function of (spec, init, data, config): the shuffle order for epoch e
/// is drawn from Rng(rng_seed + e).
TrainResult train(const NetworkSpec& spec, const WeightSet& init, const Dataset& train_set,
                  const Dataset& val_set, const TrainConfig& config);

/// Positive-class probabilities for every sample in the dataset.
std::vector<double> predict_scores(const NetworkSpec& spec, const WeightSet& weights,
                                   const Dataset& data);

/// 0/1 labels extracted from the one-hot rows.
std::vector<int> dataset_labels(const Dataset& data);

}  // namespace weightlab
