#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "weightlab/train.hpp"

namespace weightlab {

/// Frozen constituents plus head hyperparameters for the attention-guided
/// ensemble.
struct AgelfsSpec {
    std::vector<std::pair<NetworkSpec, WeightSet>> constituents;
    double fuzziness_init = 1.0;
    std::uint64_t head_seed = 0;

    /// Total concatenated feature length (sum of constituent pooled widths).
    std::size_t attention_dim() const;
    void validate() const;
};

/// The trainable head: a feature-position attention gate over the
/// concatenated pooled features, a dense layer to 2 logits, and a fuzzy
/// softmax whose fuzziness is learned as exp(raw) to stay positive.
struct AgelfsModel {
    AgelfsSpec spec;
    TensorF attention_kernel;  // (D, D)
    TensorF attention_bias;    // (D)
    TensorF head_kernel;       // (2, D)
    TensorF head_bias;         // (2)
    double raw_fuzziness = 0.0;

    double fuzziness() const;
};

/// Concatenated pooled constituent features, shape (n, D). Constituents are
/// read-only here and everywhere else.
TensorF agelfs_features(const AgelfsSpec& spec, const TensorF& batch);

/// Head pipeline on precomputed features: attention gate -> dense ->
/// fuzzy softmax. Shape (n, 2).
TensorF forward_agelfs_features(const AgelfsModel& model, const TensorF& features);

/// Full pipeline from images.
TensorF forward_agelfs(const AgelfsModel& model, const TensorF& batch);

/// Mean cross-entropy on precomputed features plus gradients for the head
/// parameters only (attention, dense, raw fuzziness).
struct AgelfsLossGrads {
    double loss = 0.0;
    TensorF d_attention_kernel;
    TensorF d_attention_bias;
    TensorF d_head_kernel;
    TensorF d_head_bias;
    double d_raw_fuzziness = 0.0;
};

AgelfsLossGrads agelfs_loss_and_gradients(const AgelfsModel& model, const TensorF& features,
                                          const TensorF& labels);

/// Trains the head with Adam while the constituent weights stay untouched;
/// best checkpoint by validation loss, early stopping per config.patience.
std::pair<AgelfsModel, TrainResult> train_agelfs(const AgelfsSpec& spec, const Dataset& train_set,
                                                 const Dataset& val_set, const TrainConfig& config);

/// JSON serialization: constituent weight-file references, head arrays, and
/// the fuzziness scalar.
void save_agelfs_model(const std::filesystem::path& path, const AgelfsModel& model,
                       const std::vector<std::string>& member_refs);

struct AgelfsModelFile {
    std::vector<std::string> member_refs;
    TensorF attention_kernel, attention_bias, head_kernel, head_bias;
    double raw_fuzziness = 0.0;
};

AgelfsModelFile load_agelfs_model_file(const std::filesystem::path& path);

/// Rebuilds a runnable model from a loaded head plus resolved constituents.
AgelfsModel assemble_agelfs(const AgelfsModelFile& file,
                            std::vector<std::pair<NetworkSpec, WeightSet>> constituents,
                            std::uint64_t head_seed = 0);

}  // namespace weightlab
