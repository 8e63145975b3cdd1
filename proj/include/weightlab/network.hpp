#pragma once

#include <cstdint>
#include <vector>

#include "weightlab/tensor.hpp"

namespace weightlab {

enum class LayerKind { Conv2D, ReLU, MaxPool2D, GlobalAvgPool, Dense, Softmax };

struct LayerSpec {
    LayerKind kind = LayerKind::ReLU;
    int out_channels = 0;  // Conv2D
    int kernel_size = 0;   // Conv2D
    int stride = 1;        // Conv2D
    int pool_size = 0;     // MaxPool2D
    int out_dim = 0;       // Dense

    static LayerSpec conv2d(int out_channels, int kernel_size, int stride = 1);
    static LayerSpec relu();
    static LayerSpec max_pool2d(int size);
    static LayerSpec global_avg_pool();
    static LayerSpec dense(int out_dim);
    static LayerSpec softmax();
};

/// Architecture of the toy classifier: a conv backbone ending in
/// GlobalAvgPool -> Dense(2) -> Softmax.
struct NetworkSpec {
    int input_channels = 1;
    int input_height = 16;
    int input_width = 16;
    std::vector<LayerSpec> layers;
};

/// Two conv blocks on a 16x16 single-channel input; 354 parameters,
/// small enough for finite-difference checking of every gradient.
NetworkSpec default_network_spec();

/// Shape of the data flowing out of each layer. `spatial` is false once the
/// tensor has been flattened to a feature vector (after GlobalAvgPool/Dense).
struct LayerShape {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    bool spatial = true;
    std::size_t features() const { return spatial ? channels * height * width : channels; }
};

/// Per-layer output shapes, including shape-chaining validation.
/// Throws std::invalid_argument on inconsistent specs.
std::vector<LayerShape> layer_output_shapes(const NetworkSpec& spec);

/// Full structural validation: chaining plus the fixed tail
/// GlobalAvgPool -> Dense(2) -> Softmax.
void validate_spec(const NetworkSpec& spec);

/// One parameterized layer's tensors, in layer order.
struct WeightEntry {
    int layer_index = 0;
    TensorF kernel;
    TensorF bias;
};

/// Ordered parameter collection for the parameterized layers of a spec.
struct WeightSet {
    std::vector<WeightEntry> entries;

    std::size_t parameter_count() const;
    /// Apply f(double) -> double to every parameter (kernels and biases).
    template <class F>
    void for_each(F&& f) {
        for (auto& e : entries) {
            for (double& v : e.kernel.values) f(v);
            for (double& v : e.bias.values) f(v);
        }
    }
};

/// Zero-initialized weights congruent with the spec.
WeightSet zero_weights(const NetworkSpec& spec);

/// Shape congruence between weights and spec; throws on mismatch.
void validate_weights(const NetworkSpec& spec, const WeightSet& weights);

bool same_shapes(const WeightSet& a, const WeightSet& b);

/// FNV-1a hash over the canonical textual form of a spec; identifies the
/// architecture a serialized WeightSet belongs to.
std::uint64_t spec_hash(const NetworkSpec& spec);

/// Class probabilities, shape (batch, 2). Rows sum to 1.
TensorF forward(const NetworkSpec& spec, const WeightSet& weights, const TensorF& batch);

/// Pooled backbone features: the output of the GlobalAvgPool layer,
/// shape (batch, channels). Used by the attention-guided ensemble.
TensorF backbone_features(const NetworkSpec& spec, const WeightSet& weights, const TensorF& batch);

struct LossGrads {
    double loss = 0.0;
    WeightSet grads;
};

/// Mean categorical cross-entropy over the batch and its gradient with
/// respect to every parameter. Labels must be one-hot rows of shape
/// (batch, 2). Probabilities are clamped to [1e-12, 1 - 1e-12] inside the
/// log; the clamp guards the loss value only.
LossGrads loss_and_gradients(const NetworkSpec& spec, const WeightSet& weights,
                             const TensorF& batch, const TensorF& labels);

}  // namespace weightlab
