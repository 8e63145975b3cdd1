#include "weightlab/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "weightlab/softmax.hpp"

namespace weightlab {

LayerSpec LayerSpec::conv2d(int out_channels, int kernel_size, int stride) {
    LayerSpec s;
    s.kind = LayerKind::Conv2D;
    s.out_channels = out_channels;
    s.kernel_size = kernel_size;
    s.stride = stride;
    return s;
}
LayerSpec LayerSpec::relu() {
    LayerSpec s;
    s.kind = LayerKind::ReLU;
    return s;
}
LayerSpec LayerSpec::max_pool2d(int size) {
    LayerSpec s;
    s.kind = LayerKind::MaxPool2D;
    s.pool_size = size;
    return s;
}
LayerSpec LayerSpec::global_avg_pool() {
    LayerSpec s;
    s.kind = LayerKind::GlobalAvgPool;
    return s;
}
LayerSpec LayerSpec::dense(int out_dim) {
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.out_dim = out_dim;
    return s;
}
LayerSpec LayerSpec::softmax() {
    LayerSpec s;
    s.kind = LayerKind::Softmax;
    return s;
}

NetworkSpec default_network_spec() {
    NetworkSpec spec;
    spec.input_channels = 1;
    spec.input_height = 16;
    spec.input_width = 16;
    spec.layers = {
        LayerSpec::conv2d(4, 3, 1), LayerSpec::relu(), LayerSpec::max_pool2d(2),
        LayerSpec::conv2d(8, 3, 1), LayerSpec::relu(), LayerSpec::max_pool2d(2),
        LayerSpec::global_avg_pool(), LayerSpec::dense(2), LayerSpec::softmax(),
    };
    return spec;
}

namespace {

std::string layer_name(LayerKind k) {
    switch (k) {
        case LayerKind::Conv2D: return "Conv2D";
        case LayerKind::ReLU: return "ReLU";
        case LayerKind::MaxPool2D: return "MaxPool2D";
        case LayerKind::GlobalAvgPool: return "GlobalAvgPool";
        case LayerKind::Dense: return "Dense";
        case LayerKind::Softmax: return "Softmax";
    }
    return "?";
}

// TF-style 'same' padding: output ceil(in/stride), zeros split evenly with
// the extra cell at the end.
struct ConvGeom {
    std::size_t out_h, out_w;
    int pad_top, pad_left;
};

ConvGeom conv_geometry(const LayerSpec& l, const LayerShape& in) {
    ConvGeom g;
    auto dim = [&](std::size_t n) {
        return (n + static_cast<std::size_t>(l.stride) - 1) / static_cast<std::size_t>(l.stride);
    };
    g.out_h = dim(in.height);
    g.out_w = dim(in.width);
    auto pad = [&](std::size_t out, std::size_t n) {
        long total = static_cast<long>((out - 1) * static_cast<std::size_t>(l.stride)) +
                     l.kernel_size - static_cast<long>(n);
        return static_cast<int>(std::max(total, 0L) / 2);
    };
    g.pad_top = pad(g.out_h, in.height);
    g.pad_left = pad(g.out_w, in.width);
    return g;
}

}  // namespace

std::vector<LayerShape> layer_output_shapes(const NetworkSpec& spec) {
    if (spec.input_channels < 1 || spec.input_height < 1 || spec.input_width < 1) {
        throw std::invalid_argument("NetworkSpec: input dimensions must be positive");
    }
    LayerShape cur{static_cast<std::size_t>(spec.input_channels),
                   static_cast<std::size_t>(spec.input_height),
                   static_cast<std::size_t>(spec.input_width), true};
    std::vector<LayerShape> out;
    out.reserve(spec.layers.size());
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        auto fail = [&](const std::string& msg) {
            throw std::invalid_argument("layer " + std::to_string(i) + " (" +
                                        layer_name(l.kind) + "): " + msg);
        };
        switch (l.kind) {
            case LayerKind::Conv2D: {
                if (!cur.spatial) fail("requires spatial input");
                if (l.out_channels < 1 || l.kernel_size < 1 || l.stride < 1)
                    fail("out_channels, kernel_size, stride must be positive");
                ConvGeom g = conv_geometry(l, cur);
                cur = {static_cast<std::size_t>(l.out_channels), g.out_h, g.out_w, true};
                break;
            }
            case LayerKind::ReLU:
                break;
            case LayerKind::MaxPool2D: {
                if (!cur.spatial) fail("requires spatial input");
                if (l.pool_size < 1) fail("pool size must be positive");
                std::size_t p = static_cast<std::size_t>(l.pool_size);
                if (cur.height < p || cur.width < p) fail("input smaller than pool window");
                cur = {cur.channels, cur.height / p, cur.width / p, true};
                break;
            }
            case LayerKind::GlobalAvgPool:
                if (!cur.spatial) fail("requires spatial input");
                cur = {cur.channels, 1, 1, false};
                break;
            case LayerKind::Dense:
                if (cur.spatial) fail("requires a pooled feature vector input");
                if (l.out_dim < 1) fail("out_dim must be positive");
                cur = {static_cast<std::size_t>(l.out_dim), 1, 1, false};
                break;
            case LayerKind::Softmax:
                if (cur.spatial) fail("requires a feature vector input");
                if (i + 1 != spec.layers.size()) fail("only allowed as the final layer");
                break;
        }
        out.push_back(cur);
    }
    return out;
}

void validate_spec(const NetworkSpec& spec) {
    if (spec.layers.size() < 3) {
        throw std::invalid_argument("NetworkSpec: needs at least GlobalAvgPool, Dense(2), Softmax");
    }
    layer_output_shapes(spec);
    std::size_t n = spec.layers.size();
    const LayerSpec& gap = spec.layers[n - 3];
    const LayerSpec& dense = spec.layers[n - 2];
    const LayerSpec& sm = spec.layers[n - 1];
    if (gap.kind != LayerKind::GlobalAvgPool || dense.kind != LayerKind::Dense ||
        dense.out_dim != 2 || sm.kind != LayerKind::Softmax) {
        throw std::invalid_argument(
            "NetworkSpec: must end in GlobalAvgPool, Dense(2), Softmax");
    }
}

std::size_t WeightSet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.kernel.numel() + e.bias.numel();
    return n;
}

WeightSet zero_weights(const NetworkSpec& spec) {
    auto shapes = layer_output_shapes(spec);
    LayerShape cur{static_cast<std::size_t>(spec.input_channels),
                   static_cast<std::size_t>(spec.input_height),
                   static_cast<std::size_t>(spec.input_width), true};
    WeightSet w;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        if (l.kind == LayerKind::Conv2D) {
            std::size_t oc = static_cast<std::size_t>(l.out_channels);
            std::size_t k = static_cast<std::size_t>(l.kernel_size);
            WeightEntry e;
            e.layer_index = static_cast<int>(i);
            e.kernel = TensorF::zeros({oc, cur.channels, k, k});
            e.bias = TensorF::zeros({oc});
            w.entries.push_back(std::move(e));
        } else if (l.kind == LayerKind::Dense) {
            WeightEntry e;
            e.layer_index = static_cast<int>(i);
            e.kernel = TensorF::zeros({static_cast<std::size_t>(l.out_dim), cur.features()});
            e.bias = TensorF::zeros({static_cast<std::size_t>(l.out_dim)});
            w.entries.push_back(std::move(e));
        }
        cur = shapes[i];
    }
    return w;
}

void validate_weights(const NetworkSpec& spec, const WeightSet& weights) {
    WeightSet expect = zero_weights(spec);
    if (expect.entries.size() != weights.entries.size()) {
        throw std::invalid_argument("WeightSet: expected " +
                                    std::to_string(expect.entries.size()) +
                                    " parameterized layers, got " +
                                    std::to_string(weights.entries.size()));
    }
    for (std::size_t i = 0; i < weights.entries.size(); ++i) {
        const WeightEntry& got = weights.entries[i];
        const WeightEntry& want = expect.entries[i];
        if (got.layer_index != want.layer_index || got.kernel.shape != want.kernel.shape ||
            got.bias.shape != want.bias.shape) {
            throw std::invalid_argument("WeightSet: entry " + std::to_string(i) +
                                        " does not match spec layer layout");
        }
        got.kernel.validate("kernel");
        got.bias.validate("bias");
    }
}

bool same_shapes(const WeightSet& a, const WeightSet& b) {
    if (a.entries.size() != b.entries.size()) return false;
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        if (a.entries[i].layer_index != b.entries[i].layer_index ||
            a.entries[i].kernel.shape != b.entries[i].kernel.shape ||
            a.entries[i].bias.shape != b.entries[i].bias.shape)
            return false;
    }
    return true;
}

std::uint64_t spec_hash(const NetworkSpec& spec) {
    std::string repr = "in:" + std::to_string(spec.input_channels) + "x" +
                       std::to_string(spec.input_height) + "x" +
                       std::to_string(spec.input_width);
    for (const LayerSpec& l : spec.layers) {
        repr += "|" + layer_name(l.kind);
        if (l.kind == LayerKind::Conv2D) {
            repr += ":" + std::to_string(l.out_channels) + "," +
                    std::to_string(l.kernel_size) + "," + std::to_string(l.stride);
        } else if (l.kind == LayerKind::MaxPool2D) {
            repr += ":" + std::to_string(l.pool_size);
        } else if (l.kind == LayerKind::Dense) {
            repr += ":" + std::to_string(l.out_dim);
        }
    }
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : repr) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

namespace {

// One layer's forward activation plus whatever backward needs.
struct Activation {
    TensorF t;
    LayerShape shape;
    std::vector<std::size_t> pool_argmax;  // MaxPool2D only
};

struct ForwardTrace {
    std::vector<Activation> acts;  // acts[i] = output of layer i
    std::size_t batch = 0;
};

void conv_forward(const LayerSpec& l, const LayerShape& in_shape, const TensorF& in,
                  const WeightEntry& w, std::size_t batch, LayerShape& out_shape,
                  TensorF& out) {
    ConvGeom g = conv_geometry(l, in_shape);
    std::size_t oc = static_cast<std::size_t>(l.out_channels);
    std::size_t ic = in_shape.channels, ih = in_shape.height, iw = in_shape.width;
    std::size_t k = static_cast<std::size_t>(l.kernel_size);
    long stride = l.stride;
    out_shape = {oc, g.out_h, g.out_w, true};
    out = TensorF::zeros({batch, oc, g.out_h, g.out_w});
    for (std::size_t n = 0; n < batch; ++n) {
        const double* inp = in.values.data() + n * ic * ih * iw;
        double* outp = out.values.data() + n * oc * g.out_h * g.out_w;
        for (std::size_t o = 0; o < oc; ++o) {
            const double* ker = w.kernel.values.data() + o * ic * k * k;
            double b = w.bias.values[o];
            for (std::size_t y = 0; y < g.out_h; ++y) {
                long base_y = static_cast<long>(y) * stride - g.pad_top;
                std::size_t ky_lo = static_cast<std::size_t>(std::max(0L, -base_y));
                std::size_t ky_hi = static_cast<std::size_t>(
                    std::clamp(static_cast<long>(ih) - base_y, 0L, static_cast<long>(k)));
                for (std::size_t x = 0; x < g.out_w; ++x) {
                    long base_x = static_cast<long>(x) * stride - g.pad_left;
                    std::size_t kx_lo = static_cast<std::size_t>(std::max(0L, -base_x));
                    std::size_t kx_hi = static_cast<std::size_t>(
                        std::clamp(static_cast<long>(iw) - base_x, 0L, static_cast<long>(k)));
                    double acc = b;
                    for (std::size_t c = 0; c < ic; ++c) {
                        for (std::size_t ky = ky_lo; ky < ky_hi; ++ky) {
                            std::size_t iy = static_cast<std::size_t>(base_y + static_cast<long>(ky));
                            std::size_t ix0 = static_cast<std::size_t>(base_x + static_cast<long>(kx_lo));
                            const double* row = inp + (c * ih + iy) * iw + ix0;
                            const double* kr = ker + (c * k + ky) * k + kx_lo;
                            for (std::size_t kx = 0; kx < kx_hi - kx_lo; ++kx) {
                                acc += row[kx] * kr[kx];
                            }
                        }
                    }
                    outp[(o * g.out_h + y) * g.out_w + x] = acc;
                }
            }
        }
    }
}

void conv_backward(const LayerSpec& l, const LayerShape& in_shape, const TensorF& in,
                   const WeightEntry& w, std::size_t batch, const LayerShape& out_shape,
                   const TensorF& d_out, WeightEntry& d_w, TensorF& d_in) {
    ConvGeom g = conv_geometry(l, in_shape);
    std::size_t oc = out_shape.channels;
    std::size_t ic = in_shape.channels, ih = in_shape.height, iw = in_shape.width;
    std::size_t k = static_cast<std::size_t>(l.kernel_size);
    long stride = l.stride;
    d_in = TensorF::zeros(in.shape);
    for (std::size_t n = 0; n < batch; ++n) {
        const double* inp = in.values.data() + n * ic * ih * iw;
        double* dinp = d_in.values.data() + n * ic * ih * iw;
        const double* doutp = d_out.values.data() + n * oc * out_shape.height * out_shape.width;
        for (std::size_t o = 0; o < oc; ++o) {
            const double* ker = w.kernel.values.data() + o * ic * k * k;
            double* dker = d_w.kernel.values.data() + o * ic * k * k;
            for (std::size_t y = 0; y < out_shape.height; ++y) {
                long base_y = static_cast<long>(y) * stride - g.pad_top;
                std::size_t ky_lo = static_cast<std::size_t>(std::max(0L, -base_y));
                std::size_t ky_hi = static_cast<std::size_t>(
                    std::clamp(static_cast<long>(ih) - base_y, 0L, static_cast<long>(k)));
                for (std::size_t x = 0; x < out_shape.width; ++x) {
                    double go = doutp[(o * out_shape.height + y) * out_shape.width + x];
                    if (go == 0.0) continue;
                    d_w.bias.values[o] += go;
                    long base_x = static_cast<long>(x) * stride - g.pad_left;
                    std::size_t kx_lo = static_cast<std::size_t>(std::max(0L, -base_x));
                    std::size_t kx_hi = static_cast<std::size_t>(
                        std::clamp(static_cast<long>(iw) - base_x, 0L, static_cast<long>(k)));
                    for (std::size_t c = 0; c < ic; ++c) {
                        for (std::size_t ky = ky_lo; ky < ky_hi; ++ky) {
                            std::size_t iy = static_cast<std::size_t>(base_y + static_cast<long>(ky));
                            std::size_t ix0 = static_cast<std::size_t>(base_x + static_cast<long>(kx_lo));
                            const double* in_row = inp + (c * ih + iy) * iw + ix0;
                            double* din_row = dinp + (c * ih + iy) * iw + ix0;
                            const double* kr = ker + (c * k + ky) * k + kx_lo;
                            double* dkr = dker + (c * k + ky) * k + kx_lo;
                            for (std::size_t kx = 0; kx < kx_hi - kx_lo; ++kx) {
                                dkr[kx] += go * in_row[kx];
                                din_row[kx] += go * kr[kx];
                            }
                        }
                    }
                }
            }
        }
    }
}

// Runs layers [0, upto) and fills the trace. `weights_by_layer[i]` indexes
// into weights.entries or is -1 for parameterless layers.
ForwardTrace run_forward(const NetworkSpec& spec, const WeightSet& weights,
                         const TensorF& batch, std::size_t upto) {
    validate_spec(spec);
    validate_weights(spec, weights);
    if (batch.shape.size() != 4 || batch.shape[1] != static_cast<std::size_t>(spec.input_channels) ||
        batch.shape[2] != static_cast<std::size_t>(spec.input_height) ||
        batch.shape[3] != static_cast<std::size_t>(spec.input_width)) {
        throw std::invalid_argument(
            "forward: batch shape " + batch.shape_str() + " does not match spec input (n," +
            std::to_string(spec.input_channels) + "," + std::to_string(spec.input_height) +
            "," + std::to_string(spec.input_width) + ")");
    }
    batch.validate("batch");

    ForwardTrace trace;
    trace.batch = batch.shape[0];
    std::size_t n = trace.batch;

    LayerShape cur_shape{static_cast<std::size_t>(spec.input_channels),
                         static_cast<std::size_t>(spec.input_height),
                         static_cast<std::size_t>(spec.input_width), true};
    const TensorF* cur = &batch;
    std::size_t weight_idx = 0;

    for (std::size_t i = 0; i < upto; ++i) {
        const LayerSpec& l = spec.layers[i];
        Activation act;
        switch (l.kind) {
            case LayerKind::Conv2D: {
                conv_forward(l, cur_shape, *cur, weights.entries[weight_idx], n, act.shape, act.t);
                ++weight_idx;
                break;
            }
            case LayerKind::ReLU: {
                act.shape = cur_shape;
                act.t = *cur;
                for (double& v : act.t.values) v = v > 0.0 ? v : 0.0;
                break;
            }
            case LayerKind::MaxPool2D: {
                std::size_t p = static_cast<std::size_t>(l.pool_size);
                std::size_t c = cur_shape.channels;
                std::size_t oh = cur_shape.height / p, ow = cur_shape.width / p;
                act.shape = {c, oh, ow, true};
                act.t = TensorF::zeros({n, c, oh, ow});
                act.pool_argmax.assign(n * c * oh * ow, 0);
                std::size_t ih = cur_shape.height, iw = cur_shape.width;
                for (std::size_t s = 0; s < n; ++s) {
                    const double* inp = cur->values.data() + s * c * ih * iw;
                    double* outp = act.t.values.data() + s * c * oh * ow;
                    std::size_t* argp = act.pool_argmax.data() + s * c * oh * ow;
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        for (std::size_t y = 0; y < oh; ++y) {
                            for (std::size_t x = 0; x < ow; ++x) {
                                double best = -std::numeric_limits<double>::infinity();
                                std::size_t best_idx = 0;
                                for (std::size_t dy = 0; dy < p; ++dy) {
                                    for (std::size_t dx = 0; dx < p; ++dx) {
                                        std::size_t idx = (ch * ih + y * p + dy) * iw + x * p + dx;
                                        if (inp[idx] > best) {
                                            best = inp[idx];
                                            best_idx = idx;
                                        }
                                    }
                                }
                                outp[(ch * oh + y) * ow + x] = best;
                                argp[(ch * oh + y) * ow + x] = best_idx;
                            }
                        }
                    }
                }
                break;
            }
            case LayerKind::GlobalAvgPool: {
                std::size_t c = cur_shape.channels;
                std::size_t hw = cur_shape.height * cur_shape.width;
                act.shape = {c, 1, 1, false};
                act.t = TensorF::zeros({n, c});
                for (std::size_t s = 0; s < n; ++s) {
                    const double* inp = cur->values.data() + s * c * hw;
                    double* outp = act.t.values.data() + s * c;
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < hw; ++j) acc += inp[ch * hw + j];
                        outp[ch] = acc / static_cast<double>(hw);
                    }
                }
                break;
            }
            case LayerKind::Dense: {
                const WeightEntry& w = weights.entries[weight_idx];
                ++weight_idx;
                std::size_t in_f = cur_shape.features();
                std::size_t out_f = static_cast<std::size_t>(l.out_dim);
                act.shape = {out_f, 1, 1, false};
                act.t = TensorF::zeros({n, out_f});
                for (std::size_t s = 0; s < n; ++s) {
                    const double* inp = cur->values.data() + s * in_f;
                    double* outp = act.t.values.data() + s * out_f;
                    for (std::size_t o = 0; o < out_f; ++o) {
                        double acc = w.bias.values[o];
                        const double* kr = w.kernel.values.data() + o * in_f;
                        for (std::size_t f = 0; f < in_f; ++f) acc += kr[f] * inp[f];
                        outp[o] = acc;
                    }
                }
                break;
            }
            case LayerKind::Softmax: {
                std::size_t f = cur_shape.features();
                act.shape = cur_shape;
                act.t = TensorF::zeros({n, f});
                for (std::size_t s = 0; s < n; ++s) {
                    fuzzy_softmax_into(
                        std::span<const double>(cur->values.data() + s * f, f), 1.0,
                        std::span<double>(act.t.values.data() + s * f, f));
                }
                break;
            }
        }
        trace.acts.push_back(std::move(act));
        cur = &trace.acts.back().t;
        cur_shape = trace.acts.back().shape;
    }
    return trace;
}

}  // namespace

TensorF forward(const NetworkSpec& spec, const WeightSet& weights, const TensorF& batch) {
    ForwardTrace trace = run_forward(spec, weights, batch, spec.layers.size());
    return std::move(trace.acts.back().t);
}

TensorF backbone_features(const NetworkSpec& spec, const WeightSet& weights,
                          const TensorF& batch) {
    // Output of the GlobalAvgPool layer (third from last).
    std::size_t upto = spec.layers.size() - 2;
    ForwardTrace trace = run_forward(spec, weights, batch, upto);
    return std::move(trace.acts.back().t);
}

LossGrads loss_and_gradients(const NetworkSpec& spec, const WeightSet& weights,
                             const TensorF& batch, const TensorF& labels) {
    ForwardTrace trace = run_forward(spec, weights, batch, spec.layers.size());
    std::size_t n = trace.batch;

    if (labels.shape.size() != 2 || labels.shape[0] != n || labels.shape[1] != 2) {
        throw std::invalid_argument("loss_and_gradients: labels must have shape (batch, 2)");
    }
    for (std::size_t s = 0; s < n; ++s) {
        double a = labels.values[s * 2], b = labels.values[s * 2 + 1];
        bool one_hot = (a == 1.0 && b == 0.0) || (a == 0.0 && b == 1.0);
        if (!one_hot) {
            throw std::invalid_argument("loss_and_gradients: labels row " + std::to_string(s) +
                                        " is not one-hot");
        }
    }

    const TensorF& probs = trace.acts.back().t;
    constexpr double kClamp = 1e-12;
    double loss = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t j = 0; j < 2; ++j) {
            double y = labels.values[s * 2 + j];
            if (y == 1.0) {
                double p = std::clamp(probs.values[s * 2 + j], kClamp, 1.0 - kClamp);
                loss -= std::log(p);
            }
        }
    }
    loss /= static_cast<double>(n);

    LossGrads result;
    result.loss = loss;
    result.grads = zero_weights(spec);

    // Fused softmax + cross-entropy gradient with respect to the logits.
    TensorF d_cur = TensorF::zeros({n, 2});
    for (std::size_t j = 0; j < n * 2; ++j) {
        d_cur.values[j] = (probs.values[j] - labels.values[j]) / static_cast<double>(n);
    }

    std::size_t weight_idx = weights.entries.size();
    // Walk layers in reverse, skipping the final softmax (already fused).
    for (std::size_t li = spec.layers.size() - 1; li-- > 0;) {
        const LayerSpec& l = spec.layers[li];
        const TensorF& input = li == 0 ? batch : trace.acts[li - 1].t;
        LayerShape in_shape =
            li == 0 ? LayerShape{static_cast<std::size_t>(spec.input_channels),
                                 static_cast<std::size_t>(spec.input_height),
                                 static_cast<std::size_t>(spec.input_width), true}
                    : trace.acts[li - 1].shape;
        const Activation& act = trace.acts[li];
        TensorF d_in;
        switch (l.kind) {
            case LayerKind::Conv2D: {
                --weight_idx;
                conv_backward(l, in_shape, input, weights.entries[weight_idx], n, act.shape,
                              d_cur, result.grads.entries[weight_idx], d_in);
                break;
            }
            case LayerKind::ReLU: {
                d_in = d_cur;
                for (std::size_t j = 0; j < d_in.values.size(); ++j) {
                    if (input.values[j] <= 0.0) d_in.values[j] = 0.0;
                }
                break;
            }
            case LayerKind::MaxPool2D: {
                d_in = TensorF::zeros(input.shape);
                std::size_t per_sample_out = act.shape.channels * act.shape.height * act.shape.width;
                std::size_t per_sample_in = in_shape.channels * in_shape.height * in_shape.width;
                for (std::size_t s = 0; s < n; ++s) {
                    for (std::size_t j = 0; j < per_sample_out; ++j) {
                        std::size_t src = act.pool_argmax[s * per_sample_out + j];
                        d_in.values[s * per_sample_in + src] +=
                            d_cur.values[s * per_sample_out + j];
                    }
                }
                break;
            }
            case LayerKind::GlobalAvgPool: {
                d_in = TensorF::zeros(input.shape);
                std::size_t c = in_shape.channels;
                std::size_t hw = in_shape.height * in_shape.width;
                double inv = 1.0 / static_cast<double>(hw);
                for (std::size_t s = 0; s < n; ++s) {
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        double g = d_cur.values[s * c + ch] * inv;
                        double* dst = d_in.values.data() + (s * c + ch) * hw;
                        for (std::size_t j = 0; j < hw; ++j) dst[j] += g;
                    }
                }
                break;
            }
            case LayerKind::Dense: {
                --weight_idx;
                const WeightEntry& w = weights.entries[weight_idx];
                WeightEntry& dw = result.grads.entries[weight_idx];
                std::size_t in_f = in_shape.features();
                std::size_t out_f = act.shape.features();
                d_in = TensorF::zeros(input.shape);
                for (std::size_t s = 0; s < n; ++s) {
                    const double* inp = input.values.data() + s * in_f;
                    const double* go = d_cur.values.data() + s * out_f;
                    double* din = d_in.values.data() + s * in_f;
                    for (std::size_t o = 0; o < out_f; ++o) {
                        dw.bias.values[o] += go[o];
                        double* dk = dw.kernel.values.data() + o * in_f;
                        const double* kr = w.kernel.values.data() + o * in_f;
                        for (std::size_t f = 0; f < in_f; ++f) {
                            dk[f] += go[o] * inp[f];
                            din[f] += go[o] * kr[f];
                        }
                    }
                }
                break;
            }
            case LayerKind::Softmax:
                throw std::logic_error("softmax only allowed as final layer");
        }
        d_cur = std::move(d_in);
    }
    return result;
}

}  // namespace weightlab
