#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ffgaf/allocation.hpp"
#include "ffgaf/common.hpp"
#include "ffgaf/data.hpp"
#include "ffgaf/numerics.hpp"
#include "ffgaf/rng.hpp"
#include "ffgaf/spiking.hpp"
#include "ffgaf/tensor.hpp"

namespace ffgaf {

enum class block_kind { encoding, hidden };
enum class loss_mode { softmax, literal };
enum class eq5_divisor { mean_with_t, literal };

inline constexpr double goodness_epsilon = 1e-12;

// Knobs that change the loss/forward semantics rather than the architecture.
struct net_options {
    loss_mode loss = loss_mode::softmax;
    eq5_divisor divisor = eq5_divisor::mean_with_t;
    bool quant_in_loss = false; // quantized activation on the loss path instead of plain ReLU
};

template <class T>
tensor<T> reshape(tensor<T> t, std::vector<std::size_t> shape) {
    return tensor<T>(std::move(shape), std::move(t.vec()));
}

// ---------------------------------------------------------------------------
// training_block
// ---------------------------------------------------------------------------

// One locally trained unit: channel-weighted conv, normalization, rectifier,
// goodness head, plus the frozen spiking layer that feeds the next block.
template <class T>
struct training_block {
    conv_params<T> conv;
    norm_params<T> norm;
    allocation alloc;
    block_kind kind = block_kind::encoding;
    spiking_layer spiking;
    quant_act_params quant;

    void validate() const {
        int total = 0;
        for (int v : alloc.channels_per_class) total += v;
        if (total != static_cast<int>(conv.out_channels())) {
            throw config_error("training_block: allocation covers " + std::to_string(total) +
                               " channels but conv has " + std::to_string(conv.out_channels()));
        }
        if (kind == block_kind::encoding && norm.mode != norm_mode::batch) {
            throw config_error("training_block: encoding blocks use batch normalization");
        }
        if (kind == block_kind::hidden && norm.mode != norm_mode::temporal) {
            throw config_error("training_block: hidden blocks use temporal normalization");
        }
        spiking.validate();
        quant.validate();
    }
};

// Forward intermediates kept for the analytic backward pass. per_step (hidden
// blocks only) also provides the drive for the spiking follower.
template <class T>
struct block_forward_result {
    tensor<T> input_flat;  // hidden only: the spike train viewed as (T*N) x C x H x W
    tensor<T> conv_raw;    // pre-weight conv accumulation, batch-flattened
    tensor<T> conv_out;    // post weight+bias, batch-flattened
    tensor<T> per_step;    // hidden only: normalized per-step activations, T x N x C x H' x W'
    tensor<T> pre_act;     // N x C x H' x W' input to the rectifier
    tensor<T> y;           // rectifier output (the goodness head input)
};

// Encoding block: y = relu(batchnorm(conv(x))) on a single frame.
// Hidden block: per-step conv with shared weights, temporal normalization over
// (T,N,H,W), then y = relu(sum_t a_t).
template <class T>
block_forward_result<T> block_forward(training_block<T>& b, const tensor<T>& input, bool training,
                                      const net_options& opts = {}) {
    b.validate();
    block_forward_result<T> r;

    if (b.kind == block_kind::encoding) {
        if (input.rank() != 4) {
            throw config_error("block_forward: encoding block expects N x C x H x W input");
        }
        r.conv_out = conv2d(input, b.conv, &r.conv_raw);
        r.pre_act = normalize(r.conv_out, b.norm, training);
    } else {
        if (input.rank() != 5) {
            throw config_error("block_forward: hidden block expects T x N x C x H x W input");
        }
        const std::size_t t_steps = input.dim(0), n = input.dim(1);
        if (static_cast<int>(t_steps) != b.spiking.horizon) {
            throw config_error("block_forward: spike train has " + std::to_string(t_steps) +
                               " steps, block horizon is " + std::to_string(b.spiking.horizon));
        }
        r.input_flat = tensor<T>({t_steps * n, input.dim(2), input.dim(3), input.dim(4)},
                                 std::vector<T>(input.vec()));
        r.conv_out = conv2d(r.input_flat, b.conv, &r.conv_raw);
        const std::size_t c = r.conv_out.dim(1), oh = r.conv_out.dim(2), ow = r.conv_out.dim(3);
        r.conv_out = reshape(std::move(r.conv_out), {t_steps, n, c, oh, ow});
        r.per_step = normalize(r.conv_out, b.norm, training);

        r.pre_act = tensor<T>({n, c, oh, ow});
        const std::size_t frame = n * c * oh * ow;
        for (std::size_t t = 0; t < t_steps; ++t) {
            const T* src = r.per_step.data() + t * frame;
            for (std::size_t i = 0; i < frame; ++i) r.pre_act[i] += src[i];
        }
    }

    r.y = opts.quant_in_loss ? quantized_relu(r.pre_act, b.quant) : relu(r.pre_act);
    return r;
}

// ---------------------------------------------------------------------------
// goodness + local loss
// ---------------------------------------------------------------------------

// G[n,j] = mean of y^2 over class j's allocated channels and all remaining
// axes, floored at goodness_epsilon. Accepts the 4-D integrated activations
// or a 5-D per-step tensor; with the literal divisor the 5-D form keeps the
// printed S_j*H*W denominator while still summing over t.
template <class T>
tensor<T> goodness(const tensor<T>& y, const allocation& alloc,
                   eq5_divisor divisor = eq5_divisor::mean_with_t) {
    const bool temporal = y.rank() == 5;
    if (!temporal && y.rank() != 4) {
        throw config_error("goodness: expected rank-4 or rank-5 activations");
    }
    const std::size_t t_steps = temporal ? y.dim(0) : 1;
    const std::size_t n = y.dim(temporal ? 1 : 0);
    const std::size_t c = y.dim(temporal ? 2 : 1);
    const std::size_t spatial = y.dim(y.rank() - 2) * y.dim(y.rank() - 1);
    const int k = alloc.num_classes();
    const auto off = alloc.offsets();
    if (off.back() != static_cast<int>(c)) {
        throw config_error("goodness: allocation covers " + std::to_string(off.back()) +
                           " channels, activations have " + std::to_string(c));
    }

    tensor<T> g({n, static_cast<std::size_t>(k)});
    for (std::size_t t = 0; t < t_steps; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            const T* sample = y.data() + (t * n + i) * c * spatial;
            for (int j = 0; j < k; ++j) {
                double acc = 0.0;
                for (int ch = off[j]; ch < off[j + 1]; ++ch) {
                    const T* row = sample + static_cast<std::size_t>(ch) * spatial;
                    for (std::size_t s = 0; s < spatial; ++s) {
                        acc += static_cast<double>(row[s]) * row[s];
                    }
                }
                g.at(i, j) += static_cast<T>(acc);
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j) {
            double div = static_cast<double>(alloc.channels_per_class[j]) * spatial;
            if (divisor == eq5_divisor::mean_with_t) div *= static_cast<double>(t_steps);
            double v = static_cast<double>(g.at(i, j)) / div;
            g.at(i, j) = static_cast<T>(std::max(v, goodness_epsilon));
        }
    }
    ensure_finite(g, "goodness");
    return g;
}

// dL/dy given dL/dG: each activation feeds exactly one class's mean of squares.
template <class T>
tensor<T> goodness_backward(const tensor<T>& y, const allocation& alloc, const tensor<T>& grad_g,
                            eq5_divisor divisor = eq5_divisor::mean_with_t) {
    const bool temporal = y.rank() == 5;
    const std::size_t t_steps = temporal ? y.dim(0) : 1;
    const std::size_t n = y.dim(temporal ? 1 : 0);
    const std::size_t c = y.dim(temporal ? 2 : 1);
    const std::size_t spatial = y.dim(y.rank() - 2) * y.dim(y.rank() - 1);
    const auto off = alloc.offsets();

    std::vector<int> class_of(c);
    for (int j = 0; j < alloc.num_classes(); ++j) {
        for (int ch = off[j]; ch < off[j + 1]; ++ch) class_of[ch] = j;
    }

    tensor<T> grad(y.shape());
    for (std::size_t t = 0; t < t_steps; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t base = (t * n + i) * c * spatial;
            for (std::size_t ch = 0; ch < c; ++ch) {
                const int j = class_of[ch];
                double div = static_cast<double>(alloc.channels_per_class[j]) * spatial;
                if (divisor == eq5_divisor::mean_with_t) div *= static_cast<double>(t_steps);
                const T scale = static_cast<T>(2.0 * static_cast<double>(grad_g.at(i, j)) / div);
                const T* ys = y.data() + base + ch * spatial;
                T* gs = grad.data() + base + ch * spatial;
                for (std::size_t s = 0; s < spatial; ++s) gs[s] = scale * ys[s];
            }
        }
    }
    return grad;
}

template <class T>
struct loss_result {
    double loss = 0.0;
    tensor<T> grad_g; // dL/dG, N x K
};

// softmax mode: cross-entropy over softmax(ln G), i.e. p = G / sum(G) per row,
// averaged over the batch. literal mode: -sum_n ln G[n, y_n] exactly as the
// printed loss reads with one-hot targets.
template <class T>
loss_result<T> local_loss(const tensor<T>& g, const std::vector<int>& labels, loss_mode mode) {
    if (g.rank() != 2) throw config_error("local_loss: goodness must be N x K");
    const std::size_t n = g.dim(0), k = g.dim(1);
    if (labels.size() != n) throw config_error("local_loss: label count mismatch");

    loss_result<T> r;
    r.grad_g = tensor<T>({n, k});
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int y = labels[i];
        if (y < 0 || y >= static_cast<int>(k)) {
            throw data_error("local_loss: label " + std::to_string(y) + " outside [0," +
                             std::to_string(k) + ")");
        }
        if (mode == loss_mode::softmax) {
            double total = 0.0;
            for (std::size_t j = 0; j < k; ++j) total += static_cast<double>(g.at(i, j));
            loss += std::log(total) - std::log(static_cast<double>(g.at(i, y)));
            for (std::size_t j = 0; j < k; ++j) {
                const double p = static_cast<double>(g.at(i, j)) / total;
                const double delta = static_cast<int>(j) == y ? 1.0 : 0.0;
                r.grad_g.at(i, j) = static_cast<T>((p - delta) /
                                                   (static_cast<double>(n) * g.at(i, j)));
            }
        } else {
            loss -= std::log(static_cast<double>(g.at(i, y)));
            r.grad_g.at(i, y) = static_cast<T>(-1.0 / static_cast<double>(g.at(i, y)));
        }
    }
    r.loss = mode == loss_mode::softmax ? loss / static_cast<double>(n) : loss;
    if (!std::isfinite(r.loss)) throw numeric_error("local_loss: non-finite loss");
    return r;
}

// ---------------------------------------------------------------------------
// block training
// ---------------------------------------------------------------------------

template <class T>
struct block_metrics {
    double loss = 0.0;
    double accuracy = 0.0;   // argmax-G agreement on this batch
    tensor<T> goodness_mat;  // N x K, reused by the prediction ensemble
};

// Analytic gradients of the block-local loss w.r.t. every trainable tensor.
template <class T>
struct block_grads {
    tensor<T> kernels;
    std::vector<T> bias;
    std::vector<T> channel_weight;
    std::vector<T> gamma;
    std::vector<T> beta;
};

namespace detail {

template <class T>
void sgd_axpy(std::vector<T>& param, const std::vector<T>& grad, T lr) {
    for (std::size_t i = 0; i < param.size(); ++i) param[i] -= lr * grad[i];
}

} // namespace detail

// Loss + analytic backward through rectifier, normalization and conv for one
// block. Nothing propagates upstream or through any spiking layer: the input
// activations are detached by construction.
template <class T>
block_grads<T> block_gradients(const training_block<T>& b, const tensor<T>& input,
                               const block_forward_result<T>& fwd, const tensor<T>& grad_g,
                               const net_options& opts = {}) {
    tensor<T> grad_y = goodness_backward(fwd.y, b.alloc, grad_g, opts.divisor);
    tensor<T> grad_pre = opts.quant_in_loss
                             ? quantized_relu_backward(fwd.pre_act, b.quant, grad_y)
                             : relu_backward(fwd.pre_act, grad_y);

    norm_grads<T> ng;
    tensor<T> grad_conv_out;
    if (b.kind == block_kind::encoding) {
        ng = normalize_backward(fwd.conv_out, b.norm, grad_pre);
        grad_conv_out = std::move(ng.x);
    } else {
        // y summed the per-step activations, so the incoming gradient is
        // replicated across every step before entering the normalization.
        const std::size_t t_steps = fwd.per_step.dim(0);
        const std::size_t frame = grad_pre.size();
        tensor<T> grad_steps(fwd.per_step.shape());
        for (std::size_t t = 0; t < t_steps; ++t) {
            std::copy(grad_pre.data(), grad_pre.data() + frame, grad_steps.data() + t * frame);
        }
        ng = normalize_backward(fwd.conv_out, b.norm, grad_steps);
        grad_conv_out = std::move(ng.x);
    }

    const tensor<T>& conv_input = b.kind == block_kind::hidden ? fwd.input_flat : input;
    tensor<T> grad_flat = grad_conv_out.rank() == 5
                              ? reshape(std::move(grad_conv_out),
                                        {fwd.conv_raw.dim(0), fwd.conv_raw.dim(1),
                                         fwd.conv_raw.dim(2), fwd.conv_raw.dim(3)})
                              : std::move(grad_conv_out);
    conv_grads<T> cg = conv2d_backward(conv_input, b.conv, grad_flat, &fwd.conv_raw, false);

    block_grads<T> g;
    g.kernels = std::move(cg.kernels);
    g.bias = std::move(cg.bias);
    g.channel_weight = std::move(cg.channel_weight);
    g.gamma = std::move(ng.gamma);
    g.beta = std::move(ng.beta);
    return g;
}

namespace detail {

// L2-norm clip factor. The loss gradient carries a 1/G factor, so a batch
// whose goodness sits near the floor injects steps several orders of
// magnitude above normal; clipping bounds those spikes without touching the
// analytic gradient values themselves.
template <class T>
T clip_factor(const T* g, std::size_t n, double max_norm) {
    if (max_norm <= 0.0) return T(1);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) sq += static_cast<double>(g[i]) * g[i];
    const double norm = std::sqrt(sq);
    return norm > max_norm ? static_cast<T>(max_norm / norm) : T(1);
}

} // namespace detail

// max_norm <= 0 disables clipping. Convolution tensors train at lr; the
// normalization affines at lr * affine_scale (at the full conv rate they run
// away into dead-channel collapse).
template <class T>
void apply_sgd(training_block<T>& b, const block_grads<T>& g, double lr, double max_norm = 0.0,
               double affine_scale = 1.0) {
    const T lr_t = static_cast<T>(lr);
    T s = detail::clip_factor(g.kernels.data(), g.kernels.size(), max_norm);
    for (std::size_t i = 0; i < b.conv.kernels.size(); ++i) {
        b.conv.kernels[i] -= lr_t * s * g.kernels[i];
    }
    s = detail::clip_factor(g.bias.data(), g.bias.size(), max_norm);
    detail::sgd_axpy(b.conv.bias, g.bias, lr_t * s);
    s = detail::clip_factor(g.channel_weight.data(), g.channel_weight.size(), max_norm);
    detail::sgd_axpy(b.conv.channel_weight, g.channel_weight, lr_t * s);
    const T lr_a = static_cast<T>(lr * affine_scale);
    s = detail::clip_factor(g.gamma.data(), g.gamma.size(), max_norm);
    detail::sgd_axpy(b.norm.gamma, g.gamma, lr_a * s);
    s = detail::clip_factor(g.beta.data(), g.beta.size(), max_norm);
    detail::sgd_axpy(b.norm.beta, g.beta, lr_a * s);
}

// Loss, analytic backward and SGD update for one block given its forward cache.
template <class T>
block_metrics<T> block_train_from_cache(training_block<T>& b, const tensor<T>& input,
                                        const block_forward_result<T>& fwd,
                                        const std::vector<int>& labels, double lr,
                                        const net_options& opts = {}, double grad_clip = 0.0,
                                        double affine_lr_scale = 1.0) {
    block_metrics<T> m;
    m.goodness_mat = goodness(fwd.y, b.alloc, opts.divisor);
    auto loss = local_loss(m.goodness_mat, labels, opts.loss);
    m.loss = loss.loss;

    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < m.goodness_mat.dim(1); ++j) {
            if (m.goodness_mat.at(i, j) > m.goodness_mat.at(i, best)) best = j;
        }
        if (static_cast<int>(best) == labels[i]) ++correct;
    }
    m.accuracy = labels.empty() ? 0.0 : static_cast<double>(correct) / labels.size();

    auto grads = block_gradients(b, input, fwd, loss.grad_g, opts);
    apply_sgd(b, grads, lr, grad_clip, affine_lr_scale);
    return m;
}

// One-call variant: forward in training mode, then update.
template <class T>
block_metrics<T> block_train_step(const tensor<T>& input, const std::vector<int>& labels,
                                  training_block<T>& b, double lr, const net_options& opts = {}) {
    auto fwd = block_forward(b, input, true, opts);
    return block_train_from_cache(b, input, fwd, labels, lr, opts);
}

// Regularize -> quantize -> spike. Encoding blocks contribute a single frame
// replicated over the horizon; hidden blocks drive the IF layer with their
// per-step normalized activations.
template <class T>
spike_result<T> block_spike_path(const training_block<T>& b, const block_forward_result<T>& fwd,
                                 bool* degenerate = nullptr) {
    const tensor<T>& source = b.kind == block_kind::encoding ? fwd.y : fwd.per_step;
    tensor<T> z = regularize(source, b.spiking.thresh, degenerate);
    tensor<T> q = quantized_relu(z, b.quant);
    return if_forward(q, b.spiking);
}

// ---------------------------------------------------------------------------
// network
// ---------------------------------------------------------------------------

template <class T>
struct network {
    std::vector<training_block<T>> blocks;
    int classes = 0;
    int horizon = 10;
    std::vector<double> aggregation_weights; // ln-goodness weight per block at prediction

    void validate() const {
        if (blocks.empty()) throw config_error("network: no blocks");
        if (aggregation_weights.size() != blocks.size()) {
            throw config_error("network: aggregation weight per block required");
        }
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            blocks[i].validate();
            if (blocks[i].alloc.num_classes() != classes) {
                throw config_error("network: block " + std::to_string(i) +
                                   " allocation classes mismatch");
            }
            if (blocks[i].spiking.horizon != horizon) {
                throw config_error("network: block " + std::to_string(i) + " horizon " +
                                   std::to_string(blocks[i].spiking.horizon) +
                                   " differs from the network horizon " +
                                   std::to_string(horizon));
            }
            if (i + 1 < blocks.size() &&
                blocks[i].conv.out_channels() != blocks[i + 1].conv.in_channels()) {
                throw config_error("network: block " + std::to_string(i) + " C_out " +
                                   std::to_string(blocks[i].conv.out_channels()) +
                                   " does not feed block " + std::to_string(i + 1));
            }
        }
    }
};

// Shape-level description used to build fresh networks (and by the energy
// model, which never needs weights).
struct net_arch {
    int input_channels = 1;
    std::vector<int> channels;  // C_out per block
    std::vector<int> strides;   // per block; a trailing extra 1 is tolerated
    int kernel = 3;
    int padding = -1;           // -1 -> (kernel - 1) / 2
    int classes = 10;
    int horizon = 10;
    double thresh = 1.0;
    int levels = 10;
    double shift_phi = 0.5;
    double initial_charge_frac = 0.5;
    double norm_momentum = 0.1;
    double norm_epsilon = 1e-5;

    void validate() const {
        if (channels.empty()) throw config_error("net_arch: empty channel list");
        if (strides.size() != channels.size() && strides.size() != channels.size() + 1) {
            throw config_error("net_arch: strides must cover each block (optionally plus a "
                               "trailing goodness-head stride of 1)");
        }
        if (strides.size() == channels.size() + 1 && strides.back() != 1) {
            throw config_error("net_arch: trailing goodness-head stride must be 1");
        }
        if (kernel < 1) throw config_error("net_arch: kernel must be >= 1");
    }
};

// He-style init for kernels, identity channel weights, zero biases. The
// temporal-norm gamma starts at thresh so hidden activations land on the
// spiking layer's scale.
template <class T>
network<T> build_network(const net_arch& arch, const std::vector<double>& complexity,
                         alloc_strategy strategy, double alloc_phi, std::uint64_t seed) {
    arch.validate();
    network<T> net;
    net.classes = static_cast<int>(complexity.size());
    net.horizon = arch.horizon;
    const int pad = arch.padding >= 0 ? arch.padding : (arch.kernel - 1) / 2;

    int c_in = arch.input_channels;
    for (std::size_t i = 0; i < arch.channels.size(); ++i) {
        training_block<T> b;
        const int c_out = arch.channels[i];
        b.kind = i == 0 ? block_kind::encoding : block_kind::hidden;
        b.conv = make_conv_params<T>(c_out, c_in, arch.kernel, arch.strides[i], pad);

        rng gen(derive_seed(seed, 0xb10c + i));
        const double fan_in = static_cast<double>(c_in) * arch.kernel * arch.kernel;
        const double sd = std::sqrt(2.0 / fan_in);
        for (std::size_t q = 0; q < b.conv.kernels.size(); ++q) {
            b.conv.kernels[q] = static_cast<T>(gen.normal(0.0, sd));
        }

        const bool enc = b.kind == block_kind::encoding;
        b.norm = make_norm_params<T>(c_out, enc ? norm_mode::batch : norm_mode::temporal,
                                     enc ? T(1) : static_cast<T>(arch.thresh));
        b.norm.momentum = static_cast<T>(arch.norm_momentum);
        b.norm.epsilon = static_cast<T>(arch.norm_epsilon);

        b.spiking.thresh = arch.thresh;
        b.spiking.horizon = arch.horizon;
        b.spiking.initial_charge_frac = arch.initial_charge_frac;
        b.quant.lambda = arch.thresh; // keeps the quantizer on the IF layer's scale
        b.quant.levels = arch.levels;
        b.quant.shift_phi = arch.shift_phi;

        b.alloc = allocate(complexity, c_out, alloc_phi, strategy);
        net.blocks.push_back(std::move(b));
        c_in = c_out;
    }
    net.aggregation_weights.assign(net.blocks.size(), 1.0);
    net.validate();
    return net;
}

// Activations the full pipeline produces for one batch.
template <class T>
struct net_activations {
    std::vector<tensor<T>> goodness;      // per block, N x K
    tensor<T> final_spikes;               // last spiking layer's output
    std::vector<double> spike_rates;      // per spiking layer
    std::vector<double> conversion_errs;  // mean |v(T)-v(0)| per spiking layer
};

// Stage-by-stage forward: block -> regularize -> quantize -> spike -> next.
template <class T>
net_activations<T> network_forward(const tensor<T>& x, network<T>& net, bool training,
                                   const net_options& opts = {}) {
    net.validate();
    net_activations<T> acts;
    tensor<T> cur = x;
    for (std::size_t i = 0; i < net.blocks.size(); ++i) {
        auto& b = net.blocks[i];
        auto fwd = block_forward(b, cur, training, opts);
        acts.goodness.push_back(goodness(fwd.y, b.alloc, opts.divisor));
        spike_result<T> sp = block_spike_path(b, fwd);
        acts.spike_rates.push_back(spike_rate(sp.spikes));
        acts.conversion_errs.push_back(mean_abs(conversion_error(sp.v_final, sp.v_initial)));
        cur = std::move(sp.spikes);
    }
    acts.final_spikes = std::move(cur);
    return acts;
}

// argmax_j of the aggregation-weighted sum of ln G over blocks; ties go to the
// lowest class index.
template <class T>
std::vector<int> predict_from_goodness(const std::vector<tensor<T>>& goodness_per_block,
                                       const std::vector<double>& weights) {
    const std::size_t n = goodness_per_block.at(0).dim(0);
    const std::size_t k = goodness_per_block.at(0).dim(1);
    std::vector<int> out(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        double best = -1e300;
        int best_j = 0;
        for (std::size_t j = 0; j < k; ++j) {
            double score = 0.0;
            for (std::size_t bi = 0; bi < goodness_per_block.size(); ++bi) {
                score += weights[bi] *
                         std::log(static_cast<double>(goodness_per_block[bi].at(i, j)));
            }
            if (score > best) {
                best = score;
                best_j = static_cast<int>(j);
            }
        }
        out[i] = best_j;
    }
    return out;
}

template <class T>
std::vector<int> predict(const tensor<T>& x, network<T>& net, const net_options& opts = {}) {
    auto acts = network_forward(x, net, false, opts);
    return predict_from_goodness(acts.goodness, net.aggregation_weights);
}

// ---------------------------------------------------------------------------
// fit / evaluate
// ---------------------------------------------------------------------------

struct fit_config {
    double lr = 0.01;
    std::size_t batch_size = 128;
    int epochs = 1;
    std::uint64_t seed = 1;
    bool shuffle = true;
    double grad_clip = 5.0;        // per-tensor update norm bound; <= 0 disables
    double affine_lr_scale = 0.1;  // gamma/beta rate relative to the conv rate
    net_options opts;
};

struct epoch_stats {
    std::vector<double> block_loss;       // sample-weighted mean per block
    std::vector<double> block_acc;        // per-block argmax-G accuracy
    double ensemble_acc = 0.0;            // training-pass prediction accuracy
    std::vector<double> spike_rates;      // mean per spiking layer
    std::vector<double> conversion_errs;  // mean |v(T)-v(0)| per spiking layer
};

// Layer-local training: every block updates from its own detached input in the
// same pass. The spike train handed to block i+1 is built from block i's
// pre-update forward activations, so each batch costs one forward per block.
template <class T, class EpochFn>
std::vector<epoch_stats> fit(const dataset<T>& train, network<T>& net, const fit_config& cfg,
                             EpochFn&& on_epoch) {
    net.validate();
    const std::size_t n_blocks = net.blocks.size();
    std::vector<epoch_stats> history;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        epoch_stats stats;
        stats.block_loss.assign(n_blocks, 0.0);
        stats.block_acc.assign(n_blocks, 0.0);
        stats.spike_rates.assign(n_blocks, 0.0);
        stats.conversion_errs.assign(n_blocks, 0.0);
        std::size_t seen = 0, ensemble_correct = 0;

        auto plan = batch_plan(train.size(), cfg.batch_size, cfg.shuffle, cfg.seed,
                               static_cast<std::uint64_t>(epoch));
        for (const auto& indices : plan) {
            batch<T> bt = take(train, indices);
            const std::size_t bn = bt.labels.size();
            std::vector<tensor<T>> block_goodness;

            tensor<T> cur = std::move(bt.images);
            for (std::size_t i = 0; i < n_blocks; ++i) {
                auto& b = net.blocks[i];
                auto fwd = block_forward(b, cur, true, cfg.opts);
                auto metrics = block_train_from_cache(b, cur, fwd, bt.labels, cfg.lr, cfg.opts,
                                                      cfg.grad_clip, cfg.affine_lr_scale);
                stats.block_loss[i] += metrics.loss * static_cast<double>(bn);
                stats.block_acc[i] += metrics.accuracy * static_cast<double>(bn);
                block_goodness.push_back(std::move(metrics.goodness_mat));

                spike_result<T> sp = block_spike_path(b, fwd);
                stats.spike_rates[i] += spike_rate(sp.spikes) * static_cast<double>(bn);
                stats.conversion_errs[i] +=
                    mean_abs(conversion_error(sp.v_final, sp.v_initial)) * static_cast<double>(bn);
                cur = std::move(sp.spikes);
            }

            auto pred = predict_from_goodness(block_goodness, net.aggregation_weights);
            for (std::size_t i = 0; i < bn; ++i) {
                if (pred[i] == bt.labels[i]) ++ensemble_correct;
            }
            seen += bn;
        }

        const double denom = static_cast<double>(seen);
        for (std::size_t i = 0; i < n_blocks; ++i) {
            stats.block_loss[i] /= denom;
            stats.block_acc[i] /= denom;
            stats.spike_rates[i] /= denom;
            stats.conversion_errs[i] /= denom;
        }
        stats.ensemble_acc = static_cast<double>(ensemble_correct) / denom;
        history.push_back(stats);
        on_epoch(epoch, history.back());
    }
    return history;
}

template <class T>
std::vector<epoch_stats> fit(const dataset<T>& train, network<T>& net, const fit_config& cfg) {
    return fit(train, net, cfg, [](int, const epoch_stats&) {});
}

template <class T>
struct eval_result {
    double accuracy = 0.0;
    std::vector<long long> confusion;     // K x K row-major, rows = true class
    std::vector<double> spike_rates;      // mean per spiking layer
    std::vector<int> predictions;
};

template <class T>
eval_result<T> evaluate(const dataset<T>& test, network<T>& net, const net_options& opts = {},
                        std::size_t batch_size = 256) {
    if (test.size() == 0) throw data_error("evaluate: empty test set");
    const int k = net.classes;
    eval_result<T> res;
    res.confusion.assign(static_cast<std::size_t>(k) * k, 0);
    res.spike_rates.assign(net.blocks.size(), 0.0);
    std::size_t correct = 0;

    auto plan = batch_plan(test.size(), batch_size, false, 0, 0);
    for (const auto& indices : plan) {
        batch<T> bt = take(test, indices);
        auto acts = network_forward(bt.images, net, false, opts);
        auto pred = predict_from_goodness(acts.goodness, net.aggregation_weights);
        for (std::size_t i = 0; i < pred.size(); ++i) {
            res.predictions.push_back(pred[i]);
            if (pred[i] == bt.labels[i]) ++correct;
            res.confusion[static_cast<std::size_t>(bt.labels[i]) * k + pred[i]] += 1;
        }
        for (std::size_t b = 0; b < net.blocks.size(); ++b) {
            res.spike_rates[b] += acts.spike_rates[b] * static_cast<double>(bt.labels.size());
        }
    }
    for (auto& r : res.spike_rates) r /= static_cast<double>(test.size());
    res.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
    return res;
}

} // namespace ffgaf
