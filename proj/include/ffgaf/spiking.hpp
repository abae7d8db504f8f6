#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ffgaf/common.hpp"
#include "ffgaf/tensor.hpp"

namespace ffgaf {

// Frozen integrate-and-fire population. Carries no trainable state: threshold,
// horizon and the membrane preload fully describe it. Reset is by threshold
// subtraction.
struct spiking_layer {
    double thresh = 1.0;
    int horizon = 10;
    double initial_charge_frac = 0.5; // membrane preload as a fraction of thresh

    void validate() const {
        if (!(thresh > 0.0)) throw config_error("spiking_layer: thresh must be positive");
        if (horizon < 1) throw config_error("spiking_layer: horizon must be >= 1");
        if (initial_charge_frac < 0.0 || initial_charge_frac >= 1.0) {
            throw config_error("spiking_layer: initial_charge_frac must be in [0,1)");
        }
    }
};

// Quantized clip-floor activation: lambda * clip(floor(z*L/lambda + phi)/L, 0, 1).
struct quant_act_params {
    double lambda = 1.0;
    int levels = 10;
    double shift_phi = 0.5;

    void validate() const {
        if (!(lambda > 0.0)) throw config_error("quant_act_params: lambda must be positive");
        if (levels < 1) throw config_error("quant_act_params: levels must be >= 1");
    }
};

// Rescales the whole tensor to mean 0 and std thresh (global moments), the
// range the IF layer can express. A constant input has no scale to preserve
// and comes back as all zeros; *degenerate reports that case when non-null.
template <class T>
tensor<T> regularize(const tensor<T>& x, double thresh, bool* degenerate = nullptr) {
    if (x.size() < 2) throw config_error("regularize: need at least 2 elements");
    if (!(thresh > 0.0)) throw config_error("regularize: thresh must be positive");

    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = static_cast<double>(x[i]);
        sum += v;
        sum_sq += v * v;
    }
    const double m = static_cast<double>(x.size());
    const double mean = sum / m;
    double var = sum_sq / m - mean * mean;
    if (var < 0.0) var = 0.0;
    const double sigma = std::sqrt(var);
    if (degenerate) *degenerate = sigma == 0.0;

    const double scale = thresh / (sigma + 1e-8);
    tensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = static_cast<T>((static_cast<double>(x[i]) - mean) * scale);
    }
    ensure_finite(out, "regularize");
    return out;
}

template <class T>
tensor<T> quantized_relu(const tensor<T>& z, const quant_act_params& q) {
    q.validate();
    const double levels = static_cast<double>(q.levels);
    tensor<T> out(z.shape());
    for (std::size_t i = 0; i < z.size(); ++i) {
        double v = std::floor(static_cast<double>(z[i]) * levels / q.lambda + q.shift_phi);
        if (v < 0.0) v = 0.0;
        if (v > levels) v = levels;
        out[i] = static_cast<T>(q.lambda * v / levels);
    }
    ensure_finite(out, "quantized_relu");
    return out;
}

// Pass-through mask for the quantized activation's unclipped band. Only used
// when the quantized form is placed on the training path (quant_in_loss); the
// staircase itself has zero derivative almost everywhere.
template <class T>
tensor<T> quantized_relu_backward(const tensor<T>& z, const quant_act_params& q,
                                  const tensor<T>& grad_out) {
    q.validate();
    const double levels = static_cast<double>(q.levels);
    tensor<T> g(z.shape());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double v = std::floor(static_cast<double>(z[i]) * levels / q.lambda + q.shift_phi);
        g[i] = (v > 0.0 && v < levels) ? grad_out[i] : T(0);
    }
    return g;
}

template <class T>
struct spike_result {
    tensor<T> spikes;     // T x N x C x H x W, values in {0,1}
    tensor<T> v_initial;  // N x C x H x W membrane at t=0
    tensor<T> v_final;    // membrane after the last step
};

// Integrate-and-fire rollout. Drive is either a full spike-train-shaped
// T x N x C x H x W tensor (one slice per step) or an N x C x H x W tensor
// replicated at every step. No gradient exists through this op: the layer is
// a black box by construction.
template <class T>
spike_result<T> if_forward(const tensor<T>& drive, const spiking_layer& layer) {
    layer.validate();
    const std::size_t t_steps = static_cast<std::size_t>(layer.horizon);
    bool constant_drive;
    std::vector<std::size_t> frame_shape;
    if (drive.rank() == 5) {
        if (drive.dim(0) != t_steps) {
            throw config_error("if_forward: drive has " + std::to_string(drive.dim(0)) +
                               " steps but layer horizon is " + std::to_string(t_steps));
        }
        constant_drive = false;
        frame_shape = {drive.dim(1), drive.dim(2), drive.dim(3), drive.dim(4)};
    } else if (drive.rank() == 4) {
        constant_drive = true;
        frame_shape = drive.shape();
    } else {
        throw config_error("if_forward: drive must be 4-D (constant) or 5-D (per-step), got rank " +
                           std::to_string(drive.rank()));
    }
    ensure_finite(drive, "if_forward(drive)");

    const std::size_t frame = tensor<T>::count(frame_shape);
    spike_result<T> res;
    res.spikes = tensor<T>({t_steps, frame_shape[0], frame_shape[1], frame_shape[2], frame_shape[3]});
    res.v_initial = tensor<T>(frame_shape,
                              static_cast<T>(layer.initial_charge_frac * layer.thresh));
    res.v_final = res.v_initial;

    const T thresh = static_cast<T>(layer.thresh);
    T* v = res.v_final.data();
    for (std::size_t t = 0; t < t_steps; ++t) {
        const T* d = constant_drive ? drive.data() : drive.data() + t * frame;
        T* s = res.spikes.data() + t * frame;
        for (std::size_t i = 0; i < frame; ++i) {
            v[i] += d[i];
            if (v[i] >= thresh) {
                s[i] = T(1);
                v[i] -= thresh;
            } else {
                s[i] = T(0);
            }
        }
    }
    return res;
}

// Residual membrane change v(T) - v(0); the information the rate code
// failed to emit. Reported per element; see mean_abs for the per-layer statistic.
template <class T>
tensor<T> conversion_error(const tensor<T>& v_final, const tensor<T>& v_initial) {
    if (!v_final.same_shape(v_initial)) {
        throw config_error("conversion_error: shape mismatch " + v_final.shape_str() + " vs " +
                           v_initial.shape_str());
    }
    tensor<T> out(v_final.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = v_final[i] - v_initial[i];
    return out;
}

template <class T>
double mean_abs(const tensor<T>& t) {
    if (t.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) s += std::abs(static_cast<double>(t[i]));
    return s / static_cast<double>(t.size());
}

// Spike-count decoding back to the activation scale: (sum_t spikes) * lambda / T.
template <class T>
tensor<T> rate_decode(const tensor<T>& spikes, double lambda) {
    if (spikes.rank() != 5) {
        throw config_error("rate_decode: expected T x N x C x H x W spikes, got rank " +
                           std::to_string(spikes.rank()));
    }
    const std::size_t t_steps = spikes.dim(0);
    const std::size_t frame = spikes.size() / t_steps;
    tensor<T> out({spikes.dim(1), spikes.dim(2), spikes.dim(3), spikes.dim(4)});
    for (std::size_t t = 0; t < t_steps; ++t) {
        const T* s = spikes.data() + t * frame;
        for (std::size_t i = 0; i < frame; ++i) out[i] += s[i];
    }
    const T lam = static_cast<T>(lambda);
    for (std::size_t i = 0; i < frame; ++i) {
        out[i] = static_cast<T>(lam * out[i] / static_cast<T>(t_steps));
    }
    return out;
}

// Mean firing rate of a spike train; the statistic the energy model consumes.
template <class T>
double spike_rate(const tensor<T>& spikes) {
    if (spikes.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < spikes.size(); ++i) s += static_cast<double>(spikes[i]);
    return s / static_cast<double>(spikes.size());
}

} // namespace ffgaf
