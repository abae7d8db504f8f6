#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ffgaf/common.hpp"
#include "ffgaf/parallel.hpp"
#include "ffgaf/tensor.hpp"

namespace ffgaf {

// ---------------------------------------------------------------------------
// Parameter containers
// ---------------------------------------------------------------------------

// Channel-weighted convolution: out[j] = channel_weight[j] * (x (*) kernels[j]) + bias[j].
template <class T>
struct conv_params {
    tensor<T> kernels;              // C_out x C_in x k x k
    std::vector<T> bias;            // C_out
    std::vector<T> channel_weight;  // C_out, all-ones at init so the weight starts as identity
    int stride = 1;
    int padding = 0;

    std::size_t out_channels() const { return kernels.dim(0); }
    std::size_t in_channels() const { return kernels.dim(1); }
    std::size_t kernel() const { return kernels.dim(2); }
};

enum class norm_mode { batch, temporal };

// Per-channel standardization with learnable affine. batch mode reduces over
// (N,H,W) of a 4-D tensor, temporal mode over (T,N,H,W) of a 5-D tensor.
template <class T>
struct norm_params {
    std::vector<T> gamma;
    std::vector<T> beta;
    std::vector<T> running_mean;
    std::vector<T> running_var;
    T momentum = T(0.1);
    T epsilon = T(1e-5);
    norm_mode mode = norm_mode::batch;

    std::size_t channels() const { return gamma.size(); }
};

template <class T>
conv_params<T> make_conv_params(std::size_t c_out, std::size_t c_in, std::size_t k,
                                int stride, int padding) {
    conv_params<T> p;
    p.kernels = tensor<T>({c_out, c_in, k, k});
    p.bias.assign(c_out, T(0));
    p.channel_weight.assign(c_out, T(1));
    p.stride = stride;
    p.padding = padding;
    return p;
}

template <class T>
norm_params<T> make_norm_params(std::size_t channels, norm_mode mode, T gamma0 = T(1)) {
    norm_params<T> p;
    p.gamma.assign(channels, gamma0);
    p.beta.assign(channels, T(0));
    p.running_mean.assign(channels, T(0));
    p.running_var.assign(channels, T(1));
    p.mode = mode;
    return p;
}

inline std::size_t conv_out_extent(std::size_t in, std::size_t k, int stride, int padding) {
    return (in + 2 * static_cast<std::size_t>(padding) - k) / static_cast<std::size_t>(stride) + 1;
}

// ---------------------------------------------------------------------------
// conv2d
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
void check_conv_shapes(const tensor<T>& x, const conv_params<T>& p) {
    if (x.rank() != 4) {
        throw config_error("conv2d: expected 4-D input N x C x H x W, got rank " +
                           std::to_string(x.rank()));
    }
    if (x.dim(1) != p.in_channels()) {
        throw config_error("conv2d: input channel dim " + std::to_string(x.dim(1)) +
                           " does not match kernel C_in " + std::to_string(p.in_channels()));
    }
    const std::size_t k = p.kernel();
    if (k < 1 || p.stride < 1 || p.padding < 0) {
        throw config_error("conv2d: invalid kernel/stride/padding");
    }
    if (x.dim(2) + 2 * static_cast<std::size_t>(p.padding) < k ||
        x.dim(3) + 2 * static_cast<std::size_t>(p.padding) < k) {
        throw config_error("conv2d: spatial dims " + std::to_string(x.dim(2)) + "x" +
                           std::to_string(x.dim(3)) + " too small for kernel " +
                           std::to_string(k) + " with padding " + std::to_string(p.padding));
    }
}

// Valid output range [lo, hi) for one spatial axis and kernel offset kf:
// indices o with 0 <= o*stride + kf - padding < in.
inline void valid_out_range(std::size_t in, std::size_t out, int stride, int padding, int kf,
                            std::size_t& lo, std::size_t& hi) {
    int lo_i = padding - kf;
    lo_i = lo_i <= 0 ? 0 : (lo_i + stride - 1) / stride;
    int hi_i = (static_cast<int>(in) - 1 - kf + padding) / stride + 1;
    if (hi_i > static_cast<int>(out)) hi_i = static_cast<int>(out);
    if (hi_i < lo_i) hi_i = lo_i;
    lo = static_cast<std::size_t>(lo_i);
    hi = static_cast<std::size_t>(hi_i);
}

// Spike trains are {0,1}-valued and mostly zero; those convolutions skip the
// multiply entirely. Returns false for anything that is not strictly binary.
template <class T>
bool is_binary_sparse(const tensor<T>& x) {
    std::size_t nonzero = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T v = x[i];
        if (v == T(0)) continue;
        if (v != T(1)) return false;
        ++nonzero;
    }
    return nonzero * 4 <= x.size() * 3;
}

// Flat offsets of nonzero entries of sample n, grouped per sample.
template <class T>
std::vector<std::vector<std::uint32_t>> nonzero_offsets_per_sample(const tensor<T>& x) {
    const std::size_t n_samples = x.dim(0);
    const std::size_t per = x.size() / n_samples;
    std::vector<std::vector<std::uint32_t>> out(n_samples);
    for (std::size_t n = 0; n < n_samples; ++n) {
        const T* base = x.data() + n * per;
        for (std::size_t i = 0; i < per; ++i) {
            if (base[i] != T(0)) out[n].push_back(static_cast<std::uint32_t>(i));
        }
    }
    return out;
}

// Kernel taps reaching a valid output index from one input position along one
// axis: (tap offset within the kernel, output index).
struct tap {
    std::uint16_t k;
    std::uint16_t o;
};

inline std::vector<std::vector<tap>> tap_table(std::size_t in, std::size_t out, std::size_t k,
                                               int stride, int pad) {
    std::vector<std::vector<tap>> taps(in);
    for (std::size_t i = 0; i < in; ++i) {
        for (std::size_t kf = 0; kf < k; ++kf) {
            const int o_num = static_cast<int>(i) + pad - static_cast<int>(kf);
            if (o_num < 0 || o_num % stride) continue;
            const std::size_t o = static_cast<std::size_t>(o_num / stride);
            if (o >= out) continue;
            taps[i].push_back({static_cast<std::uint16_t>(kf), static_cast<std::uint16_t>(o)});
        }
    }
    return taps;
}

// Kernels rearranged as [c_in][kh][kw][c_out] so the hot j-loop of the
// spike-driven paths runs over contiguous memory.
template <class T>
std::vector<T> kernels_j_inner(const conv_params<T>& p) {
    const std::size_t c_out = p.out_channels(), c_in = p.in_channels(), k = p.kernel();
    std::vector<T> kt(c_in * k * k * c_out);
    for (std::size_t j = 0; j < c_out; ++j) {
        for (std::size_t c = 0; c < c_in; ++c) {
            for (std::size_t kh = 0; kh < k; ++kh) {
                for (std::size_t kw = 0; kw < k; ++kw) {
                    kt[((c * k + kh) * k + kw) * c_out + j] =
                        p.kernels[((j * c_in + c) * k + kh) * k + kw];
                }
            }
        }
    }
    return kt;
}

} // namespace detail

// Forward convolution. raw_out, when given, receives the pre-weight/pre-bias
// accumulation (needed by the channel-weight gradient).
template <class T>
tensor<T> conv2d(const tensor<T>& x, const conv_params<T>& p, tensor<T>* raw_out = nullptr) {
    detail::check_conv_shapes(x, p);
    const std::size_t n_batch = x.dim(0), c_in = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t c_out = p.out_channels(), k = p.kernel();
    const int stride = p.stride, pad = p.padding;
    const std::size_t oh = conv_out_extent(h, k, stride, pad);
    const std::size_t ow = conv_out_extent(w, k, stride, pad);

    tensor<T> raw({n_batch, c_out, oh, ow});
    const bool binary = detail::is_binary_sparse(x);

    std::vector<T> kt;
    std::vector<std::vector<detail::tap>> row_taps, col_taps;
    if (binary) {
        kt = detail::kernels_j_inner(p);
        row_taps = detail::tap_table(h, oh, k, stride, pad);
        col_taps = detail::tap_table(w, ow, k, stride, pad);
    }

    parallel_for(n_batch, [&](std::size_t n) {
        const T* xs = x.data() + n * c_in * h * w;
        T* rs = raw.data() + n * c_out * oh * ow;
        if (binary) {
            // Accumulate in [oh][ow][j] order so each active spike turns into
            // a handful of contiguous length-c_out vector adds.
            std::vector<T> acc(oh * ow * c_out, T(0));
            for (std::size_t c = 0; c < c_in; ++c) {
                const T* xc = xs + c * h * w;
                const T* ktc = kt.data() + c * k * k * c_out;
                for (std::size_t ih = 0; ih < h; ++ih) {
                    const auto& rt = row_taps[ih];
                    if (rt.empty()) continue;
                    for (std::size_t iw = 0; iw < w; ++iw) {
                        if (xc[ih * w + iw] == T(0)) continue;
                        const auto& ct = col_taps[iw];
                        for (const auto& r : rt) {
                            for (const auto& cc : ct) {
                                const T* src = ktc + (r.k * k + cc.k) * c_out;
                                T* dst = acc.data() + (r.o * ow + cc.o) * c_out;
                                for (std::size_t j = 0; j < c_out; ++j) dst[j] += src[j];
                            }
                        }
                    }
                }
            }
            for (std::size_t o = 0; o < oh * ow; ++o) {
                for (std::size_t j = 0; j < c_out; ++j) {
                    rs[j * oh * ow + o] = acc[o * c_out + j];
                }
            }
        } else {
            for (std::size_t j = 0; j < c_out; ++j) {
                T* rj = rs + j * oh * ow;
                for (std::size_t c = 0; c < c_in; ++c) {
                    const T* xc = xs + c * h * w;
                    const T* kj = p.kernels.data() + (j * c_in + c) * k * k;
                    for (std::size_t kh = 0; kh < k; ++kh) {
                        std::size_t oh_lo, oh_hi;
                        detail::valid_out_range(h, oh, stride, pad, static_cast<int>(kh), oh_lo, oh_hi);
                        for (std::size_t kw = 0; kw < k; ++kw) {
                            const T kv = kj[kh * k + kw];
                            if (kv == T(0)) continue;
                            std::size_t ow_lo, ow_hi;
                            detail::valid_out_range(w, ow, stride, pad, static_cast<int>(kw), ow_lo, ow_hi);
                            for (std::size_t o_h = oh_lo; o_h < oh_hi; ++o_h) {
                                const std::size_t ih = o_h * stride + kh - pad;
                                const T* xr = xc + ih * w;
                                T* rr = rj + o_h * ow;
                                for (std::size_t o_w = ow_lo; o_w < ow_hi; ++o_w) {
                                    rr[o_w] += kv * xr[o_w * stride + kw - pad];
                                }
                            }
                        }
                    }
                }
            }
        }
    });

    tensor<T> out({n_batch, c_out, oh, ow});
    parallel_for(n_batch, [&](std::size_t n) {
        for (std::size_t j = 0; j < c_out; ++j) {
            const T wj = p.channel_weight[j], bj = p.bias[j];
            const T* rj = raw.data() + (n * c_out + j) * oh * ow;
            T* oj = out.data() + (n * c_out + j) * oh * ow;
            for (std::size_t i = 0; i < oh * ow; ++i) oj[i] = wj * rj[i] + bj;
        }
    });

    ensure_finite(out, "conv2d");
    if (raw_out) *raw_out = std::move(raw);
    return out;
}

template <class T>
struct conv_grads {
    tensor<T> x;  // populated only when requested
    tensor<T> kernels;
    std::vector<T> bias;
    std::vector<T> channel_weight;
};

// Gradients of a scalar loss w.r.t. conv2d inputs given grad_out = dL/d(out).
// raw is the cached pre-weight accumulation from the forward pass; it is
// recomputed when absent. grad_x is skipped unless want_grad_x: block-local
// training never propagates into a block's (detached) input.
template <class T>
conv_grads<T> conv2d_backward(const tensor<T>& x, const conv_params<T>& p,
                              const tensor<T>& grad_out, const tensor<T>* raw = nullptr,
                              bool want_grad_x = false) {
    detail::check_conv_shapes(x, p);
    const std::size_t n_batch = x.dim(0), c_in = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t c_out = p.out_channels(), k = p.kernel();
    const int stride = p.stride, pad = p.padding;
    const std::size_t oh = conv_out_extent(h, k, stride, pad);
    const std::size_t ow = conv_out_extent(w, k, stride, pad);
    if (grad_out.rank() != 4 || grad_out.dim(0) != n_batch || grad_out.dim(1) != c_out ||
        grad_out.dim(2) != oh || grad_out.dim(3) != ow) {
        throw config_error("conv2d_backward: grad_out shape " + grad_out.shape_str() +
                           " does not match forward output");
    }

    tensor<T> raw_local;
    if (!raw) {
        conv2d(x, p, &raw_local);
        raw = &raw_local;
    }

    conv_grads<T> g;
    g.kernels = tensor<T>({c_out, c_in, k, k});
    g.bias.assign(c_out, T(0));
    g.channel_weight.assign(c_out, T(0));

    const bool binary = detail::is_binary_sparse(x);

    // Bias and channel-weight gradients: one dense pass, channels independent.
    parallel_for(c_out, [&](std::size_t j) {
        T gb = T(0), gw = T(0);
        for (std::size_t n = 0; n < n_batch; ++n) {
            const T* go = grad_out.data() + (n * c_out + j) * oh * ow;
            const T* rj = raw->data() + (n * c_out + j) * oh * ow;
            for (std::size_t i = 0; i < oh * ow; ++i) {
                gb += go[i];
                gw += go[i] * rj[i];
            }
        }
        g.bias[j] = gb;
        g.channel_weight[j] = gw;
    });

    if (binary) {
        // Spike-driven path: every active input contributes grad_out rows into
        // the kernel gradient. Work is chunked over samples; chunk partials
        // are reduced in a fixed order.
        const auto nz = detail::nonzero_offsets_per_sample(x);
        const auto row_taps = detail::tap_table(h, oh, k, stride, pad);
        const auto col_taps = detail::tap_table(w, ow, k, stride, pad);
        const std::size_t chunks =
            std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n_batch);
        std::vector<std::vector<T>> partial(chunks,
                                            std::vector<T>(c_in * k * k * c_out, T(0)));
        parallel_for(chunks, [&](std::size_t chunk) {
            std::vector<T>& gkt = partial[chunk];
            std::vector<T> gt(oh * ow * c_out);
            const std::size_t lo = n_batch * chunk / chunks;
            const std::size_t hi = n_batch * (chunk + 1) / chunks;
            for (std::size_t n = lo; n < hi; ++n) {
                const T* go = grad_out.data() + n * c_out * oh * ow;
                for (std::size_t j = 0; j < c_out; ++j) {
                    for (std::size_t o = 0; o < oh * ow; ++o) {
                        gt[o * c_out + j] = go[j * oh * ow + o];
                    }
                }
                for (std::uint32_t off : nz[n]) {
                    const std::size_t c = off / (h * w);
                    const std::size_t ih = (off / w) % h;
                    const std::size_t iw = off % w;
                    T* gkc = gkt.data() + c * k * k * c_out;
                    for (const auto& r : row_taps[ih]) {
                        for (const auto& cc : col_taps[iw]) {
                            const T* src = gt.data() + (r.o * ow + cc.o) * c_out;
                            T* dst = gkc + (r.k * k + cc.k) * c_out;
                            for (std::size_t j = 0; j < c_out; ++j) dst[j] += src[j];
                        }
                    }
                }
            }
        });
        for (std::size_t j = 0; j < c_out; ++j) {
            const T wj = p.channel_weight[j];
            for (std::size_t c = 0; c < c_in; ++c) {
                for (std::size_t kk = 0; kk < k * k; ++kk) {
                    T acc = T(0);
                    for (std::size_t chunk = 0; chunk < chunks; ++chunk) {
                        acc += partial[chunk][(c * k * k + kk) * c_out + j];
                    }
                    g.kernels[(j * c_in + c) * k * k + kk] = wj * acc;
                }
            }
        }
    } else {
        parallel_for(c_out, [&](std::size_t j) {
            const T wj = p.channel_weight[j];
            T* gk = g.kernels.data() + j * c_in * k * k;
            for (std::size_t n = 0; n < n_batch; ++n) {
                const T* go = grad_out.data() + (n * c_out + j) * oh * ow;
                const T* xs = x.data() + n * c_in * h * w;
                for (std::size_t c = 0; c < c_in; ++c) {
                    const T* xc = xs + c * h * w;
                    T* gkc = gk + c * k * k;
                    for (std::size_t kh = 0; kh < k; ++kh) {
                        std::size_t oh_lo, oh_hi;
                        detail::valid_out_range(h, oh, stride, pad, static_cast<int>(kh), oh_lo, oh_hi);
                        for (std::size_t kw = 0; kw < k; ++kw) {
                            std::size_t ow_lo, ow_hi;
                            detail::valid_out_range(w, ow, stride, pad, static_cast<int>(kw), ow_lo, ow_hi);
                            T acc = T(0);
                            for (std::size_t o_h = oh_lo; o_h < oh_hi; ++o_h) {
                                const std::size_t ih = o_h * stride + kh - pad;
                                const T* xr = xc + ih * w;
                                const T* gr = go + o_h * ow;
                                for (std::size_t o_w = ow_lo; o_w < ow_hi; ++o_w) {
                                    acc += gr[o_w] * xr[o_w * stride + kw - pad];
                                }
                            }
                            gkc[kh * k + kw] += acc;
                        }
                    }
                }
            }
            for (std::size_t i = 0; i < c_in * k * k; ++i) gk[i] *= wj;
        });
    }

    if (want_grad_x) {
        g.x = tensor<T>({n_batch, c_in, h, w});
        parallel_for(n_batch, [&](std::size_t n) {
            T* gx = g.x.data() + n * c_in * h * w;
            for (std::size_t j = 0; j < c_out; ++j) {
                const T wj = p.channel_weight[j];
                const T* go = grad_out.data() + (n * c_out + j) * oh * ow;
                for (std::size_t c = 0; c < c_in; ++c) {
                    const T* kj = p.kernels.data() + (j * c_in + c) * k * k;
                    T* gxc = gx + c * h * w;
                    for (std::size_t kh = 0; kh < k; ++kh) {
                        std::size_t oh_lo, oh_hi;
                        detail::valid_out_range(h, oh, stride, pad, static_cast<int>(kh), oh_lo, oh_hi);
                        for (std::size_t kw = 0; kw < k; ++kw) {
                            const T kv = wj * kj[kh * k + kw];
                            if (kv == T(0)) continue;
                            std::size_t ow_lo, ow_hi;
                            detail::valid_out_range(w, ow, stride, pad, static_cast<int>(kw), ow_lo, ow_hi);
                            for (std::size_t o_h = oh_lo; o_h < oh_hi; ++o_h) {
                                const std::size_t ih = o_h * stride + kh - pad;
                                T* gxr = gxc + ih * w;
                                const T* gr = go + o_h * ow;
                                for (std::size_t o_w = ow_lo; o_w < ow_hi; ++o_w) {
                                    gxr[o_w * stride + kw - pad] += kv * gr[o_w];
                                }
                            }
                        }
                    }
                }
            }
        });
        ensure_finite(g.x, "conv2d_backward.x");
    }

    ensure_finite(g.kernels, "conv2d_backward.kernels");
    return g;
}

// ---------------------------------------------------------------------------
// normalize
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
void check_norm_shapes(const tensor<T>& x, const norm_params<T>& p) {
    const std::size_t want_rank = p.mode == norm_mode::batch ? 4 : 5;
    if (x.rank() != want_rank) {
        throw config_error("normalize: expected rank " + std::to_string(want_rank) +
                           " for this mode, got " + std::to_string(x.rank()));
    }
    if (x.dim(x.rank() - 3) != p.channels()) {
        throw config_error("normalize: channel dim " + std::to_string(x.dim(x.rank() - 3)) +
                           " does not match " + std::to_string(p.channels()) + " params");
    }
}

// Views a 4-D or 5-D tensor as outer x C x spatial with the channel axis at
// rank-3; both norm modes then share one reduction.
template <class T>
void norm_extents(const tensor<T>& x, std::size_t& outer, std::size_t& channels,
                  std::size_t& spatial) {
    const std::size_t r = x.rank();
    channels = x.dim(r - 3);
    spatial = x.dim(r - 2) * x.dim(r - 1);
    outer = 1;
    for (std::size_t i = 0; i + 3 < r; ++i) outer *= x.dim(i);
}

template <class T>
void channel_moments(const tensor<T>& x, std::size_t outer, std::size_t channels,
                     std::size_t spatial, std::size_t c, double& mean, double& var) {
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t o = 0; o < outer; ++o) {
        const T* base = x.data() + (o * channels + c) * spatial;
        for (std::size_t s = 0; s < spatial; ++s) {
            const double v = static_cast<double>(base[s]);
            sum += v;
            sum_sq += v * v;
        }
    }
    const double m = static_cast<double>(outer * spatial);
    mean = sum / m;
    var = sum_sq / m - mean * mean;
    if (var < 0.0) var = 0.0;
}

} // namespace detail

// Forward normalization. Training mode standardizes with current batch
// statistics and folds them into the running estimates; inference mode uses
// the running estimates untouched.
template <class T>
tensor<T> normalize(const tensor<T>& x, norm_params<T>& p, bool training) {
    detail::check_norm_shapes(x, p);
    std::size_t outer, channels, spatial;
    detail::norm_extents(x, outer, channels, spatial);

    tensor<T> out(x.shape());
    std::vector<double> means(channels), vars(channels);
    parallel_for(channels, [&](std::size_t c) {
        double mean, var;
        if (training) {
            detail::channel_moments(x, outer, channels, spatial, c, mean, var);
        } else {
            mean = static_cast<double>(p.running_mean[c]);
            var = static_cast<double>(p.running_var[c]);
        }
        means[c] = mean;
        vars[c] = var;
        const double inv = 1.0 / std::sqrt(var + static_cast<double>(p.epsilon));
        const double g = static_cast<double>(p.gamma[c]);
        const double b = static_cast<double>(p.beta[c]);
        for (std::size_t o = 0; o < outer; ++o) {
            const T* src = x.data() + (o * channels + c) * spatial;
            T* dst = out.data() + (o * channels + c) * spatial;
            for (std::size_t s = 0; s < spatial; ++s) {
                dst[s] = static_cast<T>(g * ((static_cast<double>(src[s]) - mean) * inv) + b);
            }
        }
    });

    if (training) {
        const T mom = p.momentum;
        for (std::size_t c = 0; c < channels; ++c) {
            p.running_mean[c] = (T(1) - mom) * p.running_mean[c] + mom * static_cast<T>(means[c]);
            p.running_var[c] = (T(1) - mom) * p.running_var[c] + mom * static_cast<T>(vars[c]);
        }
    }

    ensure_finite(out, "normalize");
    return out;
}

template <class T>
struct norm_grads {
    tensor<T> x;
    std::vector<T> gamma;
    std::vector<T> beta;
};

// Backward through training-mode normalization (batch statistics recomputed
// from x, so no cache is required).
template <class T>
norm_grads<T> normalize_backward(const tensor<T>& x, const norm_params<T>& p,
                                 const tensor<T>& grad_out) {
    detail::check_norm_shapes(x, p);
    if (!grad_out.same_shape(x)) {
        throw config_error("normalize_backward: grad_out shape " + grad_out.shape_str() +
                           " does not match input " + x.shape_str());
    }
    std::size_t outer, channels, spatial;
    detail::norm_extents(x, outer, channels, spatial);

    norm_grads<T> g;
    g.x = tensor<T>(x.shape());
    g.gamma.assign(channels, T(0));
    g.beta.assign(channels, T(0));

    parallel_for(channels, [&](std::size_t c) {
        double mean, var;
        detail::channel_moments(x, outer, channels, spatial, c, mean, var);
        const double inv = 1.0 / std::sqrt(var + static_cast<double>(p.epsilon));
        const double m = static_cast<double>(outer * spatial);

        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t o = 0; o < outer; ++o) {
            const T* xs = x.data() + (o * channels + c) * spatial;
            const T* gs = grad_out.data() + (o * channels + c) * spatial;
            for (std::size_t s = 0; s < spatial; ++s) {
                const double xhat = (static_cast<double>(xs[s]) - mean) * inv;
                sum_g += static_cast<double>(gs[s]);
                sum_gx += static_cast<double>(gs[s]) * xhat;
            }
        }
        g.beta[c] = static_cast<T>(sum_g);
        g.gamma[c] = static_cast<T>(sum_gx);

        const double gamma_inv = static_cast<double>(p.gamma[c]) * inv;
        for (std::size_t o = 0; o < outer; ++o) {
            const T* xs = x.data() + (o * channels + c) * spatial;
            const T* gs = grad_out.data() + (o * channels + c) * spatial;
            T* dst = g.x.data() + (o * channels + c) * spatial;
            for (std::size_t s = 0; s < spatial; ++s) {
                const double xhat = (static_cast<double>(xs[s]) - mean) * inv;
                dst[s] = static_cast<T>(gamma_inv *
                                        (static_cast<double>(gs[s]) - sum_g / m - xhat * sum_gx / m));
            }
        }
    });

    ensure_finite(g.x, "normalize_backward");
    return g;
}

// ---------------------------------------------------------------------------
// relu
// ---------------------------------------------------------------------------

template <class T>
tensor<T> relu(const tensor<T>& x) {
    tensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
    ensure_finite(out, "relu");
    return out;
}

// Gradient at exactly 0 is 0 (fixed tie-break).
template <class T>
tensor<T> relu_backward(const tensor<T>& x, const tensor<T>& grad_out) {
    if (!grad_out.same_shape(x)) {
        throw config_error("relu_backward: grad_out shape " + grad_out.shape_str() +
                           " does not match input " + x.shape_str());
    }
    tensor<T> g(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] > T(0) ? grad_out[i] : T(0);
    return g;
}

} // namespace ffgaf
