#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ffgaf/common.hpp"
#include "ffgaf/rng.hpp"
#include "ffgaf/tensor.hpp"

namespace ffgaf {

// Raw file IO (src/data_io.cpp). Paths ending in .gz are inflated on read and
// deflated on write.
std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes_atomic(const std::string& path, const std::vector<std::uint8_t>& bytes);
void write_text_atomic(const std::string& path, const std::string& text);

template <class T>
struct dataset {
    tensor<T> images;  // N x C x H x W, values in [0,1] straight off disk
    std::vector<int> labels;
    std::string name;
    int num_classes = 0;
    std::string split;

    std::size_t size() const { return labels.size(); }
};

using dataset_f = dataset<float>;
using dataset_d = dataset<double>;

// ---------------------------------------------------------------------------
// IDX (MNIST / Fashion-MNIST)
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t off,
                          const std::string& what) {
    if (off + 4 > b.size()) throw data_error("idx: truncated file while reading " + what);
    return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
           (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

inline void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    b.push_back(static_cast<std::uint8_t>(v >> 24));
    b.push_back(static_cast<std::uint8_t>(v >> 16));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
    b.push_back(static_cast<std::uint8_t>(v));
}

} // namespace detail

// IDX pair loader. Pixels land in [0,1] (byte / 255), shapes 1 x rows x cols.
template <class T>
dataset<T> load_idx(const std::string& images_path, const std::string& labels_path) {
    const auto img = read_file_bytes(images_path);
    const auto lbl = read_file_bytes(labels_path);

    const std::uint32_t img_magic = detail::be32(img, 0, "image magic");
    if (img_magic != 0x00000803u) {
        throw data_error("idx: bad magic in " + images_path + " (expected 0x00000803)");
    }
    const std::uint32_t lbl_magic = detail::be32(lbl, 0, "label magic");
    if (lbl_magic != 0x00000801u) {
        throw data_error("idx: bad magic in " + labels_path + " (expected 0x00000801)");
    }

    const std::uint32_t n = detail::be32(img, 4, "image count");
    const std::uint32_t rows = detail::be32(img, 8, "rows");
    const std::uint32_t cols = detail::be32(img, 12, "cols");
    const std::uint32_t n_lbl = detail::be32(lbl, 4, "label count");
    if (n != n_lbl) {
        throw data_error("idx: image count " + std::to_string(n) + " does not match label count " +
                         std::to_string(n_lbl));
    }
    if (n == 0) throw data_error("idx: empty dataset in " + images_path);
    const std::size_t pixels = std::size_t(n) * rows * cols;
    if (img.size() < 16 + pixels) throw data_error("idx: truncated image payload in " + images_path);
    if (lbl.size() < 8 + n) throw data_error("idx: truncated label payload in " + labels_path);

    dataset<T> d;
    d.images = tensor<T>({n, 1, rows, cols});
    for (std::size_t i = 0; i < pixels; ++i) {
        d.images[i] = static_cast<T>(img[16 + i]) / T(255);
    }
    d.labels.resize(n);
    int max_label = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
        d.labels[i] = lbl[8 + i];
        max_label = std::max(max_label, d.labels[i]);
    }
    d.num_classes = max_label + 1;
    return d;
}

// Inverse fixture writer; bytes are round(clamp(x,0,1)*255).
template <class T>
void save_idx(const dataset<T>& d, const std::string& images_path, const std::string& labels_path) {
    std::vector<std::uint8_t> img, lbl;
    detail::put_be32(img, 0x00000803u);
    detail::put_be32(img, static_cast<std::uint32_t>(d.size()));
    detail::put_be32(img, static_cast<std::uint32_t>(d.images.dim(2)));
    detail::put_be32(img, static_cast<std::uint32_t>(d.images.dim(3)));
    for (std::size_t i = 0; i < d.images.size(); ++i) {
        double v = static_cast<double>(d.images[i]);
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        img.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
    }
    detail::put_be32(lbl, 0x00000801u);
    detail::put_be32(lbl, static_cast<std::uint32_t>(d.size()));
    for (int l : d.labels) lbl.push_back(static_cast<std::uint8_t>(l));
    write_file_bytes_atomic(images_path, img);
    write_file_bytes_atomic(labels_path, lbl);
}

// ---------------------------------------------------------------------------
// CIFAR-10 binary batches
// ---------------------------------------------------------------------------

template <class T>
dataset<T> load_cifar10(const std::vector<std::string>& batch_paths) {
    constexpr std::size_t record = 3073; // 1 label byte + 3x32x32 channel-planar pixels
    std::vector<std::uint8_t> all;
    for (const auto& p : batch_paths) {
        auto b = read_file_bytes(p);
        if (b.empty() || b.size() % record != 0) {
            throw data_error("cifar10: " + p + " length " + std::to_string(b.size()) +
                             " is not a positive multiple of 3073");
        }
        all.insert(all.end(), b.begin(), b.end());
    }
    const std::size_t n = all.size() / record;
    dataset<T> d;
    d.images = tensor<T>({n, 3, 32, 32});
    d.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t* rec = all.data() + i * record;
        d.labels[i] = rec[0];
        T* dst = d.images.data() + i * 3 * 32 * 32;
        for (std::size_t q = 0; q < 3072; ++q) dst[q] = static_cast<T>(rec[1 + q]) / T(255);
    }
    d.num_classes = 10;
    d.name = "cifar10";
    return d;
}

template <class T>
void save_cifar10(const dataset<T>& d, const std::string& path) {
    std::vector<std::uint8_t> out;
    const std::size_t per = d.images.size() / d.size();
    for (std::size_t i = 0; i < d.size(); ++i) {
        out.push_back(static_cast<std::uint8_t>(d.labels[i]));
        const T* src = d.images.data() + i * per;
        for (std::size_t q = 0; q < per; ++q) {
            double v = static_cast<double>(src[q]);
            v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
            out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
        }
    }
    write_file_bytes_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

struct channel_stats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

// Per-channel standardization. Stats come from this dataset unless a set is
// supplied (test splits reuse the train-split stats verbatim).
template <class T>
dataset<T> standardize(dataset<T> d, channel_stats* stats_out = nullptr,
                       const channel_stats* reuse = nullptr) {
    const std::size_t n = d.images.dim(0), c = d.images.dim(1);
    const std::size_t spatial = d.images.dim(2) * d.images.dim(3);
    channel_stats st;
    if (reuse) {
        st = *reuse;
        if (st.mean.size() != c) throw config_error("standardize: stats channel count mismatch");
    } else {
        st.mean.assign(c, 0.0);
        st.stddev.assign(c, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                const T* src = d.images.data() + (i * c + ch) * spatial;
                for (std::size_t s = 0; s < spatial; ++s) st.mean[ch] += static_cast<double>(src[s]);
            }
        }
        const double m = static_cast<double>(n * spatial);
        for (std::size_t ch = 0; ch < c; ++ch) st.mean[ch] /= m;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                const T* src = d.images.data() + (i * c + ch) * spatial;
                for (std::size_t s = 0; s < spatial; ++s) {
                    const double dlt = static_cast<double>(src[s]) - st.mean[ch];
                    st.stddev[ch] += dlt * dlt;
                }
            }
        }
        for (std::size_t ch = 0; ch < c; ++ch) st.stddev[ch] = std::sqrt(st.stddev[ch] / m);
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            T* dst = d.images.data() + (i * c + ch) * spatial;
            const double inv = 1.0 / (st.stddev[ch] + 1e-8);
            for (std::size_t s = 0; s < spatial; ++s) {
                dst[s] = static_cast<T>((static_cast<double>(dst[s]) - st.mean[ch]) * inv);
            }
        }
    }
    if (stats_out) *stats_out = st;
    return d;
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

enum class synth_preset { blobs, skewed };

// Gaussian-blob classes over disjoint pixel blocks. separation shrinks the
// cross-class leak and the noise floor; at separation -> inf class means are
// exactly orthogonal.
//
// The skewed preset makes classes 0 and 1 near-parallel (they share a strong
// band pattern) while the rest stay orthogonal. Goodness pools activations
// over space, so class identity must live in local patch statistics, never in
// position alone: every easy class carries its own strong stripe/checker
// texture on its own band, while the hard pair differs only in the signs of
// six weak texture components (stripes and checkers at two scales), each
// individually close to the per-component jitter floor. One goodness channel
// can lock onto roughly one component, so the pair's margin grows with the
// number of channels averaging it; that is the resource pressure the
// allocation-strategy ablation exercises.
template <class T>
dataset<T> synthetic_classes(int k, int per_class, std::size_t c, std::size_t h, std::size_t w,
                             double separation, std::uint64_t seed,
                             synth_preset preset = synth_preset::blobs) {
    if (k < 1) throw config_error("synthetic_classes: need k >= 1");
    const std::size_t dim = c * h * w;
    if (dim < static_cast<std::size_t>(k)) {
        throw config_error("synthetic_classes: need at least one pixel per class");
    }
    const std::size_t block = dim / static_cast<std::size_t>(k);

    const double amp = 0.85;
    const bool skewed = preset == synth_preset::skewed && k >= 2;
    const double leak = skewed ? 0.0 : amp / (1.0 + separation);
    const double noise_sd = amp * (skewed ? 0.08 : 0.5) / (1.0 + 0.5 * separation);

    std::vector<std::vector<double>> patterns(k, std::vector<double>(dim, leak));
    for (int cls = 0; cls < k; ++cls) {
        const std::size_t lo = static_cast<std::size_t>(cls) * block;
        const std::size_t hi = cls == k - 1 ? dim : lo + block;
        for (std::size_t i = lo; i < hi; ++i) {
            if (skewed && cls >= 2) {
                // Easy classes carry signatures far from each other and from
                // every pair tile: a dim flat band, then coarse diagonals of
                // doubling period. Identity lives in local statistics, never
                // in band position (spatial pooling is location-blind).
                const int e = cls - 2;
                if (e == 0) {
                    patterns[cls][i] = 0.35 * amp;
                } else {
                    const std::size_t row = (i / w) % h, col = i % w;
                    const std::size_t period = std::size_t(2) << e; // 4, 8, ...
                    patterns[cls][i] = (row + col) % period < period / 2 ? amp : 0.0;
                }
            } else {
                patterns[cls][i] = amp;
            }
        }
    }

    // +-1 texture components over the hard pair's shared region. The pair
    // differs only in the signs of these six weak components; each class
    // negates the other, so a lone goodness channel carries a noisy margin
    // and the pair's accuracy hinges on how many channels average it.
    auto texture = [](int comp, std::size_t row, std::size_t col) -> double {
        const double v2 = col % 2 ? -1.0 : 1.0;
        const double h2 = row % 2 ? -1.0 : 1.0;
        const double v4 = col % 4 < 2 ? 1.0 : -1.0;
        const double h4 = row % 4 < 2 ? 1.0 : -1.0;
        switch (comp) {
            case 0: return v2;
            case 1: return h2;
            case 2: return v2 * h2;
            case 3: return v4;
            case 4: return h4;
            default: return v4 * h4;
        }
    };
    const double tex_amp = 0.05 * amp; // per-component class signal
    const double tex_jitter = 0.9;     // per-sample amplitude noise, in signal units

    const std::size_t n = static_cast<std::size_t>(k) * per_class;
    dataset<T> d;
    d.images = tensor<T>({n, c, h, w});
    d.labels.resize(n);
    d.num_classes = k;
    d.name = skewed ? "synthetic-skewed" : "synthetic-blobs";

    rng gen(derive_seed(seed, 0xda7a));
    const std::size_t shared_end = skewed ? 2 * block : 0; // bands 0 and 1 together
    for (std::size_t i = 0; i < n; ++i) {
        const int cls = static_cast<int>(i % static_cast<std::size_t>(k));
        d.labels[i] = cls;
        const double scale = gen.uniform(0.75, 1.0);
        double comp_amp[6];
        if (skewed && cls < 2) {
            for (int t = 0; t < 6; ++t) {
                const double sign = (t % 2 == 0) == (cls == 0) ? 1.0 : -1.0;
                comp_amp[t] = tex_amp * (sign + gen.normal(0.0, tex_jitter));
            }
        }
        T* dst = d.images.data() + i * dim;
        for (std::size_t q = 0; q < dim; ++q) {
            double base;
            if (skewed && cls < 2) {
                if (q < shared_end) {
                    const std::size_t row = q / w, col = q % w;
                    base = 0.55 * amp;
                    for (int t = 0; t < 6; ++t) base += comp_amp[t] * texture(t, row, col);
                } else {
                    base = 0.0;
                }
            } else {
                base = patterns[cls][q];
            }
            double v = scale * base + gen.normal(0.0, noise_sd);
            v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
            dst[q] = static_cast<T>(v);
        }
    }
    return d;
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

// Index plan for one epoch: full coverage, last partial batch kept, shuffle
// order fixed by (seed, epoch).
inline std::vector<std::vector<int>> batch_plan(std::size_t n, std::size_t batch_size, bool shuffle,
                                                std::uint64_t seed, std::uint64_t epoch) {
    if (batch_size == 0) throw config_error("batch_plan: batch_size must be positive");
    std::vector<int> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
    if (shuffle) {
        rng gen(derive_seed(seed, 0xba7c ^ mix_seed(epoch)));
        gen.shuffle(order);
    }
    std::vector<std::vector<int>> plan;
    for (std::size_t at = 0; at < n; at += batch_size) {
        const std::size_t end = std::min(n, at + batch_size);
        plan.emplace_back(order.begin() + at, order.begin() + end);
    }
    return plan;
}

template <class T>
struct batch {
    tensor<T> images;
    std::vector<int> labels;
    std::vector<int> indices;
};

template <class T>
batch<T> take(const dataset<T>& d, const std::vector<int>& indices) {
    const std::size_t per = d.images.size() / d.images.dim(0);
    batch<T> b;
    b.images = tensor<T>({indices.size(), d.images.dim(1), d.images.dim(2), d.images.dim(3)});
    b.labels.reserve(indices.size());
    b.indices = indices;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const std::size_t src = static_cast<std::size_t>(indices[i]);
        std::copy(d.images.data() + src * per, d.images.data() + (src + 1) * per,
                  b.images.data() + i * per);
        b.labels.push_back(d.labels[src]);
    }
    return b;
}

// Thin iterator over the plan, for callers that want a stream.
template <class T>
class batch_stream {
public:
    batch_stream(const dataset<T>& d, std::size_t batch_size, bool shuffle, std::uint64_t seed)
        : d_(&d), batch_size_(batch_size), shuffle_(shuffle), seed_(seed) {
        set_epoch(0);
    }

    void set_epoch(std::uint64_t epoch) {
        plan_ = batch_plan(d_->size(), batch_size_, shuffle_, seed_, epoch);
        next_ = 0;
    }

    std::optional<batch<T>> next() {
        if (next_ >= plan_.size()) return std::nullopt;
        return take(*d_, plan_[next_++]);
    }

private:
    const dataset<T>* d_;
    std::size_t batch_size_;
    bool shuffle_;
    std::uint64_t seed_;
    std::vector<std::vector<int>> plan_;
    std::size_t next_ = 0;
};

// First-n view used by subset experiments.
template <class T>
dataset<T> head(const dataset<T>& d, std::size_t n) {
    if (n >= d.size()) return d;
    dataset<T> out;
    const std::size_t per = d.images.size() / d.images.dim(0);
    out.images = tensor<T>({n, d.images.dim(1), d.images.dim(2), d.images.dim(3)});
    std::copy(d.images.data(), d.images.data() + n * per, out.images.data());
    out.labels.assign(d.labels.begin(), d.labels.begin() + n);
    out.name = d.name;
    out.num_classes = d.num_classes;
    out.split = d.split;
    return out;
}

} // namespace ffgaf
