#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "ffgaf/common.hpp"
#include "ffgaf/tensor.hpp"

namespace ffgaf {

enum class alloc_strategy { complexity_aware, uniform, worst_case };

inline const char* to_string(alloc_strategy s) {
    switch (s) {
        case alloc_strategy::complexity_aware: return "complexity_aware";
        case alloc_strategy::uniform: return "uniform";
        case alloc_strategy::worst_case: return "worst_case";
    }
    return "?";
}

inline alloc_strategy alloc_strategy_from_string(const std::string& s) {
    if (s == "complexity_aware") return alloc_strategy::complexity_aware;
    if (s == "uniform") return alloc_strategy::uniform;
    if (s == "worst_case") return alloc_strategy::worst_case;
    throw config_error("unknown allocation strategy '" + s + "'");
}

// Per-class channel budget for one layer. channels_per_class always sums to
// total and every class holds at least one channel (goodness over an empty
// channel set is undefined).
struct allocation {
    std::vector<int> channels_per_class;
    int total = 0;
    alloc_strategy strategy = alloc_strategy::complexity_aware;
    double phi = 2.0;

    int num_classes() const { return static_cast<int>(channels_per_class.size()); }

    // First channel index owned by class j.
    std::vector<int> offsets() const {
        std::vector<int> off(channels_per_class.size() + 1, 0);
        for (std::size_t j = 0; j < channels_per_class.size(); ++j) {
            off[j + 1] = off[j] + channels_per_class[j];
        }
        return off;
    }
};

// Row c = arithmetic mean of feature rows labeled c.
template <class T>
tensor<T> class_means(const tensor<T>& features, const std::vector<int>& labels, int k) {
    if (features.rank() != 2) {
        throw config_error("class_means: expected N x D features, got rank " +
                           std::to_string(features.rank()));
    }
    const std::size_t n = features.dim(0), d = features.dim(1);
    if (labels.size() != n) throw config_error("class_means: label count mismatch");

    tensor<T> means({static_cast<std::size_t>(k), d});
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const int c = labels[i];
        if (c < 0 || c >= k) {
            throw data_error("class_means: label " + std::to_string(c) + " outside [0," +
                             std::to_string(k) + ")");
        }
        ++counts[c];
        const T* src = features.data() + i * d;
        T* dst = means.data() + static_cast<std::size_t>(c) * d;
        for (std::size_t q = 0; q < d; ++q) dst[q] += src[q];
    }
    for (int c = 0; c < k; ++c) {
        if (counts[c] == 0) {
            throw data_error("class_means: class " + std::to_string(c) + " has no samples");
        }
        T* dst = means.data() + static_cast<std::size_t>(c) * d;
        for (std::size_t q = 0; q < d; ++q) dst[q] /= static_cast<T>(counts[c]);
    }
    return means;
}

// Pairwise cosine similarity of class means. A zero-norm row is declared
// similar to nothing (0 everywhere, including its own diagonal).
template <class T>
tensor<T> similarity_matrix(const tensor<T>& means) {
    if (means.rank() != 2 || means.dim(0) < 2) {
        throw config_error("similarity_matrix: expected K x D means with K >= 2");
    }
    const std::size_t k = means.dim(0), d = means.dim(1);
    std::vector<double> norms(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        double s = 0.0;
        const T* row = means.data() + c * d;
        for (std::size_t q = 0; q < d; ++q) s += static_cast<double>(row[q]) * row[q];
        norms[c] = std::sqrt(s);
    }
    tensor<T> sim({k, k});
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a; b < k; ++b) {
            double v = 0.0;
            if (norms[a] > 0.0 && norms[b] > 0.0) {
                const T* ra = means.data() + a * d;
                const T* rb = means.data() + b * d;
                double dot = 0.0;
                for (std::size_t q = 0; q < d; ++q) {
                    dot += static_cast<double>(ra[q]) * rb[q];
                }
                v = dot / (norms[a] * norms[b]);
            }
            sim.at(a, b) = static_cast<T>(v);
            sim.at(b, a) = static_cast<T>(v);
        }
    }
    ensure_finite(sim, "similarity_matrix");
    return sim;
}

// Row sums of the similarity matrix standardized to zero mean and unit
// population std. Degenerate (equal) row sums map to all zeros.
template <class T>
std::vector<T> normalized_complexity(const tensor<T>& sim) {
    if (sim.rank() != 2 || sim.dim(0) != sim.dim(1)) {
        throw config_error("normalized_complexity: expected square similarity matrix");
    }
    const std::size_t k = sim.dim(0);
    std::vector<double> sums(k, 0.0);
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) sums[a] += static_cast<double>(sim.at(a, b));
    }
    double mu = std::accumulate(sums.begin(), sums.end(), 0.0) / static_cast<double>(k);
    double var = 0.0;
    for (double s : sums) var += (s - mu) * (s - mu);
    var /= static_cast<double>(k);
    const double sigma = std::sqrt(var);

    std::vector<T> out(k, T(0));
    if (sigma > 0.0) {
        for (std::size_t a = 0; a < k; ++a) out[a] = static_cast<T>((sums[a] - mu) / sigma);
    }
    return out;
}

// The full similarity analysis of a labeled feature set, in one call.
template <class T>
struct similarity_report {
    tensor<T> class_means;       // K x D
    tensor<T> matrix;            // K x K
    std::vector<T> complexity;   // K
    std::vector<int> sample_counts;
};

template <class T>
similarity_report<T> analyze_features(const tensor<T>& features, const std::vector<int>& labels,
                                      int k) {
    similarity_report<T> rep;
    rep.class_means = class_means(features, labels, k);
    rep.matrix = similarity_matrix(rep.class_means);
    rep.complexity = normalized_complexity(rep.matrix);
    rep.sample_counts.assign(k, 0);
    for (int c : labels) ++rep.sample_counts[c];
    return rep;
}

namespace detail {

// Proportional shares floored, then leftovers handed out one each by
// descending fractional part (ties to the lower class index). Keeps the
// integer allocation as close as possible to the real-valued proportions.
inline std::vector<int> proportional_floor(const std::vector<double>& complexity, int total,
                                           double phi) {
    const std::size_t k = complexity.size();
    const double lo = *std::min_element(complexity.begin(), complexity.end());
    double denom = 0.0;
    for (double s : complexity) denom += s - lo + phi;
    if (!(denom > 0.0)) throw config_error("allocate: non-positive share denominator");

    std::vector<double> share(k), frac(k);
    std::vector<int> out(k);
    long long assigned = 0;
    for (std::size_t j = 0; j < k; ++j) {
        share[j] = (complexity[j] - lo + phi) / denom * static_cast<double>(total);
        double fl = std::floor(share[j]);
        out[j] = static_cast<int>(fl);
        frac[j] = share[j] - fl;
        assigned += out[j];
    }

    long long leftover = static_cast<long long>(total) - assigned;
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    std::size_t cursor = 0;
    while (leftover > 0) {
        ++out[order[cursor]];
        --leftover;
        cursor = (cursor + 1) % k;
    }
    return out;
}

// Post-hoc minimum of one channel per class, funded by the largest holder
// (ties broken toward lower complexity, then lower index, which preserves the
// monotonicity of counts in complexity).
inline void enforce_min_one(std::vector<int>& ch, const std::vector<double>& complexity) {
    for (std::size_t j = 0; j < ch.size(); ++j) {
        while (ch[j] < 1) {
            std::size_t donor = ch.size();
            for (std::size_t i = 0; i < ch.size(); ++i) {
                if (i == j || ch[i] <= 1) continue;
                if (donor == ch.size() || ch[i] > ch[donor] ||
                    (ch[i] == ch[donor] && complexity[i] < complexity[donor])) {
                    donor = i;
                }
            }
            if (donor == ch.size()) throw config_error("allocate: cannot fund minimum channel");
            --ch[donor];
            ++ch[j];
        }
    }
}

} // namespace detail

// Channel budget per class for one layer of C_total channels.
inline allocation allocate(const std::vector<double>& complexity, int total, double phi,
                           alloc_strategy strategy) {
    const int k = static_cast<int>(complexity.size());
    if (k < 1) throw config_error("allocate: no classes");
    if (total < k) {
        throw config_error("allocate: total " + std::to_string(total) +
                           " cannot give each of " + std::to_string(k) + " classes a channel");
    }

    allocation a;
    a.total = total;
    a.strategy = strategy;
    a.phi = phi;

    switch (strategy) {
        case alloc_strategy::uniform: {
            a.channels_per_class.assign(k, total / k);
            for (int j = 0; j < total % k; ++j) ++a.channels_per_class[j];
            break;
        }
        case alloc_strategy::complexity_aware: {
            if (!(phi > 0.0)) throw config_error("allocate: phi must be positive");
            a.channels_per_class = detail::proportional_floor(complexity, total, phi);
            detail::enforce_min_one(a.channels_per_class, complexity);
            break;
        }
        case alloc_strategy::worst_case: {
            if (!(phi > 0.0)) throw config_error("allocate: phi must be positive");
            std::vector<double> negated(complexity.size());
            for (std::size_t j = 0; j < complexity.size(); ++j) negated[j] = -complexity[j];
            a.channels_per_class = detail::proportional_floor(negated, total, phi);
            detail::enforce_min_one(a.channels_per_class, negated);
            break;
        }
    }
    return a;
}

} // namespace ffgaf
