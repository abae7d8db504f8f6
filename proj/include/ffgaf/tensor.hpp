#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <utility>
#include <vector>

#include "ffgaf/common.hpp"

namespace ffgaf {

// Dense row-major N-dimensional array. The one value carrier used everywhere:
// activations are N x C x H x W, spike trains T x N x C x H x W.
template <class T>
class tensor {
public:
    tensor() = default;

    explicit tensor(std::vector<std::size_t> shape, T fill = T(0))
        : shape_(std::move(shape)), data_(count(shape_), fill) {}

    tensor(std::vector<std::size_t> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (count(shape_) != data_.size()) {
            throw config_error("tensor: shape/data size mismatch (" +
                               std::to_string(count(shape_)) + " vs " +
                               std::to_string(data_.size()) + ")");
        }
    }

    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& vec() { return data_; }
    const std::vector<T>& vec() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    template <class... Ix>
    T& at(Ix... ix) { return data_[offset({static_cast<std::size_t>(ix)...})]; }
    template <class... Ix>
    const T& at(Ix... ix) const { return data_[offset({static_cast<std::size_t>(ix)...})]; }

    bool same_shape(const tensor& other) const { return shape_ == other.shape_; }

    std::string shape_str() const {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
        os << "]";
        return os.str();
    }

    template <class U>
    tensor<U> cast() const {
        tensor<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

    static std::size_t count(const std::vector<std::size_t>& shape) {
        return std::accumulate(shape.begin(), shape.end(), std::size_t(1),
                               std::multiplies<std::size_t>());
    }

private:
    std::size_t offset(std::initializer_list<std::size_t> ix) const {
        std::size_t off = 0;
        std::size_t d = 0;
        for (std::size_t i : ix) off = off * shape_[d++] + i;
        return off;
    }

    std::vector<std::size_t> shape_;
    std::vector<T> data_;
};

using tensor_f = tensor<float>;
using tensor_d = tensor<double>;

// Public numeric operations may never hand back NaN/Inf; callers of this
// helper turn divergence into a reportable numeric_error (CLI exit code 4).
template <class T>
void ensure_finite(const tensor<T>& t, const char* op) {
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!std::isfinite(static_cast<double>(t[i]))) {
            throw numeric_error(std::string(op) + ": non-finite value at flat index " +
                                std::to_string(i));
        }
    }
}

} // namespace ffgaf
