#pragma once

#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "starpix/common/rng.hpp"

namespace starpix::engine {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (int extent : shape) {
        if (extent < 0) throw std::invalid_argument("negative tensor extent");
        n *= static_cast<std::size_t>(extent);
    }
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

inline bool same_shape(const Shape& a, const Shape& b) { return a == b; }

// Dense row-major tensor over a single scalar type. The engine instantiates
// float for training and double for gradient checking.
template <typename T>
struct TensorT {
    Shape shape;
    std::vector<T> data;

    TensorT() = default;
    explicit TensorT(Shape s) : shape(std::move(s)), data(shape_numel(shape), T(0)) {}
    TensorT(Shape s, T fill) : shape(std::move(s)), data(shape_numel(shape), fill) {}
    TensorT(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
        if (data.size() != shape_numel(shape))
            throw std::invalid_argument("tensor data length does not match shape " + shape_str(shape));
    }

    static TensorT zeros(Shape s) { return TensorT(std::move(s)); }
    static TensorT full(Shape s, T v) { return TensorT(std::move(s), v); }
    static TensorT scalar(T v) { return TensorT(Shape{1}, std::vector<T>{v}); }

    static TensorT randn(Shape s, Rng& rng, double stddev = 1.0, double mean = 0.0) {
        TensorT t(std::move(s));
        for (auto& x : t.data) x = static_cast<T>(rng.normal(mean, stddev));
        return t;
    }

    std::size_t numel() const { return data.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    template <typename U>
    TensorT<U> cast() const {
        TensorT<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

using Tensor = TensorT<float>;

template <typename T>
void require_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* what) {
    if (!same_shape(a.shape, b.shape))
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_str(a.shape) +
                                    " vs " + shape_str(b.shape));
}

}  // namespace starpix::engine
