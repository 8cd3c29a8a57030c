#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "starpix/engine/graph.hpp"
#include "starpix/engine/ops.hpp"

namespace starpix::optim {

using engine::Node;
using engine::Shape;
using engine::TensorT;
using engine::Var;

// Mean squared error: (1/N) * sum_n (x_n - y_n)^2, with d/dx_n = 2(x_n - y_n)/N.
// Predictions may be (N) or (N,1); targets must match elementwise.
template <typename T>
Var<T> mse_loss(const Var<T>& prediction, const TensorT<T>& target) {
    if (prediction.value().numel() != target.numel() || target.numel() == 0)
        throw std::invalid_argument("mse_loss: prediction " +
                                    engine::shape_str(prediction.value().shape) + " vs target " +
                                    engine::shape_str(target.shape));
    const std::size_t n = target.numel();
    T total = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        const T d = prediction.value().data[i] - target.data[i];
        total += d * d;
    }
    const T inv_n = T(1) / static_cast<T>(n);
    return engine::make_op<T>(TensorT<T>::scalar(total * inv_n), {prediction.node()},
                              [target, inv_n](Node<T>& node) {
        auto& in = *node.inputs[0];
        if (!in.requires_grad) return;
        auto& grad = in.ensure_grad();
        const T upstream = node.grad.data[0];
        for (std::size_t i = 0; i < grad.numel(); ++i)
            grad.data[i] += upstream * T(2) * (in.value.data[i] - target.data[i]) * inv_n;
    });
}

// Weighted softmax cross entropy over (N,K) logits:
//   loss_n = weight[class_n] * (-log(exp(x[class_n]) / sum_j exp(x[j])))
// reduced by weighted mean (sum loss_n / sum weight[class_n]). The log-sum-exp
// is stabilized by subtracting the row max. Empty weights mean unit weights.
template <typename T>
Var<T> cross_entropy_loss(const Var<T>& logits, const std::vector<int>& classes,
                          const std::vector<T>& class_weights = {}) {
    const auto& shape = logits.value().shape;
    if (shape.size() != 2)
        throw std::invalid_argument("cross_entropy_loss: expected (batch, classes) logits, got " +
                                    engine::shape_str(shape));
    const int n = shape[0], k = shape[1];
    if (static_cast<int>(classes.size()) != n)
        throw std::invalid_argument("cross_entropy_loss: " + std::to_string(classes.size()) +
                                    " targets for batch of " + std::to_string(n));
    if (!class_weights.empty() && static_cast<int>(class_weights.size()) != k)
        throw std::invalid_argument("cross_entropy_loss: weight vector length " +
                                    std::to_string(class_weights.size()) + " for " +
                                    std::to_string(k) + " classes");
    for (T w : class_weights)
        if (w < T(0)) throw std::invalid_argument("cross_entropy_loss: negative class weight");
    for (int c : classes)
        if (c < 0 || c >= k)
            throw std::invalid_argument("cross_entropy_loss: class index " + std::to_string(c) +
                                        " out of range [0," + std::to_string(k) + ")");

    auto weight_of = [&](int c) { return class_weights.empty() ? T(1) : class_weights[static_cast<std::size_t>(c)]; };

    // softmax rows are cached for the backward pass
    TensorT<T> probs(Shape{n, k});
    T loss_sum = T(0), weight_sum = T(0);
    for (int i = 0; i < n; ++i) {
        const T* row = logits.value().ptr() + static_cast<std::size_t>(i) * k;
        T* p = probs.ptr() + static_cast<std::size_t>(i) * k;
        T row_max = row[0];
        for (int j = 1; j < k; ++j) row_max = std::max(row_max, row[j]);
        T denom = T(0);
        for (int j = 0; j < k; ++j) {
            p[j] = std::exp(row[j] - row_max);
            denom += p[j];
        }
        for (int j = 0; j < k; ++j) p[j] /= denom;
        const T log_sum_exp = row_max + std::log(denom);
        const T w = weight_of(classes[static_cast<std::size_t>(i)]);
        loss_sum += w * (log_sum_exp - row[classes[static_cast<std::size_t>(i)]]);
        weight_sum += w;
    }
    if (weight_sum <= T(0))
        throw std::invalid_argument("cross_entropy_loss: selected class weights sum to zero");

    const T inv_weight_sum = T(1) / weight_sum;
    return engine::make_op<T>(
        TensorT<T>::scalar(loss_sum * inv_weight_sum), {logits.node()},
        [probs = std::move(probs), classes, class_weights, inv_weight_sum, n, k](Node<T>& node) {
            auto& in = *node.inputs[0];
            if (!in.requires_grad) return;
            auto& grad = in.ensure_grad();
            const T upstream = node.grad.data[0];
            for (int i = 0; i < n; ++i) {
                const int c = classes[static_cast<std::size_t>(i)];
                const T w = class_weights.empty() ? T(1) : class_weights[static_cast<std::size_t>(c)];
                const T* p = probs.ptr() + static_cast<std::size_t>(i) * k;
                T* dst = grad.ptr() + static_cast<std::size_t>(i) * k;
                const T coeff = upstream * w * inv_weight_sum;
                for (int j = 0; j < k; ++j) dst[j] += coeff * (p[j] - (j == c ? T(1) : T(0)));
            }
        });
}

}  // namespace starpix::optim
