#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "starpix/engine/graph.hpp"
#include "starpix/engine/kernels.hpp"
#include "starpix/engine/tensor.hpp"

namespace starpix::engine {

namespace detail {

template <typename T>
void accumulate(TensorT<T>& dst, const TensorT<T>& src) {
    for (std::size_t i = 0; i < dst.numel(); ++i) dst.data[i] += src.data[i];
}

[[noreturn]] inline void shape_error(const char* op, const Shape& a, const Shape& b) {
    throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a) +
                                " vs " + shape_str(b));
}

}  // namespace detail

// ---- elementwise ----------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    if (!same_shape(a.value().shape, b.value().shape))
        detail::shape_error("add", a.value().shape, b.value().shape);
    TensorT<T> out = a.value();
    detail::accumulate(out, b.value());
    return make_op<T>(std::move(out), {a.node(), b.node()}, [](Node<T>& node) {
        for (const auto& input : node.inputs)
            if (input->requires_grad) detail::accumulate(input->ensure_grad(), node.grad);
    });
}

// Skip connection: identical math to add, named for call-site clarity.
template <typename T>
Var<T> residual_add(const Var<T>& a, const Var<T>& b) {
    return add(a, b);
}

template <typename T>
Var<T> neg(const Var<T>& x) {
    TensorT<T> out = x.value();
    for (auto& v : out.data) v = -v;
    return make_op<T>(std::move(out), {x.node()}, [](Node<T>& node) {
        auto& in = *node.inputs[0];
        if (!in.requires_grad) return;
        auto& grad = in.ensure_grad();
        for (std::size_t i = 0; i < grad.numel(); ++i) grad.data[i] -= node.grad.data[i];
    });
}

template <typename T>
Var<T> scale(const Var<T>& x, T factor) {
    TensorT<T> out = x.value();
    for (auto& v : out.data) v *= factor;
    return make_op<T>(std::move(out), {x.node()}, [factor](Node<T>& node) {
        auto& in = *node.inputs[0];
        if (!in.requires_grad) return;
        auto& grad = in.ensure_grad();
        for (std::size_t i = 0; i < grad.numel(); ++i) grad.data[i] += factor * node.grad.data[i];
    });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
    TensorT<T> out = x.value();
    for (auto& v : out.data) v = v > T(0) ? v : T(0);
    return make_op<T>(std::move(out), {x.node()}, [](Node<T>& node) {
        auto& in = *node.inputs[0];
        if (!in.requires_grad) return;
        auto& grad = in.ensure_grad();
        const auto& x_val = in.value;
        for (std::size_t i = 0; i < grad.numel(); ++i)
            if (x_val.data[i] > T(0)) grad.data[i] += node.grad.data[i];
    });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T negative_slope = T(0.01)) {
    TensorT<T> out = x.value();
    for (auto& v : out.data) v = v > T(0) ? v : negative_slope * v;
    return make_op<T>(std::move(out), {x.node()}, [negative_slope](Node<T>& node) {
        auto& in = *node.inputs[0];
        if (!in.requires_grad) return;
        auto& grad = in.ensure_grad();
        const auto& x_val = in.value;
        for (std::size_t i = 0; i < grad.numel(); ++i) {
            const T slope = x_val.data[i] > T(0) ? T(1) : negative_slope;
            grad.data[i] += slope * node.grad.data[i];
        }
    });
}

template <typename T>
Var<T> tanh_op(const Var<T>& x) {
    TensorT<T> out = x.value();
    for (auto& v : out.data) v = std::tanh(v);
    return make_op<T>(std::move(out), {x.node()}, [](Node<T>& node) {
        auto& in = *node.inputs[0];
        if (!in.requires_grad) return;
        auto& grad = in.ensure_grad();
        for (std::size_t i = 0; i < grad.numel(); ++i) {
            const T y = node.value.data[i];
            grad.data[i] += (T(1) - y * y) * node.grad.data[i];
        }
    });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
    TensorT<T> out = x.value();
    for (auto& v : out.data) v = T(1) / (T(1) + std::exp(-v));
    return make_op<T>(std::move(out), {x.node()}, [](Node<T>& node) {
        auto& in = *node.inputs[0];
        if (!in.requires_grad) return;
        auto& grad = in.ensure_grad();
        for (std::size_t i = 0; i < grad.numel(); ++i) {
            const T y = node.value.data[i];
            grad.data[i] += y * (T(1) - y) * node.grad.data[i];
        }
    });
}

// log(1 + exp(x)) computed without overflow.
template <typename T>
Var<T> softplus(const Var<T>& x) {
    TensorT<T> out = x.value();
    for (auto& v : out.data) {
        const T a = std::max(v, T(0));
        v = a + std::log1p(std::exp(-std::abs(v)));
    }
    return make_op<T>(std::move(out), {x.node()}, [](Node<T>& node) {
        auto& in = *node.inputs[0];
        if (!in.requires_grad) return;
        auto& grad = in.ensure_grad();
        const auto& x_val = in.value;
        for (std::size_t i = 0; i < grad.numel(); ++i) {
            const T s = T(1) / (T(1) + std::exp(-x_val.data[i]));
            grad.data[i] += s * node.grad.data[i];
        }
    });
}

// ---- shape ----------------------------------------------------------------

template <typename T>
Var<T> reshape(const Var<T>& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.value().numel())
        detail::shape_error("reshape", x.value().shape, new_shape);
    TensorT<T> out(std::move(new_shape), x.value().data);
    return make_op<T>(std::move(out), {x.node()}, [](Node<T>& node) {
        auto& in = *node.inputs[0];
        if (!in.requires_grad) return;
        detail::accumulate(in.ensure_grad(), node.grad);
    });
}

// (N, ...) -> (N, product of the rest)
template <typename T>
Var<T> flatten(const Var<T>& x) {
    if (x.value().rank() < 1) throw std::invalid_argument("flatten: rank-0 input");
    const int n = x.value().dim(0);
    const int rest = n > 0 ? static_cast<int>(x.value().numel()) / n : 0;
    return reshape(x, Shape{n, rest});
}

// ---- reductions -----------------------------------------------------------

template <typename T>
Var<T> sum_all(const Var<T>& x) {
    T total = T(0);
    for (const auto& v : x.value().data) total += v;
    return make_op<T>(TensorT<T>::scalar(total), {x.node()}, [](Node<T>& node) {
        auto& in = *node.inputs[0];
        if (!in.requires_grad) return;
        auto& grad = in.ensure_grad();
        const T g = node.grad.data[0];
        for (auto& v : grad.data) v += g;
    });
}

template <typename T>
Var<T> mean_all(const Var<T>& x) {
    if (x.value().numel() == 0) throw std::invalid_argument("mean_all: empty tensor");
    T total = T(0);
    for (const auto& v : x.value().data) total += v;
    const T inv_n = T(1) / static_cast<T>(x.value().numel());
    return make_op<T>(TensorT<T>::scalar(total * inv_n), {x.node()}, [inv_n](Node<T>& node) {
        auto& in = *node.inputs[0];
        if (!in.requires_grad) return;
        auto& grad = in.ensure_grad();
        const T g = node.grad.data[0] * inv_n;
        for (auto& v : grad.data) v += g;
    });
}

// (N,C,H,W) -> (N,C): mean over the spatial extent.
template <typename T>
Var<T> global_avg_pool2d(const Var<T>& x) {
    const auto& shape = x.value().shape;
    if (shape.size() != 4) throw std::invalid_argument("global_avg_pool2d: expected rank-4 input, got " + shape_str(shape));
    const int n = shape[0], c = shape[1];
    const std::size_t plane = static_cast<std::size_t>(shape[2]) * shape[3];
    if (plane == 0) throw std::invalid_argument("global_avg_pool2d: empty spatial extent");
    TensorT<T> out(Shape{n, c});
    const T inv = T(1) / static_cast<T>(plane);
    for (int i = 0; i < n * c; ++i) {
        const T* src = x.value().ptr() + i * plane;
        T acc = T(0);
        for (std::size_t j = 0; j < plane; ++j) acc += src[j];
        out.data[static_cast<std::size_t>(i)] = acc * inv;
    }
    return make_op<T>(std::move(out), {x.node()}, [plane, inv](Node<T>& node) {
        auto& in = *node.inputs[0];
        if (!in.requires_grad) return;
        auto& grad = in.ensure_grad();
        for (std::size_t i = 0; i < node.grad.numel(); ++i) {
            const T g = node.grad.data[i] * inv;
            T* dst = grad.ptr() + i * plane;
            for (std::size_t j = 0; j < plane; ++j) dst[j] += g;
        }
    });
}

// ---- softmax ---------------------------------------------------------------

// Row-wise softmax of (N,K) logits; numerically stabilized by the row max.
template <typename T>
Var<T> softmax(const Var<T>& x) {
    const auto& shape = x.value().shape;
    if (shape.size() != 2) throw std::invalid_argument("softmax: expected rank-2 input, got " + shape_str(shape));
    const int n = shape[0], k = shape[1];
    TensorT<T> out(shape);
    for (int i = 0; i < n; ++i) {
        const T* row = x.value().ptr() + static_cast<std::size_t>(i) * k;
        T* dst = out.ptr() + static_cast<std::size_t>(i) * k;
        T row_max = row[0];
        for (int j = 1; j < k; ++j) row_max = std::max(row_max, row[j]);
        T denom = T(0);
        for (int j = 0; j < k; ++j) {
            dst[j] = std::exp(row[j] - row_max);
            denom += dst[j];
        }
        for (int j = 0; j < k; ++j) dst[j] /= denom;
    }
    return make_op<T>(std::move(out), {x.node()}, [n, k](Node<T>& node) {
        auto& in = *node.inputs[0];
        if (!in.requires_grad) return;
        auto& grad = in.ensure_grad();
        for (int i = 0; i < n; ++i) {
            const T* y = node.value.ptr() + static_cast<std::size_t>(i) * k;
            const T* dy = node.grad.ptr() + static_cast<std::size_t>(i) * k;
            T* dx = grad.ptr() + static_cast<std::size_t>(i) * k;
            T dot = T(0);
            for (int j = 0; j < k; ++j) dot += dy[j] * y[j];
            for (int j = 0; j < k; ++j) dx[j] += y[j] * (dy[j] - dot);
        }
    });
}

// ---- linear ----------------------------------------------------------------

// y = x * W^T + b with x (N,Din), W (Dout,Din), optional b (Dout).
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias = Var<T>()) {
    const auto& xs = x.value().shape;
    const auto& ws = weight.value().shape;
    if (xs.size() != 2 || ws.size() != 2 || xs[1] != ws[1])
        detail::shape_error("linear", xs, ws);
    const int n = xs[0], din = xs[1], dout = ws[0];
    const bool has_bias = bias.valid();
    if (has_bias && (bias.value().rank() != 1 || bias.value().dim(0) != dout))
        detail::shape_error("linear bias", bias.value().shape, Shape{dout});

    TensorT<T> out(Shape{n, dout});
    detail::gemm_nt(x.value().ptr(), weight.value().ptr(), out.ptr(), n, din, dout);
    if (has_bias) {
        const T* b = bias.value().ptr();
        for (int i = 0; i < n; ++i) {
            T* row = out.ptr() + static_cast<std::size_t>(i) * dout;
            for (int j = 0; j < dout; ++j) row[j] += b[j];
        }
    }

    std::vector<NodePtr<T>> inputs{x.node(), weight.node()};
    if (has_bias) inputs.push_back(bias.node());
    return make_op<T>(std::move(out), std::move(inputs),
                      [n, din, dout, has_bias](Node<T>& node) {
        auto& x_in = *node.inputs[0];
        auto& w_in = *node.inputs[1];
        const T* dy = node.grad.ptr();
        if (x_in.requires_grad) {
            // dX (N,Din) += dY (N,Dout) * W (Dout,Din)
            detail::gemm_nn(dy, w_in.value.ptr(), x_in.ensure_grad().ptr(), n, dout, din);
        }
        if (w_in.requires_grad) {
            // dW (Dout,Din) += dY^T (Dout,N) * X (N,Din)
            detail::gemm_tn(dy, x_in.value.ptr(), w_in.ensure_grad().ptr(), dout, n, din);
        }
        if (has_bias && node.inputs[2]->requires_grad) {
            auto& db = node.inputs[2]->ensure_grad();
            for (int i = 0; i < n; ++i) {
                const T* row = dy + static_cast<std::size_t>(i) * dout;
                for (int j = 0; j < dout; ++j) db.data[static_cast<std::size_t>(j)] += row[j];
            }
        }
    });
}

// ---- convolution -----------------------------------------------------------

inline int conv_out_extent(int in, int kernel, int stride, int pad) {
    const int span = in + 2 * pad - kernel;
    if (span < 0 || stride < 1) return -1;
    return span / stride + 1;
}

// x (N,C,H,W) * W (K,C,kh,kw) -> (N,K,OH,OW), optional bias (K).
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad) {
    const auto& xs = x.value().shape;
    const auto& ws = weight.value().shape;
    if (xs.size() != 4 || ws.size() != 4 || xs[1] != ws[1]) detail::shape_error("conv2d", xs, ws);
    const int n = xs[0], c = xs[1], h = xs[2], w = xs[3];
    const int k = ws[0], kh = ws[2], kw = ws[3];
    const int oh = conv_out_extent(h, kh, stride, pad);
    const int ow = conv_out_extent(w, kw, stride, pad);
    if (oh < 1 || ow < 1)
        throw std::invalid_argument("conv2d: kernel " + shape_str(ws) + " does not fit input " +
                                    shape_str(xs));
    const bool has_bias = bias.valid();
    if (has_bias && (bias.value().rank() != 1 || bias.value().dim(0) != k))
        detail::shape_error("conv2d bias", bias.value().shape, Shape{k});

    const int ckk = c * kh * kw;
    const std::size_t in_plane = static_cast<std::size_t>(c) * h * w;
    const std::size_t out_plane = static_cast<std::size_t>(k) * oh * ow;
    const std::size_t cols = static_cast<std::size_t>(oh) * ow;

    TensorT<T> out(Shape{n, k, oh, ow});
    std::vector<T> col(static_cast<std::size_t>(ckk) * cols);
    for (int s = 0; s < n; ++s) {
        detail::im2col(x.value().ptr() + s * in_plane, c, h, w, kh, kw, stride, pad, oh, ow,
                       col.data());
        T* out_s = out.ptr() + s * out_plane;
        detail::gemm_nn(weight.value().ptr(), col.data(), out_s, k, ckk, static_cast<int>(cols));
        if (has_bias) {
            const T* b = bias.value().ptr();
            for (int ch = 0; ch < k; ++ch) {
                T* row = out_s + static_cast<std::size_t>(ch) * cols;
                for (std::size_t j = 0; j < cols; ++j) row[j] += b[ch];
            }
        }
    }

    std::vector<NodePtr<T>> inputs{x.node(), weight.node()};
    if (has_bias) inputs.push_back(bias.node());
    return make_op<T>(std::move(out), std::move(inputs),
                      [n, c, h, w, k, kh, kw, oh, ow, stride, pad, ckk, has_bias](Node<T>& node) {
        auto& x_in = *node.inputs[0];
        auto& w_in = *node.inputs[1];
        const std::size_t in_plane = static_cast<std::size_t>(c) * h * w;
        const std::size_t out_plane = static_cast<std::size_t>(k) * oh * ow;
        const std::size_t cols = static_cast<std::size_t>(oh) * ow;
        std::vector<T> col(static_cast<std::size_t>(ckk) * cols);
        std::vector<T> dcol;
        if (x_in.requires_grad) dcol.resize(col.size());
        for (int s = 0; s < n; ++s) {
            const T* dy_s = node.grad.ptr() + s * out_plane;
            if (w_in.requires_grad) {
                detail::im2col(x_in.value.ptr() + s * in_plane, c, h, w, kh, kw, stride, pad, oh,
                               ow, col.data());
                // dW (K,CKK) += dY_s (K,cols) * col^T
                detail::gemm_nt(dy_s, col.data(), w_in.ensure_grad().ptr(), k,
                                static_cast<int>(cols), ckk);
            }
            if (x_in.requires_grad) {
                std::fill(dcol.begin(), dcol.end(), T(0));
                // dcol (CKK,cols) += W^T (CKK,K) * dY_s (K,cols)
                detail::gemm_tn(w_in.value.ptr(), dy_s, dcol.data(), ckk, k,
                                static_cast<int>(cols));
                detail::col2im(dcol.data(), c, h, w, kh, kw, stride, pad, oh, ow,
                               x_in.ensure_grad().ptr() + s * in_plane);
            }
            if (has_bias && node.inputs[2]->requires_grad) {
                auto& db = node.inputs[2]->ensure_grad();
                for (int ch = 0; ch < k; ++ch) {
                    const T* row = dy_s + static_cast<std::size_t>(ch) * cols;
                    T acc = T(0);
                    for (std::size_t j = 0; j < cols; ++j) acc += row[j];
                    db.data[static_cast<std::size_t>(ch)] += acc;
                }
            }
        }
    });
}

// x (N,C,H,W) * W (C,K,kh,kw) -> (N,K,OH,OW) with OH = (H-1)*stride - 2*pad + kh.
template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride,
                        int pad) {
    const auto& xs = x.value().shape;
    const auto& ws = weight.value().shape;
    if (xs.size() != 4 || ws.size() != 4 || xs[1] != ws[0])
        detail::shape_error("conv_transpose2d", xs, ws);
    const int n = xs[0], c = xs[1], h = xs[2], w = xs[3];
    const int k = ws[1], kh = ws[2], kw = ws[3];
    const int oh = (h - 1) * stride - 2 * pad + kh;
    const int ow = (w - 1) * stride - 2 * pad + kw;
    if (oh < 1 || ow < 1)
        throw std::invalid_argument("conv_transpose2d: kernel " + shape_str(ws) +
                                    " yields empty output for input " + shape_str(xs));
    const bool has_bias = bias.valid();
    if (has_bias && (bias.value().rank() != 1 || bias.value().dim(0) != k))
        detail::shape_error("conv_transpose2d bias", bias.value().shape, Shape{k});

    const int kkk = k * kh * kw;
    const std::size_t in_plane = static_cast<std::size_t>(c) * h * w;
    const std::size_t out_plane = static_cast<std::size_t>(k) * oh * ow;
    const std::size_t grid = static_cast<std::size_t>(h) * w;

    TensorT<T> out(Shape{n, k, oh, ow});
    std::vector<T> col(static_cast<std::size_t>(kkk) * grid);
    for (int s = 0; s < n; ++s) {
        std::fill(col.begin(), col.end(), T(0));
        // col (KKK,grid) = W^T (KKK,C) * x_s (C,grid)
        detail::gemm_tn(weight.value().ptr(), x.value().ptr() + s * in_plane, col.data(), kkk, c,
                        static_cast<int>(grid));
        T* out_s = out.ptr() + s * out_plane;
        detail::col2im(col.data(), k, oh, ow, kh, kw, stride, pad, h, w, out_s);
        if (has_bias) {
            const T* b = bias.value().ptr();
            const std::size_t plane = static_cast<std::size_t>(oh) * ow;
            for (int ch = 0; ch < k; ++ch) {
                T* row = out_s + static_cast<std::size_t>(ch) * plane;
                for (std::size_t j = 0; j < plane; ++j) row[j] += b[ch];
            }
        }
    }

    std::vector<NodePtr<T>> inputs{x.node(), weight.node()};
    if (has_bias) inputs.push_back(bias.node());
    return make_op<T>(std::move(out), std::move(inputs),
                      [n, c, h, w, k, kh, kw, oh, ow, stride, pad, kkk, has_bias](Node<T>& node) {
        auto& x_in = *node.inputs[0];
        auto& w_in = *node.inputs[1];
        const std::size_t in_plane = static_cast<std::size_t>(c) * h * w;
        const std::size_t out_plane = static_cast<std::size_t>(k) * oh * ow;
        const std::size_t grid = static_cast<std::size_t>(h) * w;
        std::vector<T> dcol(static_cast<std::size_t>(kkk) * grid);
        for (int s = 0; s < n; ++s) {
            const T* dy_s = node.grad.ptr() + s * out_plane;
            detail::im2col(dy_s, k, oh, ow, kh, kw, stride, pad, h, w, dcol.data());
            if (x_in.requires_grad) {
                // dX_s (C,grid) += W (C,KKK) * dcol (KKK,grid)
                detail::gemm_nn(w_in.value.ptr(), dcol.data(),
                                x_in.ensure_grad().ptr() + s * in_plane, c, kkk,
                                static_cast<int>(grid));
            }
            if (w_in.requires_grad) {
                // dW (C,KKK) += x_s (C,grid) * dcol^T
                detail::gemm_nt(x_in.value.ptr() + s * in_plane, dcol.data(),
                                w_in.ensure_grad().ptr(), c, static_cast<int>(grid), kkk);
            }
            if (has_bias && node.inputs[2]->requires_grad) {
                auto& db = node.inputs[2]->ensure_grad();
                const std::size_t plane = static_cast<std::size_t>(oh) * ow;
                for (int ch = 0; ch < k; ++ch) {
                    const T* row = dy_s + static_cast<std::size_t>(ch) * plane;
                    T acc = T(0);
                    for (std::size_t j = 0; j < plane; ++j) acc += row[j];
                    db.data[static_cast<std::size_t>(ch)] += acc;
                }
            }
        }
    });
}

// ---- pooling ---------------------------------------------------------------

// Max pooling with square kernel; trailing pixels that do not fill a window
// are dropped. Backward routes gradient to the argmax of each window.
template <typename T>
Var<T> max_pool2d(const Var<T>& x, int kernel, int stride = 0) {
    if (stride == 0) stride = kernel;
    const auto& xs = x.value().shape;
    if (xs.size() != 4) throw std::invalid_argument("max_pool2d: expected rank-4 input, got " + shape_str(xs));
    const int n = xs[0], c = xs[1], h = xs[2], w = xs[3];
    const int oh = conv_out_extent(h, kernel, stride, 0);
    const int ow = conv_out_extent(w, kernel, stride, 0);
    if (oh < 1 || ow < 1)
        throw std::invalid_argument("max_pool2d: window does not fit input " + shape_str(xs));

    TensorT<T> out(Shape{n, c, oh, ow});
    std::vector<std::uint32_t> argmax(out.numel());
    const std::size_t in_plane = static_cast<std::size_t>(h) * w;
    std::size_t oi = 0;
    for (int img = 0; img < n * c; ++img) {
        const T* src = x.value().ptr() + img * in_plane;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox, ++oi) {
                const int y0 = oy * stride, x0 = ox * stride;
                T best = src[y0 * w + x0];
                std::uint32_t best_idx = static_cast<std::uint32_t>(y0 * w + x0);
                for (int dy = 0; dy < kernel; ++dy) {
                    for (int dx = 0; dx < kernel; ++dx) {
                        const int idx = (y0 + dy) * w + (x0 + dx);
                        if (src[idx] > best) {
                            best = src[idx];
                            best_idx = static_cast<std::uint32_t>(idx);
                        }
                    }
                }
                out.data[oi] = best;
                argmax[oi] = best_idx;
            }
        }
    }
    const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
    return make_op<T>(std::move(out), {x.node()},
                      [argmax = std::move(argmax), in_plane, out_plane, n, c](Node<T>& node) {
        auto& in = *node.inputs[0];
        if (!in.requires_grad) return;
        auto& grad = in.ensure_grad();
        std::size_t oi = 0;
        for (int img = 0; img < n * c; ++img) {
            T* dst = grad.ptr() + img * in_plane;
            for (std::size_t j = 0; j < out_plane; ++j, ++oi) dst[argmax[oi]] += node.grad.data[oi];
        }
    });
}

// ---- batch norm --------------------------------------------------------------

// Per-channel batch normalization over (N,H,W). In training mode the batch
// statistics normalize the input and update the running buffers in place
// (biased variance normalizes, unbiased updates the buffer). In eval mode the
// op is a deterministic affine map using the running buffers.
template <typename T>
Var<T> batch_norm2d(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                    TensorT<T>& running_mean, TensorT<T>& running_var, bool training,
                    T momentum = T(0.1), T eps = T(1e-5)) {
    const auto& xs = x.value().shape;
    if (xs.size() != 4) throw std::invalid_argument("batch_norm2d: expected rank-4 input, got " + shape_str(xs));
    const int n = xs[0], c = xs[1], h = xs[2], w = xs[3];
    if (gamma.value().rank() != 1 || gamma.value().dim(0) != c)
        detail::shape_error("batch_norm2d gamma", gamma.value().shape, Shape{c});
    if (beta.value().rank() != 1 || beta.value().dim(0) != c)
        detail::shape_error("batch_norm2d beta", beta.value().shape, Shape{c});
    if (running_mean.rank() != 1 || running_mean.dim(0) != c ||
        running_var.rank() != 1 || running_var.dim(0) != c)
        detail::shape_error("batch_norm2d running stats", running_mean.shape, Shape{c});

    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t chan_stride = static_cast<std::size_t>(c) * plane;
    const std::size_t m = static_cast<std::size_t>(n) * plane;  // samples per channel
    if (m == 0) throw std::invalid_argument("batch_norm2d: empty batch");

    std::vector<T> mean(static_cast<std::size_t>(c)), inv_std(static_cast<std::size_t>(c));
    if (training) {
        for (int ch = 0; ch < c; ++ch) {
            T sum = T(0);
            for (int s = 0; s < n; ++s) {
                const T* src = x.value().ptr() + s * chan_stride + ch * plane;
                for (std::size_t j = 0; j < plane; ++j) sum += src[j];
            }
            const T mu = sum / static_cast<T>(m);
            T var_sum = T(0);
            for (int s = 0; s < n; ++s) {
                const T* src = x.value().ptr() + s * chan_stride + ch * plane;
                for (std::size_t j = 0; j < plane; ++j) {
                    const T d = src[j] - mu;
                    var_sum += d * d;
                }
            }
            const T var = var_sum / static_cast<T>(m);
            mean[static_cast<std::size_t>(ch)] = mu;
            inv_std[static_cast<std::size_t>(ch)] = T(1) / std::sqrt(var + eps);
            const T var_unbiased = m > 1 ? var_sum / static_cast<T>(m - 1) : var;
            running_mean.data[static_cast<std::size_t>(ch)] =
                (T(1) - momentum) * running_mean.data[static_cast<std::size_t>(ch)] + momentum * mu;
            running_var.data[static_cast<std::size_t>(ch)] =
                (T(1) - momentum) * running_var.data[static_cast<std::size_t>(ch)] +
                momentum * var_unbiased;
        }
    } else {
        for (int ch = 0; ch < c; ++ch) {
            mean[static_cast<std::size_t>(ch)] = running_mean.data[static_cast<std::size_t>(ch)];
            inv_std[static_cast<std::size_t>(ch)] =
                T(1) / std::sqrt(running_var.data[static_cast<std::size_t>(ch)] + eps);
        }
    }

    TensorT<T> out(xs);
    TensorT<T> x_hat(xs);
    for (int s = 0; s < n; ++s) {
        for (int ch = 0; ch < c; ++ch) {
            const T* src = x.value().ptr() + s * chan_stride + ch * plane;
            T* dst_hat = x_hat.ptr() + s * chan_stride + ch * plane;
            T* dst = out.ptr() + s * chan_stride + ch * plane;
            const T mu = mean[static_cast<std::size_t>(ch)];
            const T is = inv_std[static_cast<std::size_t>(ch)];
            const T g = gamma.value().data[static_cast<std::size_t>(ch)];
            const T b = beta.value().data[static_cast<std::size_t>(ch)];
            for (std::size_t j = 0; j < plane; ++j) {
                dst_hat[j] = (src[j] - mu) * is;
                dst[j] = g * dst_hat[j] + b;
            }
        }
    }

    return make_op<T>(std::move(out), {x.node(), gamma.node(), beta.node()},
                      [x_hat = std::move(x_hat), inv_std = std::move(inv_std), training, n, c,
                       plane, chan_stride, m](Node<T>& node) {
        auto& x_in = *node.inputs[0];
        auto& gamma_in = *node.inputs[1];
        auto& beta_in = *node.inputs[2];

        // Per-channel sums of dy and dy*x_hat, shared by all three gradients.
        std::vector<T> sum_dy(static_cast<std::size_t>(c), T(0));
        std::vector<T> sum_dy_xhat(static_cast<std::size_t>(c), T(0));
        for (int s = 0; s < n; ++s) {
            for (int ch = 0; ch < c; ++ch) {
                const T* dy = node.grad.ptr() + s * chan_stride + ch * plane;
                const T* xh = x_hat.ptr() + s * chan_stride + ch * plane;
                T a = T(0), b = T(0);
                for (std::size_t j = 0; j < plane; ++j) {
                    a += dy[j];
                    b += dy[j] * xh[j];
                }
                sum_dy[static_cast<std::size_t>(ch)] += a;
                sum_dy_xhat[static_cast<std::size_t>(ch)] += b;
            }
        }
        if (gamma_in.requires_grad)
            for (int ch = 0; ch < c; ++ch)
                gamma_in.ensure_grad().data[static_cast<std::size_t>(ch)] +=
                    sum_dy_xhat[static_cast<std::size_t>(ch)];
        if (beta_in.requires_grad)
            for (int ch = 0; ch < c; ++ch)
                beta_in.ensure_grad().data[static_cast<std::size_t>(ch)] +=
                    sum_dy[static_cast<std::size_t>(ch)];
        if (!x_in.requires_grad) return;

        auto& dx = x_in.ensure_grad();
        const T inv_m = T(1) / static_cast<T>(m);
        for (int s = 0; s < n; ++s) {
            for (int ch = 0; ch < c; ++ch) {
                const T* dy = node.grad.ptr() + s * chan_stride + ch * plane;
                const T* xh = x_hat.ptr() + s * chan_stride + ch * plane;
                T* dst = dx.ptr() + s * chan_stride + ch * plane;
                const T g = gamma_in.value.data[static_cast<std::size_t>(ch)];
                const T is = inv_std[static_cast<std::size_t>(ch)];
                if (training) {
                    const T k1 = sum_dy[static_cast<std::size_t>(ch)] * inv_m;
                    const T k2 = sum_dy_xhat[static_cast<std::size_t>(ch)] * inv_m;
                    for (std::size_t j = 0; j < plane; ++j)
                        dst[j] += g * is * (dy[j] - k1 - xh[j] * k2);
                } else {
                    for (std::size_t j = 0; j < plane; ++j) dst[j] += g * is * dy[j];
                }
            }
        }
    });
}

}  // namespace starpix::engine
