#pragma once

#include <cstddef>

namespace starpix::engine::detail {

// Small row-major GEMM kernels, accumulate into C. Loop orders chosen so the
// inner loop runs over contiguous memory and auto-vectorizes.

// C[M,N] += A[M,K] * B[K,N]
template <typename T>
void gemm_nn(const T* A, const T* B, T* C, int M, int K, int N) {
    for (int i = 0; i < M; ++i) {
        const T* a_row = A + static_cast<std::size_t>(i) * K;
        T* c_row = C + static_cast<std::size_t>(i) * N;
        for (int k = 0; k < K; ++k) {
            const T a = a_row[k];
            if (a == T(0)) continue;
            const T* b_row = B + static_cast<std::size_t>(k) * N;
            for (int j = 0; j < N; ++j) c_row[j] += a * b_row[j];
        }
    }
}

// C[M,N] += A[M,K] * B[N,K]^T  (rows of A dotted with rows of B)
template <typename T>
void gemm_nt(const T* A, const T* B, T* C, int M, int K, int N) {
    for (int i = 0; i < M; ++i) {
        const T* a_row = A + static_cast<std::size_t>(i) * K;
        T* c_row = C + static_cast<std::size_t>(i) * N;
        for (int j = 0; j < N; ++j) {
            const T* b_row = B + static_cast<std::size_t>(j) * K;
            T acc = T(0);
            for (int k = 0; k < K; ++k) acc += a_row[k] * b_row[k];
            c_row[j] += acc;
        }
    }
}

// C[M,N] += A[K,M]^T * B[K,N]
template <typename T>
void gemm_tn(const T* A, const T* B, T* C, int M, int K, int N) {
    for (int k = 0; k < K; ++k) {
        const T* a_row = A + static_cast<std::size_t>(k) * M;
        const T* b_row = B + static_cast<std::size_t>(k) * N;
        for (int i = 0; i < M; ++i) {
            const T a = a_row[i];
            if (a == T(0)) continue;
            T* c_row = C + static_cast<std::size_t>(i) * N;
            for (int j = 0; j < N; ++j) c_row[j] += a * b_row[j];
        }
    }
}

// Unfold (C,H,W) into columns (C*kh*kw, OH*OW) for a convolution with the
// given stride and zero padding. Out-of-image taps read as zero.
template <typename T>
void im2col(const T* img, int C, int H, int W, int kh, int kw, int stride, int pad, int OH,
            int OW, T* col) {
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    const std::size_t out_plane = static_cast<std::size_t>(OH) * OW;
    std::size_t row = 0;
    for (int c = 0; c < C; ++c) {
        const T* src = img + c * plane;
        for (int dy = 0; dy < kh; ++dy) {
            for (int dx = 0; dx < kw; ++dx, ++row) {
                T* dst = col + row * out_plane;
                for (int oy = 0; oy < OH; ++oy) {
                    const int iy = oy * stride - pad + dy;
                    if (iy < 0 || iy >= H) {
                        for (int ox = 0; ox < OW; ++ox) dst[oy * OW + ox] = T(0);
                        continue;
                    }
                    const T* src_row = src + static_cast<std::size_t>(iy) * W;
                    for (int ox = 0; ox < OW; ++ox) {
                        const int ix = ox * stride - pad + dx;
                        dst[oy * OW + ox] = (ix < 0 || ix >= W) ? T(0) : src_row[ix];
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-accumulate columns back into the (C,H,W) image.
template <typename T>
void col2im(const T* col, int C, int H, int W, int kh, int kw, int stride, int pad, int OH,
            int OW, T* img) {
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    const std::size_t out_plane = static_cast<std::size_t>(OH) * OW;
    std::size_t row = 0;
    for (int c = 0; c < C; ++c) {
        T* dst = img + c * plane;
        for (int dy = 0; dy < kh; ++dy) {
            for (int dx = 0; dx < kw; ++dx, ++row) {
                const T* src = col + row * out_plane;
                for (int oy = 0; oy < OH; ++oy) {
                    const int iy = oy * stride - pad + dy;
                    if (iy < 0 || iy >= H) continue;
                    T* dst_row = dst + static_cast<std::size_t>(iy) * W;
                    for (int ox = 0; ox < OW; ++ox) {
                        const int ix = ox * stride - pad + dx;
                        if (ix >= 0 && ix < W) dst_row[ix] += src[oy * OW + ox];
                    }
                }
            }
        }
    }
}

}  // namespace starpix::engine::detail
