#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace npdw::nn::kernels {

// Global switch for the OpenMP paths; the serial reference implementations
// below ignore it. Every parallel loop assigns each output element to exactly
// one thread with a serial inner reduction, so both paths are bit-identical.
inline bool& parallel_enabled() {
    static bool enabled = true;
    return enabled;
}

inline constexpr long kParallelGrain = 16384;

// ---------------------------------------------------------------------------
// Matrix products. Row-major throughout. acc=true accumulates into C.

template <class S>
void matmul_nn_serial(const S* a, const S* b, S* c, int r, int k, int n, bool acc) {
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < n; ++j) {
            S s = acc ? c[static_cast<std::size_t>(i) * n + j] : S(0);
            for (int t = 0; t < k; ++t)
                s += a[static_cast<std::size_t>(i) * k + t] * b[static_cast<std::size_t>(t) * n + j];
            c[static_cast<std::size_t>(i) * n + j] = s;
        }
}

template <class S>
void matmul_nn(const S* a, const S* b, S* c, int r, int k, int n, bool acc) {
    const bool par = parallel_enabled() && static_cast<long>(r) * k * n > kParallelGrain;
#pragma omp parallel for schedule(static) if (par)
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < n; ++j) {
            S s = acc ? c[static_cast<std::size_t>(i) * n + j] : S(0);
            for (int t = 0; t < k; ++t)
                s += a[static_cast<std::size_t>(i) * k + t] * b[static_cast<std::size_t>(t) * n + j];
            c[static_cast<std::size_t>(i) * n + j] = s;
        }
}

// C[r,m] (+)= A[r,k] * B[m,k]^T
template <class S>
void matmul_nt_serial(const S* a, const S* b, S* c, int r, int k, int m, bool acc) {
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < m; ++j) {
            S s = acc ? c[static_cast<std::size_t>(i) * m + j] : S(0);
            for (int t = 0; t < k; ++t)
                s += a[static_cast<std::size_t>(i) * k + t] * b[static_cast<std::size_t>(j) * k + t];
            c[static_cast<std::size_t>(i) * m + j] = s;
        }
}

template <class S>
void matmul_nt(const S* a, const S* b, S* c, int r, int k, int m, bool acc) {
    const bool par = parallel_enabled() && static_cast<long>(r) * k * m > kParallelGrain;
#pragma omp parallel for schedule(static) if (par)
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < m; ++j) {
            S s = acc ? c[static_cast<std::size_t>(i) * m + j] : S(0);
            for (int t = 0; t < k; ++t)
                s += a[static_cast<std::size_t>(i) * k + t] * b[static_cast<std::size_t>(j) * k + t];
            c[static_cast<std::size_t>(i) * m + j] = s;
        }
}

// C[k,n] (+)= A[r,k]^T * B[r,n]
template <class S>
void matmul_tn_serial(const S* a, const S* b, S* c, int r, int k, int n, bool acc) {
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < n; ++j) {
            S s = acc ? c[static_cast<std::size_t>(i) * n + j] : S(0);
            for (int t = 0; t < r; ++t)
                s += a[static_cast<std::size_t>(t) * k + i] * b[static_cast<std::size_t>(t) * n + j];
            c[static_cast<std::size_t>(i) * n + j] = s;
        }
}

template <class S>
void matmul_tn(const S* a, const S* b, S* c, int r, int k, int n, bool acc) {
    const bool par = parallel_enabled() && static_cast<long>(r) * k * n > kParallelGrain;
#pragma omp parallel for schedule(static) if (par)
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < n; ++j) {
            S s = acc ? c[static_cast<std::size_t>(i) * n + j] : S(0);
            for (int t = 0; t < r; ++t)
                s += a[static_cast<std::size_t>(t) * k + i] * b[static_cast<std::size_t>(t) * n + j];
            c[static_cast<std::size_t>(i) * n + j] = s;
        }
}

// ---------------------------------------------------------------------------
// Elementwise and row-wise pieces.

template <class S>
void add_bias_rows(const S* x, const S* bias, S* y, long rows, int cols) {
    const bool par = parallel_enabled() && rows * cols > kParallelGrain;
#pragma omp parallel for schedule(static) if (par)
    for (long i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            y[static_cast<std::size_t>(i) * cols + j] = x[static_cast<std::size_t>(i) * cols + j] + bias[j];
}

// grad_bias[j] += sum_i grad_y[i, j], serial over rows for determinism.
template <class S>
void reduce_bias_grad(const S* gy, S* gb, long rows, int cols) {
    const bool par = parallel_enabled() && rows * cols > kParallelGrain;
#pragma omp parallel for schedule(static) if (par)
    for (int j = 0; j < cols; ++j) {
        S s = gb[j];
        for (long i = 0; i < rows; ++i) s += gy[static_cast<std::size_t>(i) * cols + j];
        gb[j] = s;
    }
}

template <class S>
void relu_fwd(const S* x, S* y, long n) {
    const bool par = parallel_enabled() && n > kParallelGrain;
#pragma omp parallel for schedule(static) if (par)
    for (long i = 0; i < n; ++i) y[i] = x[i] > S(0) ? x[i] : S(0);
}

template <class S>
void relu_bwd(const S* x, const S* gy, S* gx, long n) {
    const bool par = parallel_enabled() && n > kParallelGrain;
#pragma omp parallel for schedule(static) if (par)
    for (long i = 0; i < n; ++i) gx[i] += x[i] > S(0) ? gy[i] : S(0);
}

// ---------------------------------------------------------------------------
// 1-D convolution over [B, L, Cin] with filters [f, Cin, Cout], "same"
// padding (pad_left = (f-1)/2), no bias.

template <class S>
void conv1d_fwd_serial(const S* x, const S* w, S* y, int batch, int len, int cin, int cout, int f) {
    const int pad = (f - 1) / 2;
    for (int b = 0; b < batch; ++b)
        for (int t = 0; t < len; ++t)
            for (int co = 0; co < cout; ++co) {
                S s = 0;
                for (int k = 0; k < f; ++k) {
                    const int src = t - pad + k;
                    if (src < 0 || src >= len) continue;
                    const S* xr = x + (static_cast<std::size_t>(b) * len + src) * cin;
                    const S* wr = w + (static_cast<std::size_t>(k) * cin) * cout + co;
                    for (int ci = 0; ci < cin; ++ci) s += xr[ci] * wr[static_cast<std::size_t>(ci) * cout];
                }
                y[(static_cast<std::size_t>(b) * len + t) * cout + co] = s;
            }
}

template <class S>
void conv1d_fwd(const S* x, const S* w, S* y, int batch, int len, int cin, int cout, int f) {
    const int pad = (f - 1) / 2;
    const long rows = static_cast<long>(batch) * len;
    const bool par = parallel_enabled() && rows * cout * cin * f > kParallelGrain;
#pragma omp parallel for schedule(static) if (par)
    for (long bt = 0; bt < rows; ++bt) {
        const int b = static_cast<int>(bt / len);
        const int t = static_cast<int>(bt % len);
        for (int co = 0; co < cout; ++co) {
            S s = 0;
            for (int k = 0; k < f; ++k) {
                const int src = t - pad + k;
                if (src < 0 || src >= len) continue;
                const S* xr = x + (static_cast<std::size_t>(b) * len + src) * cin;
                const S* wr = w + (static_cast<std::size_t>(k) * cin) * cout + co;
                for (int ci = 0; ci < cin; ++ci) s += xr[ci] * wr[static_cast<std::size_t>(ci) * cout];
            }
            y[(static_cast<std::size_t>(b) * len + t) * cout + co] = s;
        }
    }
}

template <class S>
void conv1d_bwd_input(const S* gy, const S* w, S* gx, int batch, int len, int cin, int cout, int f) {
    const int pad = (f - 1) / 2;
    const long rows = static_cast<long>(batch) * len;
    const bool par = parallel_enabled() && rows * cout * cin * f > kParallelGrain;
#pragma omp parallel for schedule(static) if (par)
    for (long bs = 0; bs < rows; ++bs) {
        const int b = static_cast<int>(bs / len);
        const int s_pos = static_cast<int>(bs % len);
        for (int ci = 0; ci < cin; ++ci) {
            S s = 0;
            for (int k = 0; k < f; ++k) {
                const int t = s_pos + pad - k;
                if (t < 0 || t >= len) continue;
                const S* gyr = gy + (static_cast<std::size_t>(b) * len + t) * cout;
                const S* wr = w + (static_cast<std::size_t>(k) * cin + ci) * cout;
                for (int co = 0; co < cout; ++co) s += gyr[co] * wr[co];
            }
            gx[(static_cast<std::size_t>(b) * len + s_pos) * cin + ci] += s;
        }
    }
}

template <class S>
void conv1d_bwd_weight(const S* x, const S* gy, S* gw, int batch, int len, int cin, int cout, int f) {
    const int pad = (f - 1) / 2;
    const bool par = parallel_enabled() && static_cast<long>(f) * cin * cout * batch * len > kParallelGrain;
#pragma omp parallel for schedule(static) collapse(2) if (par)
    for (int k = 0; k < f; ++k)
        for (int ci = 0; ci < cin; ++ci)
            for (int co = 0; co < cout; ++co) {
                S s = 0;
                for (int b = 0; b < batch; ++b)
                    for (int t = 0; t < len; ++t) {
                        const int src = t - pad + k;
                        if (src < 0 || src >= len) continue;
                        s += x[(static_cast<std::size_t>(b) * len + src) * cin + ci] *
                             gy[(static_cast<std::size_t>(b) * len + t) * cout + co];
                    }
                gw[(static_cast<std::size_t>(k) * cin + ci) * cout + co] += s;
            }
}

// ---------------------------------------------------------------------------
// Row-wise softmax over the last dimension.

template <class S>
void softmax_rows_serial(const S* x, S* y, long rows, int cols) {
    for (long i = 0; i < rows; ++i) {
        const S* xr = x + static_cast<std::size_t>(i) * cols;
        S* yr = y + static_cast<std::size_t>(i) * cols;
        S mx = xr[0];
        for (int j = 1; j < cols; ++j) mx = xr[j] > mx ? xr[j] : mx;
        S denom = 0;
        for (int j = 0; j < cols; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            denom += yr[j];
        }
        const S inv = S(1) / denom;
        for (int j = 0; j < cols; ++j) yr[j] *= inv;
    }
}

template <class S>
void softmax_rows(const S* x, S* y, long rows, int cols) {
    const bool par = parallel_enabled() && rows * cols > kParallelGrain;
#pragma omp parallel for schedule(static) if (par)
    for (long i = 0; i < rows; ++i) {
        const S* xr = x + static_cast<std::size_t>(i) * cols;
        S* yr = y + static_cast<std::size_t>(i) * cols;
        S mx = xr[0];
        for (int j = 1; j < cols; ++j) mx = xr[j] > mx ? xr[j] : mx;
        S denom = 0;
        for (int j = 0; j < cols; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            denom += yr[j];
        }
        const S inv = S(1) / denom;
        for (int j = 0; j < cols; ++j) yr[j] *= inv;
    }
}

template <class S>
void softmax_bwd(const S* y, const S* gy, S* gx, long rows, int cols) {
    const bool par = parallel_enabled() && rows * cols > kParallelGrain;
#pragma omp parallel for schedule(static) if (par)
    for (long i = 0; i < rows; ++i) {
        const S* yr = y + static_cast<std::size_t>(i) * cols;
        const S* gr = gy + static_cast<std::size_t>(i) * cols;
        S* gxr = gx + static_cast<std::size_t>(i) * cols;
        S dot = 0;
        for (int j = 0; j < cols; ++j) dot += yr[j] * gr[j];
        for (int j = 0; j < cols; ++j) gxr[j] += yr[j] * (gr[j] - dot);
    }
}

// ---------------------------------------------------------------------------
// Layer normalization over the last dimension with learned scale/shift.

template <class S>
void layernorm_fwd_serial(const S* x, const S* gamma, const S* beta, S* y, S* xhat, long rows, int cols,
                          S eps) {
    for (long i = 0; i < rows; ++i) {
        const S* xr = x + static_cast<std::size_t>(i) * cols;
        S* yr = y + static_cast<std::size_t>(i) * cols;
        S* hr = xhat + static_cast<std::size_t>(i) * cols;
        S mean = 0;
        for (int j = 0; j < cols; ++j) mean += xr[j];
        mean /= S(cols);
        S var = 0;
        for (int j = 0; j < cols; ++j) var += (xr[j] - mean) * (xr[j] - mean);
        var /= S(cols);
        const S inv = S(1) / std::sqrt(var + eps);
        for (int j = 0; j < cols; ++j) {
            hr[j] = (xr[j] - mean) * inv;
            yr[j] = gamma[j] * hr[j] + beta[j];
        }
    }
}

template <class S>
void layernorm_fwd(const S* x, const S* gamma, const S* beta, S* y, S* xhat, long rows, int cols, S eps) {
    const bool par = parallel_enabled() && rows * cols > kParallelGrain;
#pragma omp parallel for schedule(static) if (par)
    for (long i = 0; i < rows; ++i) {
        const S* xr = x + static_cast<std::size_t>(i) * cols;
        S* yr = y + static_cast<std::size_t>(i) * cols;
        S* hr = xhat + static_cast<std::size_t>(i) * cols;
        S mean = 0;
        for (int j = 0; j < cols; ++j) mean += xr[j];
        mean /= S(cols);
        S var = 0;
        for (int j = 0; j < cols; ++j) var += (xr[j] - mean) * (xr[j] - mean);
        var /= S(cols);
        const S inv = S(1) / std::sqrt(var + eps);
        for (int j = 0; j < cols; ++j) {
            hr[j] = (xr[j] - mean) * inv;
            yr[j] = gamma[j] * hr[j] + beta[j];
        }
    }
}

template <class S>
void layernorm_bwd(const S* x, const S* gamma, const S* xhat, const S* gy, S* gx, S* ggamma, S* gbeta,
                   long rows, int cols, S eps) {
    // Parameter gradients: one thread per column, serial over rows.
    const bool par = parallel_enabled() && rows * cols > kParallelGrain;
#pragma omp parallel for schedule(static) if (par)
    for (int j = 0; j < cols; ++j) {
        S sg = ggamma[j], sb = gbeta[j];
        for (long i = 0; i < rows; ++i) {
            sg += gy[static_cast<std::size_t>(i) * cols + j] * xhat[static_cast<std::size_t>(i) * cols + j];
            sb += gy[static_cast<std::size_t>(i) * cols + j];
        }
        ggamma[j] = sg;
        gbeta[j] = sb;
    }
#pragma omp parallel for schedule(static) if (par)
    for (long i = 0; i < rows; ++i) {
        const S* xr = x + static_cast<std::size_t>(i) * cols;
        const S* hr = xhat + static_cast<std::size_t>(i) * cols;
        const S* gr = gy + static_cast<std::size_t>(i) * cols;
        S* gxr = gx + static_cast<std::size_t>(i) * cols;
        S mean = 0;
        for (int j = 0; j < cols; ++j) mean += xr[j];
        mean /= S(cols);
        S var = 0;
        for (int j = 0; j < cols; ++j) var += (xr[j] - mean) * (xr[j] - mean);
        var /= S(cols);
        const S inv = S(1) / std::sqrt(var + eps);
        S dxhat_mean = 0, dxhat_dot = 0;
        for (int j = 0; j < cols; ++j) {
            const S dxh = gr[j] * gamma[j];
            dxhat_mean += dxh;
            dxhat_dot += dxh * hr[j];
        }
        dxhat_mean /= S(cols);
        dxhat_dot /= S(cols);
        for (int j = 0; j < cols; ++j) {
            const S dxh = gr[j] * gamma[j];
            gxr[j] += inv * (dxh - dxhat_mean - hr[j] * dxhat_dot);
        }
    }
}

}  // namespace npdw::nn::kernels
