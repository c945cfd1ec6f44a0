#pragma once

// Data-parallel kernels behind the sequence models. Every kernel exists in a
// serial and an OpenMP variant that share the same per-row body, so the
// parallel results are bit-identical to the serial reference (each output
// row is produced by exactly one thread with the serial accumulation order).
// The serial namespace is kept for tests and the benchmark tool.

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace othx::nn::kern {

namespace detail {

// Output tiles of 64 columns so the accumulators stay in registers for
// wide N (e.g. the 4h MLP dimension).
inline constexpr int64_t kColTile = 64;

template <typename T>
inline void matmul_nn_row(const T* __restrict a, const T* __restrict b,
                          T* __restrict c, int64_t K, int64_t N,
                          bool accumulate) {
  for (int64_t j0 = 0; j0 < N; j0 += kColTile) {
    const int64_t jn = std::min(kColTile, N - j0);
    T acc[kColTile];
    if (accumulate)
      std::copy(c + j0, c + j0 + jn, acc);
    else
      std::fill(acc, acc + jn, T(0));
    if (jn == kColTile) {
      for (int64_t k = 0; k < K; ++k) {
        const T av = a[k];
        const T* brow = b + k * N + j0;
#pragma omp simd
        for (int64_t j = 0; j < kColTile; ++j) acc[j] += av * brow[j];
      }
    } else {
      for (int64_t k = 0; k < K; ++k) {
        const T av = a[k];
        const T* brow = b + k * N + j0;
#pragma omp simd
        for (int64_t j = 0; j < jn; ++j) acc[j] += av * brow[j];
      }
    }
    std::copy(acc, acc + jn, c + j0);
  }
}

template <typename T>
inline void matmul_nt_row(const T* __restrict a, const T* __restrict b,
                          T* __restrict c, int64_t K, int64_t N,
                          bool accumulate) {
  int64_t j = 0;
  for (; j + 4 <= N; j += 4) {  // 4 dot products share the a-row loads
    const T* b0 = b + j * K;
    const T* b1 = b0 + K;
    const T* b2 = b1 + K;
    const T* b3 = b2 + K;
    T s0 = T(0), s1 = T(0), s2 = T(0), s3 = T(0);
#pragma omp simd reduction(+ : s0, s1, s2, s3)
    for (int64_t k = 0; k < K; ++k) {
      const T av = a[k];
      s0 += av * b0[k];
      s1 += av * b1[k];
      s2 += av * b2[k];
      s3 += av * b3[k];
    }
    if (accumulate) {
      c[j] += s0;
      c[j + 1] += s1;
      c[j + 2] += s2;
      c[j + 3] += s3;
    } else {
      c[j] = s0;
      c[j + 1] = s1;
      c[j + 2] = s2;
      c[j + 3] = s3;
    }
  }
  for (; j < N; ++j) {
    const T* brow = b + j * K;
    T s = T(0);
#pragma omp simd reduction(+ : s)
    for (int64_t k = 0; k < K; ++k) s += a[k] * brow[k];
    c[j] = accumulate ? c[j] + s : s;
  }
}

// C rows [k0, k1) of C[K,N] = A[M,K]^T * B[M,N], accumulated in ascending-i
// order. i is the outer loop so A and B stream once while the C block stays
// cache-resident; per-row results are independent of the k partition.
template <typename T>
inline void matmul_tn_range(const T* __restrict a, const T* __restrict b,
                            T* __restrict c, int64_t k0, int64_t k1, int64_t M,
                            int64_t K, int64_t N, bool accumulate) {
  if (!accumulate)
    for (int64_t k = k0; k < k1; ++k) std::fill(c + k * N, c + k * N + N, T(0));
  for (int64_t i = 0; i < M; ++i) {
    const T* arow = a + i * K;
    const T* brow = b + i * N;
    int64_t k = k0;
    for (; k + 2 <= k1; k += 2) {  // two C rows share the b-row loads
      const T a0 = arow[k];
      const T a1 = arow[k + 1];
      T* c0 = c + k * N;
      T* c1 = c0 + N;
#pragma omp simd
      for (int64_t j = 0; j < N; ++j) {
        c0[j] += a0 * brow[j];
        c1[j] += a1 * brow[j];
      }
    }
    for (; k < k1; ++k) {
      const T av = arow[k];
      T* crow = c + k * N;
#pragma omp simd
      for (int64_t j = 0; j < N; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
inline void layernorm_fwd_row(const T* __restrict x, const T* __restrict g,
                              const T* __restrict b, T* __restrict y,
                              T* __restrict mean, T* __restrict rstd, int64_t N) {
  T mu = T(0);
  for (int64_t j = 0; j < N; ++j) mu += x[j];
  mu /= static_cast<T>(N);
  T var = T(0);
  for (int64_t j = 0; j < N; ++j) {
    const T d = x[j] - mu;
    var += d * d;
  }
  var /= static_cast<T>(N);
  const T rs = T(1) / std::sqrt(var + static_cast<T>(1e-5));
  for (int64_t j = 0; j < N; ++j) y[j] = (x[j] - mu) * rs * g[j] + b[j];
  *mean = mu;
  *rstd = rs;
}

template <typename T>
inline void layernorm_bwd_dx_row(const T* __restrict dy, const T* __restrict x,
                                 const T* __restrict g, T mean, T rstd,
                                 T* __restrict dx, int64_t N) {
  T sum_dxhat = T(0), sum_dxhat_xhat = T(0);
  for (int64_t j = 0; j < N; ++j) {
    const T xhat = (x[j] - mean) * rstd;
    const T dxhat = dy[j] * g[j];
    sum_dxhat += dxhat;
    sum_dxhat_xhat += dxhat * xhat;
  }
  const T inv_n = T(1) / static_cast<T>(N);
  for (int64_t j = 0; j < N; ++j) {
    const T xhat = (x[j] - mean) * rstd;
    const T dxhat = dy[j] * g[j];
    dx[j] = rstd * (dxhat - inv_n * sum_dxhat - xhat * inv_n * sum_dxhat_xhat);
  }
}

// Rational [7/6] tanh approximation, clamped where it crosses +-1
// (|x| ~ 4.9718, where |tanh| is within 1e-4 of 1). Branch-free enough to
// vectorize, unlike libm tanh, and its derivative below is exact, so
// analytic gradients match the implemented forward to roundoff.
inline constexpr double kTanhClamp = 4.971786;

template <typename T>
inline T tanh_approx(T x) {
  const T c = static_cast<T>(kTanhClamp);
  x = x < -c ? -c : (x > c ? c : x);
  const T x2 = x * x;
  const T num = x * (T(135135) + x2 * (T(17325) + x2 * (T(378) + x2)));
  const T den = T(135135) + x2 * (T(62370) + x2 * (T(3150) + T(28) * x2));
  return num / den;
}

template <typename T>
inline T tanh_approx_grad(T x) {
  const T c = static_cast<T>(kTanhClamp);
  const T inside = (x >= -c && x <= c) ? T(1) : T(0);
  x = x < -c ? -c : (x > c ? c : x);
  const T x2 = x * x;
  const T num = x * (T(135135) + x2 * (T(17325) + x2 * (T(378) + x2)));
  const T den = T(135135) + x2 * (T(62370) + x2 * (T(3150) + T(28) * x2));
  const T dnum = T(135135) + x2 * (T(51975) + x2 * (T(1890) + T(7) * x2));
  const T dden = x * (T(124740) + x2 * (T(12600) + T(168) * x2));
  return inside * (dnum * den - num * dden) / (den * den);
}

template <typename T>
inline T gelu_scalar(T x) {
  const T c = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  const T u = c * (x + static_cast<T>(0.044715) * x * x * x);
  return static_cast<T>(0.5) * x * (T(1) + tanh_approx(u));
}

template <typename T>
inline T gelu_grad_scalar(T x) {
  const T c = static_cast<T>(0.7978845608028654);
  const T a = static_cast<T>(0.044715);
  const T u = c * (x + a * x * x * x);
  const T du = c * (T(1) + T(3) * a * x * x);
  return static_cast<T>(0.5) * (T(1) + tanh_approx(u)) +
         static_cast<T>(0.5) * x * tanh_approx_grad(u) * du;
}

// Softmax over the first `valid` entries of a row; the rest become zero.
template <typename T>
inline void softmax_row(T* s, int64_t valid, int64_t N) {
  T m = s[0];
  for (int64_t j = 1; j < valid; ++j) m = std::max(m, s[j]);
  T z = T(0);
  for (int64_t j = 0; j < valid; ++j) {
    s[j] = std::exp(s[j] - m);
    z += s[j];
  }
  const T inv = T(1) / z;
  for (int64_t j = 0; j < valid; ++j) s[j] *= inv;
  for (int64_t j = valid; j < N; ++j) s[j] = T(0);
}

// d(softmax) restricted to the valid prefix: ds = p * (dp - <dp, p>).
template <typename T>
inline void softmax_bwd_row(const T* p, const T* dp, T* ds, int64_t valid,
                            int64_t N) {
  T dot = T(0);
  for (int64_t j = 0; j < valid; ++j) dot += dp[j] * p[j];
  for (int64_t j = 0; j < valid; ++j) ds[j] = p[j] * (dp[j] - dot);
  for (int64_t j = valid; j < N; ++j) ds[j] = T(0);
}

}  // namespace detail

// ---- serial reference ------------------------------------------------------

namespace serial {

// C[M,N] = A[M,K] * B[K,N]
template <typename T>
void matmul_nn(const T* a, const T* b, T* c, int64_t M, int64_t K, int64_t N,
               bool accumulate = false) {
  for (int64_t i = 0; i < M; ++i)
    detail::matmul_nn_row(a + i * K, b, c + i * N, K, N, accumulate);
}

// C[M,N] = A[M,K] * B[N,K]^T
template <typename T>
void matmul_nt(const T* a, const T* b, T* c, int64_t M, int64_t K, int64_t N,
               bool accumulate = false) {
  for (int64_t i = 0; i < M; ++i)
    detail::matmul_nt_row(a + i * K, b, c + i * N, K, N, accumulate);
}

// C[K,N] = A[M,K]^T * B[M,N]
template <typename T>
void matmul_tn(const T* a, const T* b, T* c, int64_t M, int64_t K, int64_t N,
               bool accumulate = false) {
  detail::matmul_tn_range(a, b, c, 0, K, M, K, N, accumulate);
}

template <typename T>
void layernorm_fwd(const T* x, const T* g, const T* b, T* y, T* mean, T* rstd,
                   int64_t M, int64_t N) {
  for (int64_t i = 0; i < M; ++i)
    detail::layernorm_fwd_row(x + i * N, g, b, y + i * N, mean + i, rstd + i, N);
}

template <typename T>
void gelu_fwd(const T* x, T* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = detail::gelu_scalar(x[i]);
}

}  // namespace serial

// ---- OpenMP variants --------------------------------------------------------

template <typename T>
void matmul_nn(const T* a, const T* b, T* c, int64_t M, int64_t K, int64_t N,
               bool accumulate = false) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < M; ++i)
    detail::matmul_nn_row(a + i * K, b, c + i * N, K, N, accumulate);
}

template <typename T>
void matmul_nt(const T* a, const T* b, T* c, int64_t M, int64_t K, int64_t N,
               bool accumulate = false) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < M; ++i)
    detail::matmul_nt_row(a + i * K, b, c + i * N, K, N, accumulate);
}

template <typename T>
void matmul_tn(const T* a, const T* b, T* c, int64_t M, int64_t K, int64_t N,
               bool accumulate = false) {
#pragma omp parallel
  {
    const int64_t nt = omp_get_num_threads();
    const int64_t tid = omp_get_thread_num();
    const int64_t chunk = (K + nt - 1) / nt;
    const int64_t k0 = std::min(K, tid * chunk);
    const int64_t k1 = std::min(K, k0 + chunk);
    if (k0 < k1) detail::matmul_tn_range(a, b, c, k0, k1, M, K, N, accumulate);
  }
}

template <typename T>
void layernorm_fwd(const T* x, const T* g, const T* b, T* y, T* mean, T* rstd,
                   int64_t M, int64_t N) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < M; ++i)
    detail::layernorm_fwd_row(x + i * N, g, b, y + i * N, mean + i, rstd + i, N);
}

template <typename T>
void layernorm_bwd_dx(const T* dy, const T* x, const T* g, const T* mean,
                      const T* rstd, T* dx, int64_t M, int64_t N) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < M; ++i)
    detail::layernorm_bwd_dx_row(dy + i * N, x + i * N, g, mean[i], rstd[i],
                                 dx + i * N, N);
}

// Column-wise parameter reductions: each thread owns whole columns, so the
// accumulation order over rows stays serial and results are deterministic.
template <typename T>
void layernorm_bwd_dparams(const T* dy, const T* x, const T* mean,
                           const T* rstd, T* dg, T* db, int64_t M, int64_t N) {
#pragma omp parallel for schedule(static)
  for (int64_t j = 0; j < N; ++j) {
    T sg = T(0), sb = T(0);
    for (int64_t i = 0; i < M; ++i) {
      const T xhat = (x[i * N + j] - mean[i]) * rstd[i];
      sg += dy[i * N + j] * xhat;
      sb += dy[i * N + j];
    }
    dg[j] += sg;
    db[j] += sb;
  }
}

template <typename T>
void add_bias_rows(T* c, const T* bias, int64_t M, int64_t N) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < M; ++i) {
    T* row = c + i * N;
#pragma omp simd
    for (int64_t j = 0; j < N; ++j) row[j] += bias[j];
  }
}

template <typename T>
void bias_grad(const T* dy, T* db, int64_t M, int64_t N) {
#pragma omp parallel for schedule(static)
  for (int64_t j = 0; j < N; ++j) {
    T s = T(0);
    for (int64_t i = 0; i < M; ++i) s += dy[i * N + j];
    db[j] += s;
  }
}

template <typename T>
void gelu_fwd(const T* x, T* y, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] = detail::gelu_scalar(x[i]);
}

template <typename T>
void gelu_bwd(const T* dy, const T* x, T* dx, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) dx[i] = dy[i] * detail::gelu_grad_scalar(x[i]);
}

template <typename T>
void add_inplace(T* x, const T* y, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) x[i] += y[i];
}

// AdamW with decoupled weight decay; element-parallel, deterministic.
template <typename T>
void adamw_update(T* w, const T* g, T* m, T* v, int64_t n, double lr,
                  double beta1, double beta2, double eps, double weight_decay,
                  int64_t step) {
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    const double gi = static_cast<double>(g[i]);
    const double mi = beta1 * m[i] + (1.0 - beta1) * gi;
    const double vi = beta2 * v[i] + (1.0 - beta2) * gi * gi;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double mhat = mi / bc1;
    const double vhat = vi / bc2;
    w[i] = static_cast<T>(w[i] - lr * (mhat / (std::sqrt(vhat) + eps) +
                                       weight_decay * w[i]));
  }
}

}  // namespace othx::nn::kern
