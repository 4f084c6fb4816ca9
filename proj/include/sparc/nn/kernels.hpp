#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sparc::nn {

/// Kernel-level thread count (1 = serial). Shared by every OpenMP region;
/// set once per process (or per learner) before training.
void set_kernel_threads(int n);
int kernel_threads();

namespace kern {

// All kernels accumulate in a fixed order regardless of thread count: the
// parallel axis always indexes independent outputs, so serial and OpenMP
// runs are bitwise identical. Reductions are written as 4-way blocked
// axpy loops, which keeps the order fixed while still vectorising.

template <typename T>
std::vector<T>& scratch(int slot, std::size_t n) {
  thread_local std::array<std::vector<T>, 6> bufs;
  auto& b = bufs[slot];
  if (b.size() < n) b.resize(n);
  return b;
}

/// y(B,M) = x(B,K) @ w(K,M) [+ bias(M)]. Row-major everywhere.
template <typename T>
void matmul_axpy(const T* x, const T* w, const T* bias, T* y, int B, int K,
                 int M) {
  const int nt = kernel_threads();
#ifdef _OPENMP
#pragma omp parallel for num_threads(nt) if (nt > 1 && B > 1) schedule(static)
#endif
  for (int bi = 0; bi < B; ++bi) {
    T* yr = y + static_cast<std::size_t>(bi) * M;
    if (bias)
      std::memcpy(yr, bias, sizeof(T) * M);
    else
      std::memset(yr, 0, sizeof(T) * M);
    const T* xr = x + static_cast<std::size_t>(bi) * K;
    int i = 0;
    for (; i + 4 <= K; i += 4) {
      const T x0 = xr[i], x1 = xr[i + 1], x2 = xr[i + 2], x3 = xr[i + 3];
      if (x0 == T(0) && x1 == T(0) && x2 == T(0) && x3 == T(0)) continue;
      const T* w0 = w + static_cast<std::size_t>(i) * M;
      const T* w1 = w0 + M;
      const T* w2 = w1 + M;
      const T* w3 = w2 + M;
      for (int o = 0; o < M; ++o)
        yr[o] += x0 * w0[o] + x1 * w1[o] + x2 * w2[o] + x3 * w3[o];
    }
    for (; i < K; ++i) {
      const T xi = xr[i];
      if (xi == T(0)) continue;
      const T* wr = w + static_cast<std::size_t>(i) * M;
      for (int o = 0; o < M; ++o) yr[o] += xi * wr[o];
    }
  }
}

template <typename T>
void dense_forward(const T* x, const T* w, const T* b, T* y, int B, int in,
                   int out) {
  matmul_axpy(x, w, b, y, B, in, out);
}

/// dx(B,in) = up(B,out) @ w^T. Transposes w into scratch once per call so
/// the inner loops stay contiguous.
template <typename T>
void dense_backward_input(const T* up, const T* w, T* dx, int B, int in,
                          int out) {
  auto& wt = scratch<T>(0, static_cast<std::size_t>(in) * out);
  for (int i = 0; i < in; ++i)
    for (int o = 0; o < out; ++o)
      wt[static_cast<std::size_t>(o) * in + i] =
          w[static_cast<std::size_t>(i) * out + o];
  matmul_axpy(up, wt.data(), static_cast<const T*>(nullptr), dx, B, out, in);
}

/// dW[i][o] += sum_b x[b][i] * up[b][o]; db[o] += sum_b up[b][o].
/// Accumulates into dW/db (callers zero them or accumulate across calls).
template <typename T>
void dense_backward_params(const T* x, const T* up, T* dw, T* db, int B,
                           int in, int out) {
  const int nt = kernel_threads();
#ifdef _OPENMP
#pragma omp parallel for num_threads(nt) if (nt > 1 && in > 8) schedule(static)
#endif
  for (int i = 0; i < in; ++i) {
    T* dwr = dw + static_cast<std::size_t>(i) * out;
    int bi = 0;
    for (; bi + 4 <= B; bi += 4) {
      const T x0 = x[static_cast<std::size_t>(bi) * in + i];
      const T x1 = x[static_cast<std::size_t>(bi + 1) * in + i];
      const T x2 = x[static_cast<std::size_t>(bi + 2) * in + i];
      const T x3 = x[static_cast<std::size_t>(bi + 3) * in + i];
      if (x0 == T(0) && x1 == T(0) && x2 == T(0) && x3 == T(0)) continue;
      const T* u0 = up + static_cast<std::size_t>(bi) * out;
      const T* u1 = u0 + out;
      const T* u2 = u1 + out;
      const T* u3 = u2 + out;
      for (int o = 0; o < out; ++o)
        dwr[o] += x0 * u0[o] + x1 * u1[o] + x2 * u2[o] + x3 * u3[o];
    }
    for (; bi < B; ++bi) {
      const T xi = x[static_cast<std::size_t>(bi) * in + i];
      if (xi == T(0)) continue;
      const T* ur = up + static_cast<std::size_t>(bi) * out;
      for (int o = 0; o < out; ++o) dwr[o] += xi * ur[o];
    }
  }
  for (int bi = 0; bi < B; ++bi) {
    const T* ur = up + static_cast<std::size_t>(bi) * out;
    for (int o = 0; o < out; ++o) db[o] += ur[o];
  }
}

// Conv1d over (B, C, L) row-major, weights (out_ch, in_ch, K), zero same-
// padding with pad_left on the left. Implemented as im2col + matmul so the
// dense kernels carry all the arithmetic.

template <typename T>
void im2col(const T* x, T* cols, int B, int C, int L, int K, int stride,
            int pad_left, int lout) {
  const std::size_t row = static_cast<std::size_t>(C) * K;
  for (int b = 0; b < B; ++b) {
    const T* xb = x + static_cast<std::size_t>(b) * C * L;
    for (int l = 0; l < lout; ++l) {
      T* r = cols + (static_cast<std::size_t>(b) * lout + l) * row;
      const int start = l * stride - pad_left;
      for (int ic = 0; ic < C; ++ic) {
        const T* xc = xb + static_cast<std::size_t>(ic) * L;
        for (int k = 0; k < K; ++k) {
          const int j = start + k;
          r[static_cast<std::size_t>(ic) * K + k] =
              (j >= 0 && j < L) ? xc[j] : T(0);
        }
      }
    }
  }
}

/// (out_ch, in_ch, K) -> (in_ch*K, out_ch), the matmul-ready layout.
template <typename T>
void conv_weights_to_cols(const T* w, T* wd, int cin, int cout, int K) {
  for (int oc = 0; oc < cout; ++oc)
    for (int ic = 0; ic < cin; ++ic)
      for (int k = 0; k < K; ++k)
        wd[(static_cast<std::size_t>(ic) * K + k) * cout + oc] =
            w[(static_cast<std::size_t>(oc) * cin + ic) * K + k];
}

template <typename T>
void conv1d_forward(const T* x, const T* w, const T* b, T* y, int B, int cin,
                    int lin, int cout, int K, int stride, int pad_left,
                    int lout) {
  const std::size_t row = static_cast<std::size_t>(cin) * K;
  const std::size_t rows = static_cast<std::size_t>(B) * lout;
  auto& cols = scratch<T>(1, rows * row);
  auto& wd = scratch<T>(2, row * cout);
  auto& yc = scratch<T>(3, rows * cout);
  im2col(x, cols.data(), B, cin, lin, K, stride, pad_left, lout);
  conv_weights_to_cols(w, wd.data(), cin, cout, K);
  matmul_axpy(cols.data(), wd.data(), b, yc.data(), static_cast<int>(rows),
              static_cast<int>(row), cout);
  for (int bi = 0; bi < B; ++bi)
    for (int l = 0; l < lout; ++l) {
      const T* src = yc.data() + (static_cast<std::size_t>(bi) * lout + l) * cout;
      T* dst = y + static_cast<std::size_t>(bi) * cout * lout;
      for (int oc = 0; oc < cout; ++oc)
        dst[static_cast<std::size_t>(oc) * lout + l] = src[oc];
    }
}

template <typename T>
void conv1d_backward_input(const T* up, const T* w, T* dx, int B, int cin,
                           int lin, int cout, int K, int stride, int pad_left,
                           int lout) {
  const std::size_t row = static_cast<std::size_t>(cin) * K;
  const std::size_t rows = static_cast<std::size_t>(B) * lout;
  auto& upc = scratch<T>(1, rows * cout);
  for (int bi = 0; bi < B; ++bi)
    for (int l = 0; l < lout; ++l) {
      const T* src = up + static_cast<std::size_t>(bi) * cout * lout;
      T* dst = upc.data() + (static_cast<std::size_t>(bi) * lout + l) * cout;
      for (int oc = 0; oc < cout; ++oc)
        dst[oc] = src[static_cast<std::size_t>(oc) * lout + l];
    }
  // d_cols = up_cols @ w_cols^T; w_cols^T is (cout, cin*K) == w reshaped
  auto& wt = scratch<T>(2, row * cout);
  for (int oc = 0; oc < cout; ++oc)
    for (int ic = 0; ic < cin; ++ic)
      for (int k = 0; k < K; ++k)
        wt[static_cast<std::size_t>(oc) * row + static_cast<std::size_t>(ic) * K + k] =
            w[(static_cast<std::size_t>(oc) * cin + ic) * K + k];
  auto& dcols = scratch<T>(3, rows * row);
  matmul_axpy(upc.data(), wt.data(), static_cast<const T*>(nullptr),
              dcols.data(), static_cast<int>(rows), cout,
              static_cast<int>(row));
  // col2im scatter-add, fixed (l, ic, k) order per item
  const int nt = kernel_threads();
#ifdef _OPENMP
#pragma omp parallel for num_threads(nt) if (nt > 1 && B > 1) schedule(static)
#endif
  for (int bi = 0; bi < B; ++bi) {
    T* dxb = dx + static_cast<std::size_t>(bi) * cin * lin;
    std::memset(dxb, 0, sizeof(T) * cin * lin);
    for (int l = 0; l < lout; ++l) {
      const T* r = dcols.data() + (static_cast<std::size_t>(bi) * lout + l) * row;
      const int start = l * stride - pad_left;
      for (int ic = 0; ic < cin; ++ic)
        for (int k = 0; k < K; ++k) {
          const int j = start + k;
          if (j >= 0 && j < lin)
            dxb[static_cast<std::size_t>(ic) * lin + j] +=
                r[static_cast<std::size_t>(ic) * K + k];
        }
    }
  }
}

template <typename T>
void conv1d_backward_params(const T* x, const T* up, T* dw, T* db, int B,
                            int cin, int lin, int cout, int K, int stride,
                            int pad_left, int lout) {
  const std::size_t row = static_cast<std::size_t>(cin) * K;
  const std::size_t rows = static_cast<std::size_t>(B) * lout;
  auto& cols = scratch<T>(1, rows * row);
  auto& upc = scratch<T>(2, rows * cout);
  im2col(x, cols.data(), B, cin, lin, K, stride, pad_left, lout);
  for (int bi = 0; bi < B; ++bi)
    for (int l = 0; l < lout; ++l) {
      const T* src = up + static_cast<std::size_t>(bi) * cout * lout;
      T* dst = upc.data() + (static_cast<std::size_t>(bi) * lout + l) * cout;
      for (int oc = 0; oc < cout; ++oc)
        dst[oc] = src[static_cast<std::size_t>(oc) * lout + l];
    }
  auto& dwc = scratch<T>(3, row * cout);
  std::fill(dwc.begin(), dwc.begin() + row * cout, T(0));
  auto& dbc = scratch<T>(4, static_cast<std::size_t>(cout));
  std::fill(dbc.begin(), dbc.begin() + cout, T(0));
  dense_backward_params(cols.data(), upc.data(), dwc.data(), dbc.data(),
                        static_cast<int>(rows), static_cast<int>(row), cout);
  for (int oc = 0; oc < cout; ++oc) {
    db[oc] += dbc[oc];
    for (int ic = 0; ic < cin; ++ic)
      for (int k = 0; k < K; ++k)
        dw[(static_cast<std::size_t>(oc) * cin + ic) * K + k] +=
            dwc[(static_cast<std::size_t>(ic) * K + k) * cout + oc];
  }
}

template <typename T>
void relu_forward(const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(const T* up, const T* y, T* dx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dx[i] = y[i] > T(0) ? up[i] : T(0);
}

template <typename T>
void tanh_forward(const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    y[i] = static_cast<T>(std::tanh(static_cast<double>(x[i])));
}

template <typename T>
void tanh_backward(const T* up, const T* y, T* dx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dx[i] = up[i] * (T(1) - y[i] * y[i]);
}

}  // namespace kern

/// Naive reference kernels: textbook loop nests with a different
/// accumulation order. Kept as the independent oracle for the optimized
/// kernels and as the baseline in kernel_bench.
namespace ref {

template <typename T>
void dense_forward(const T* x, const T* w, const T* b, T* y, int B, int in,
                   int out) {
  for (int bi = 0; bi < B; ++bi)
    for (int o = 0; o < out; ++o) {
      double acc = static_cast<double>(b[o]);
      for (int i = 0; i < in; ++i)
        acc += static_cast<double>(x[bi * in + i]) *
               static_cast<double>(w[static_cast<std::size_t>(i) * out + o]);
      y[static_cast<std::size_t>(bi) * out + o] = static_cast<T>(acc);
    }
}

template <typename T>
void dense_backward_input(const T* up, const T* w, T* dx, int B, int in,
                          int out) {
  for (int bi = 0; bi < B; ++bi)
    for (int i = 0; i < in; ++i) {
      double acc = 0;
      for (int o = 0; o < out; ++o)
        acc += static_cast<double>(up[bi * out + o]) *
               static_cast<double>(w[static_cast<std::size_t>(i) * out + o]);
      dx[static_cast<std::size_t>(bi) * in + i] = static_cast<T>(acc);
    }
}

template <typename T>
void conv1d_forward(const T* x, const T* w, const T* b, T* y, int B, int cin,
                    int lin, int cout, int K, int stride, int pad_left,
                    int lout) {
  for (int bi = 0; bi < B; ++bi)
    for (int oc = 0; oc < cout; ++oc)
      for (int l = 0; l < lout; ++l) {
        double acc = static_cast<double>(b[oc]);
        for (int ic = 0; ic < cin; ++ic)
          for (int k = 0; k < K; ++k) {
            const int j = l * stride - pad_left + k;
            if (j >= 0 && j < lin)
              acc += static_cast<double>(
                         w[(static_cast<std::size_t>(oc) * cin + ic) * K + k]) *
                     static_cast<double>(
                         x[(static_cast<std::size_t>(bi) * cin + ic) * lin + j]);
          }
        y[(static_cast<std::size_t>(bi) * cout + oc) * lout + l] =
            static_cast<T>(acc);
      }
}

}  // namespace ref

}  // namespace sparc::nn
