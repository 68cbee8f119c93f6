#include <immintrin.h>

#include <cmath>

#include "circqa/kernels.hpp"

namespace circqa {

namespace {

// Two complex numbers per register: [re0, im0, re1, im1].
inline __m256d cmul_scalar(__m256d z, cplx c) {
  const __m256d re = _mm256_set1_pd(c.real());
  const __m256d im = _mm256_set1_pd(c.imag());
  const __m256d swapped = _mm256_permute_pd(z, 0b0101);
  return _mm256_addsub_pd(_mm256_mul_pd(z, re), _mm256_mul_pd(swapped, im));
}

inline void pair_update(cplx* lo, cplx* hi, const cplx* m) {
  const __m256d a = _mm256_loadu_pd(reinterpret_cast<const double*>(lo));
  const __m256d b = _mm256_loadu_pd(reinterpret_cast<const double*>(hi));
  const __m256d na = _mm256_add_pd(cmul_scalar(a, m[0]), cmul_scalar(b, m[1]));
  const __m256d nb = _mm256_add_pd(cmul_scalar(a, m[2]), cmul_scalar(b, m[3]));
  _mm256_storeu_pd(reinterpret_cast<double*>(lo), na);
  _mm256_storeu_pd(reinterpret_cast<double*>(hi), nb);
}

void apply_1q(cplx* psi, std::size_t n_qubits, std::size_t target, const cplx* m) {
  if (target == 0) {
    scalar_kernels().apply_1q(psi, n_qubits, target, m);
    return;
  }
  const std::size_t dim = std::size_t{1} << n_qubits;
  const std::size_t bit = std::size_t{1} << target;
  for (std::size_t base = 0; base < dim; base += 2 * bit) {
    for (std::size_t i = base; i < base + bit; i += 2) pair_update(psi + i, psi + i + bit, m);
  }
}

void apply_c1q(cplx* psi, std::size_t n_qubits, std::size_t control, std::size_t target, const cplx* m) {
  if (target == 0 || control == 0) {
    scalar_kernels().apply_c1q(psi, n_qubits, control, target, m);
    return;
  }
  const std::size_t dim = std::size_t{1} << n_qubits;
  const std::size_t bit = std::size_t{1} << target;
  const std::size_t cbit = std::size_t{1} << control;
  // indices i and i+1 share every bit above 0, so they share the control bit
  for (std::size_t i = 0; i < dim; i += 2) {
    if ((i & bit) || !(i & cbit)) continue;
    pair_update(psi + i, psi + i + bit, m);
  }
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void matvec(const double* w, const double* x, double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot(w + r * cols, x, cols);
}

void axpy(double* out, const double* x, double a, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_fmadd_pd(_mm256_loadu_pd(x + i), av, _mm256_loadu_pd(out + i)));
  }
  for (; i < n; ++i) out[i] += x[i] * a;
}

void matvec_t(const double* w, const double* g, double* out, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy(out, w + r * cols, g[r], cols);
}

void outer_acc(double* grad, const double* g, const double* x, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy(grad + r * cols, x, g[r], cols);
}

void adam_step(double* p, const double* g, double* m, double* v, std::size_t n, double lr, double beta1,
               double beta2, double eps, double bc1, double bc2) {
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d b1c = _mm256_set1_pd(1.0 - beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d b2c = _mm256_set1_pd(1.0 - beta2);
  const __m256d lrv = _mm256_set1_pd(lr);
  const __m256d epsv = _mm256_set1_pd(eps);
  const __m256d bc1v = _mm256_set1_pd(bc1);
  const __m256d bc2v = _mm256_set1_pd(bc2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gv = _mm256_loadu_pd(g + i);
    const __m256d mv = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(b1c, gv));
    const __m256d vv =
        _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)), _mm256_mul_pd(b2c, _mm256_mul_pd(gv, gv)));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(_mm256_div_pd(vv, bc2v)), epsv);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(lrv, _mm256_div_pd(mv, bc1v)), denom);
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
  }
  if (i < n) scalar_kernels().adam_step(p + i, g + i, m + i, v + i, n - i, lr, beta1, beta2, eps, bc1, bc2);
}

}  // namespace

const KernelTable& avx2_kernel_table() {
  static const KernelTable table{"avx2",   apply_1q, apply_c1q, scalar_kernels().braket_1q, dot, matvec, matvec_t,
                                 outer_acc, adam_step};
  return table;
}

}  // namespace circqa
