#include <cmath>

#include "circqa/kernels.hpp"

namespace circqa {

namespace {

void apply_1q(cplx* psi, std::size_t n_qubits, std::size_t target, const cplx* m) {
  const std::size_t dim = std::size_t{1} << n_qubits;
  const std::size_t bit = std::size_t{1} << target;
  for (std::size_t i = 0; i < dim; ++i) {
    if (i & bit) continue;
    const cplx a = psi[i];
    const cplx b = psi[i | bit];
    psi[i] = m[0] * a + m[1] * b;
    psi[i | bit] = m[2] * a + m[3] * b;
  }
}

void apply_c1q(cplx* psi, std::size_t n_qubits, std::size_t control, std::size_t target, const cplx* m) {
  const std::size_t dim = std::size_t{1} << n_qubits;
  const std::size_t bit = std::size_t{1} << target;
  const std::size_t cbit = std::size_t{1} << control;
  for (std::size_t i = 0; i < dim; ++i) {
    if ((i & bit) || !(i & cbit)) continue;
    const cplx a = psi[i];
    const cplx b = psi[i | bit];
    psi[i] = m[0] * a + m[1] * b;
    psi[i | bit] = m[2] * a + m[3] * b;
  }
}

cplx braket_1q(const cplx* lambda, const cplx* psi, std::size_t n_qubits, std::size_t target, long control,
               const cplx* m) {
  const std::size_t dim = std::size_t{1} << n_qubits;
  const std::size_t bit = std::size_t{1} << target;
  cplx acc = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    if (i & bit) continue;
    if (control >= 0 && !(i & (std::size_t{1} << control))) continue;
    const cplx a = psi[i];
    const cplx b = psi[i | bit];
    acc += std::conj(lambda[i]) * (m[0] * a + m[1] * b);
    acc += std::conj(lambda[i | bit]) * (m[2] * a + m[3] * b);
  }
  return acc;
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void matvec(const double* w, const double* x, double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot(w + r * cols, x, cols);
}

void matvec_t(const double* w, const double* g, double* out, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double gr = g[r];
    const double* row = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) out[c] += row[c] * gr;
  }
}

void outer_acc(double* grad, const double* g, const double* x, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double gr = g[r];
    double* row = grad + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += gr * x[c];
  }
}

void adam_step(double* p, const double* g, double* m, double* v, std::size_t n, double lr, double beta1,
               double beta2, double eps, double bc1, double bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar", apply_1q, apply_c1q, braket_1q, dot, matvec, matvec_t, outer_acc,
                                 adam_step};
  return table;
}

}  // namespace circqa
