#pragma once

// Inner-loop kernels with a portable scalar reference and an AVX2/FMA variant
// chosen at runtime. Set CIRCQA_KERNELS=scalar to force the reference path.

#include <complex>
#include <cstddef>
#include <string_view>

namespace circqa {

using cplx = std::complex<double>;

struct KernelTable {
  const char* name;

  /// psi <- (M on qubit `target`) psi. M is row-major 2x2.
  void (*apply_1q)(cplx* psi, std::size_t n_qubits, std::size_t target, const cplx* m);
  /// As apply_1q, acting only on the control = 1 subspace.
  void (*apply_c1q)(cplx* psi, std::size_t n_qubits, std::size_t control, std::size_t target, const cplx* m);
  /// <lambda| M_target |psi>, restricted to control = 1 when control >= 0.
  cplx (*braket_1q)(const cplx* lambda, const cplx* psi, std::size_t n_qubits, std::size_t target, long control,
                    const cplx* m);

  double (*dot)(const double* a, const double* b, std::size_t n);
  /// y = W x with W row-major rows x cols.
  void (*matvec)(const double* w, const double* x, double* y, std::size_t rows, std::size_t cols);
  /// out += W^T g.
  void (*matvec_t)(const double* w, const double* g, double* out, std::size_t rows, std::size_t cols);
  /// G += g x^T.
  void (*outer_acc)(double* grad, const double* g, const double* x, std::size_t rows, std::size_t cols);
  /// One Adam update; bc1/bc2 are the bias corrections 1 - beta^t.
  void (*adam_step)(double* p, const double* g, double* m, double* v, std::size_t n, double lr, double beta1,
                    double beta2, double eps, double bc1, double bc2);
};

const KernelTable& scalar_kernels();
/// nullptr when the variant was not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels();

/// The table used by the backends and the optimizer.
const KernelTable& kernels();
/// Overrides the selection ("scalar" or "avx2"); returns false if unavailable.
bool select_kernels(std::string_view name);

}  // namespace circqa
