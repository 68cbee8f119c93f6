#include <cstdlib>
#include <string>

#include "circqa/kernels.hpp"

namespace circqa {

#if defined(CIRCQA_HAVE_AVX2)
const KernelTable& avx2_kernel_table();
#endif

const KernelTable* avx2_kernels() {
#if defined(CIRCQA_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &avx2_kernel_table() : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const KernelTable* initial_selection() {
  const char* env = std::getenv("CIRCQA_KERNELS");
  if (env && std::string(env) == "scalar") return &scalar_kernels();
  if (const auto* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

const KernelTable*& active() {
  static const KernelTable* table = initial_selection();
  return table;
}

}  // namespace

const KernelTable& kernels() { return *active(); }

bool select_kernels(std::string_view name) {
  if (name == "scalar") {
    active() = &scalar_kernels();
    return true;
  }
  if (name == "avx2" && avx2_kernels()) {
    active() = avx2_kernels();
    return true;
  }
  return false;
}

}  // namespace circqa
