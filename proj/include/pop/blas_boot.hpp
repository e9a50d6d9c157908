#pragma once

// OpenBLAS 0.3.x with DYNAMIC_ARCH misreads some virtualized Xeons and falls
// back to the Prescott kernels, which costs about 4x on dgemm. Pinning the
// core type before OpenBLAS initializes fixes it. The env var must be set
// from an ELF constructor that runs earlier than OpenBLAS's own, which only
// works when libopenblas is linked statically; CMake enforces the static link.
//
// cpu_init is required: __builtin_cpu_supports reads a lazily initialized
// model table that is not yet populated this early in startup.

#include <cstdlib>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace pop::detail {

#if defined(__GNUC__) && defined(__x86_64__)
__attribute__((constructor(101))) static void pin_openblas_core() {
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx512f"))
    setenv("OPENBLAS_CORETYPE", "SKYLAKEX", 0);
}
#endif

#if defined(__GLIBC__)
// Forward passes allocate multi-megabyte activation buffers every step; with
// default thresholds glibc serves them via mmap and returns them on free, so
// training spends a third of its wall clock in page faults. Keeping large
// blocks on the heap removes that cost without changing any result.
__attribute__((constructor(102))) static void tune_malloc() {
  mallopt(M_MMAP_MAX, 0);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
}
#endif

}  // namespace pop::detail
