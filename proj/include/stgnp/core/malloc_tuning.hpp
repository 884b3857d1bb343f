#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace stgnp {

/// Keep large array blocks on the heap instead of round-tripping them through
/// mmap/munmap on every tape step; the workload allocates and frees hundreds
/// of megabytes of >128KB buffers per training batch.
inline void tune_allocator() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace stgnp
