#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace specbench {

/// Raises glibc's mmap and trim thresholds so large tensor buffers are reused
/// across training steps.
inline void tune_allocator() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 512 << 20);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace specbench
