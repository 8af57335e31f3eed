#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace fcntag {

/// Keeps large freed blocks in the heap instead of returning them to the OS.
/// Training allocates and frees the same multi-megabyte buffers every step;
/// without this, glibc maps and unmaps them each time and page faults dominate.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 256 << 20);
#endif
}

}  // namespace fcntag
