#ifndef NNCM_ALLOCATOR_HPP
#define NNCM_ALLOCATOR_HPP

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace nncm
{

/// Keeps glibc from returning the multi-megabyte training buffers (and
/// Eigen's GEMM packing blocks) to the OS after every epoch. Call once
/// from main() in processes that train.
inline void keep_heap_resident()
{
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}

#endif
