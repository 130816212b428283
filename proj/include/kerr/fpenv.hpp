#pragma once

#if defined(__SSE__) || defined(__x86_64__)
#include <xmmintrin.h>
#endif

namespace kerr {

/// Flush denormals to zero on the calling thread. Undriven evolution damps
/// high Fock levels into the denormal range, where arithmetic is ~50x
/// slower. Values below 1e-308 carry no physics here.
inline void enable_flush_to_zero() noexcept {
#if defined(__SSE__) || defined(__x86_64__)
    _mm_setcsr(_mm_getcsr() | 0x8040);  // FTZ | DAZ
#endif
}

}  // namespace kerr
