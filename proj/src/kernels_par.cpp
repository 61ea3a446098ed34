// OpenMP kernels. Work is split so each output element has a single writer and
// the per-element accumulation order matches the serial reference exactly;
// results are bit-identical to pyrflow::kernels::ref for any thread count.
// Loops below the size thresholds stay on the calling thread.

#include <cmath>

#include "pyrflow/kernels.hpp"

namespace pyrflow::kernels::par {

namespace {
[[maybe_unused]] constexpr long long kParN = 1 << 14;     // elementwise threshold
[[maybe_unused]] constexpr long long kParWork = 1 << 15;  // fused multiply-add threshold
}  // namespace

#if defined(_OPENMP)
#define PF_PRAGMA(x) _Pragma(#x)
#define PF_OMP_FOR(cond) PF_PRAGMA(omp parallel for schedule(static) if (cond))
#else
#define PF_OMP_FOR(cond)
#endif

#include "kernels_body.inc"

#undef PF_OMP_FOR
#ifdef PF_PRAGMA
#undef PF_PRAGMA
#endif

}  // namespace pyrflow::kernels::par
