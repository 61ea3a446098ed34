// Serial reference kernels. No threading pragmas; this build is the oracle the
// OpenMP kernels are tested against.

#include <cmath>

#include "pyrflow/kernels.hpp"

namespace pyrflow::kernels::ref {

namespace {
[[maybe_unused]] constexpr long long kParN = 1;
[[maybe_unused]] constexpr long long kParWork = 1;
}  // namespace

#define PF_OMP_FOR(cond)
#include "kernels_body.inc"
#undef PF_OMP_FOR

}  // namespace pyrflow::kernels::ref
