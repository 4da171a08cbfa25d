#pragma once

#include "owr/simd.hpp"

namespace owr::simd::detail {

extern const KernelTable kScalarTable;
#if defined(OWR_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif
#if defined(OWR_HAVE_NEON)
extern const KernelTable kNeonTable;
#endif

}  // namespace owr::simd::detail
