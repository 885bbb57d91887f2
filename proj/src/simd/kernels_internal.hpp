#pragma once

#include "forgeguard/simd/kernels.hpp"

namespace forgeguard::simd::detail {

// Defined by the AVX2 translation unit, which is only built on x86-64.
// Returns the table without checking CPU support.
const KernelTable& avx2_table();

}  // namespace forgeguard::simd::detail
