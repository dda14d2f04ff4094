#pragma once

#include "voxelforge/simd/kernels.hpp"

namespace voxelforge::simd::detail {

// Scalar pieces reused by the vector variants for loop tails.
std::uint32_t crc32c_update_scalar(std::uint32_t state, const std::uint8_t* data,
                                   std::size_t n);
void trilinear_scalar(const SampleGrid& grid, const RowMap& map, float* out,
                      std::size_t begin, std::size_t end);

#if defined(VOXELFORGE_HAVE_AVX2)
const Kernels& avx2_table();
#endif

}  // namespace voxelforge::simd::detail
