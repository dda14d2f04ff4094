#pragma once

// Data-parallel inner loops shared by the volume, metric, patch, registration
// and record modules. Each kernel has a scalar reference implementation and,
// where the CPU allows it, an AVX2 (or SSE4.2 for CRC) variant. The variants
// perform the same IEEE operations in the same order, so results are
// bit-identical across ISAs; tests/test_simd.cpp enforces this.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace voxelforge::simd {

enum class Isa { Scalar, Avx2 };

/// Row-major (z, y, x) float grid sampled by trilinear_row.
struct SampleGrid {
  const float* data = nullptr;
  std::int32_t nx = 0;
  std::int32_t ny = 0;
  std::int32_t nz = 0;
};

/// Continuous index coordinates of row element i are start + i * step.
struct RowMap {
  float start[3] = {0.0f, 0.0f, 0.0f};
  float step[3] = {1.0f, 0.0f, 0.0f};
};

/// Lane layout used by the double-precision reductions: elements are dealt
/// round-robin into kReductionLanes partial sums, then the lanes are added in
/// order, then the tail.
inline constexpr std::size_t kReductionLanes = 8;

struct Kernels {
  Isa isa;
  std::string_view name;

  double (*sum_abs_diff)(const float* a, const float* b, std::size_t n);
  double (*sum_sq_diff)(const float* a, const float* b, std::size_t n);
  void (*min_max)(const float* a, std::size_t n, float* lo, float* hi);
  // out = (in - lo) / range
  void (*normalize)(const float* in, float* out, std::size_t n, float lo, float range);
  // out = in * scale + shift
  void (*scale_shift)(const float* in, float* out, std::size_t n, float scale, float shift);
  // sum += src * w; weight += w
  void (*accumulate)(float* sum, float* weight, const float* src, const float* w,
                     std::size_t n);
  // Samples outside [0, n-1] on any axis produce 0.
  void (*trilinear_row)(const SampleGrid& grid, const RowMap& map, float* out,
                        std::size_t n);
  // Raw CRC-32C register update (no pre/post inversion).
  std::uint32_t (*crc32c_update)(std::uint32_t state, const std::uint8_t* data,
                                 std::size_t n);
};

const Kernels& scalar_kernels();

/// nullptr when the binary was built without AVX2 support or the CPU lacks it.
const Kernels* avx2_kernels();

/// Every variant usable on this machine, scalar first.
std::vector<const Kernels*> available_kernels();

/// Selected once per process: the widest supported ISA unless the
/// VOXELFORGE_SIMD environment variable is set to "scalar".
const Kernels& active();

}  // namespace voxelforge::simd
