#include <algorithm>
#include <array>
#include <cmath>

#include "kernels_impl.hpp"

namespace voxelforge::simd {
namespace {

constexpr std::uint32_t kCastagnoliReflected = 0x82F63B78u;

constexpr std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1u) ? (c >> 1) ^ kCastagnoliReflected : c >> 1;
    table[i] = c;
  }
  return table;
}

constexpr auto kCrcTable = make_crc_table();

// Lane-dealt reduction; the AVX2 variant keeps the same lane assignment so the
// combined sum rounds identically.
template <typename Term>
double lane_reduce(const float* a, const float* b, std::size_t n, Term term) {
  double lanes[kReductionLanes] = {};
  std::size_t i = 0;
  for (; i + kReductionLanes <= n; i += kReductionLanes) {
    for (std::size_t k = 0; k < kReductionLanes; ++k) lanes[k] += term(a[i + k], b[i + k]);
  }
  double total = 0.0;
  for (double lane : lanes) total += lane;
  double tail = 0.0;
  for (; i < n; ++i) tail += term(a[i], b[i]);
  return total + tail;
}

double sum_abs_diff(const float* a, const float* b, std::size_t n) {
  return lane_reduce(a, b, n, [](float x, float y) {
    return std::fabs(static_cast<double>(x) - static_cast<double>(y));
  });
}

double sum_sq_diff(const float* a, const float* b, std::size_t n) {
  return lane_reduce(a, b, n, [](float x, float y) {
    const double d = static_cast<double>(x) - static_cast<double>(y);
    return d * d;
  });
}

void min_max(const float* a, std::size_t n, float* lo, float* hi) {
  float l = a[0];
  float h = a[0];
  for (std::size_t i = 1; i < n; ++i) {
    l = std::min(l, a[i]);
    h = std::max(h, a[i]);
  }
  *lo = l;
  *hi = h;
}

void normalize(const float* in, float* out, std::size_t n, float lo, float range) {
  for (std::size_t i = 0; i < n; ++i) out[i] = (in[i] - lo) / range;
}

void scale_shift(const float* in, float* out, std::size_t n, float scale, float shift) {
  for (std::size_t i = 0; i < n; ++i) out[i] = in[i] * scale + shift;
}

void accumulate(float* sum, float* weight, const float* src, const float* w, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    sum[i] = sum[i] + src[i] * w[i];
    weight[i] = weight[i] + w[i];
  }
}

void trilinear_row(const SampleGrid& grid, const RowMap& map, float* out, std::size_t n) {
  detail::trilinear_scalar(grid, map, out, 0, n);
}

}  // namespace

namespace detail {

std::uint32_t crc32c_update_scalar(std::uint32_t state, const std::uint8_t* data,
                                   std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) state = kCrcTable[(state ^ data[i]) & 0xFFu] ^ (state >> 8);
  return state;
}

void trilinear_scalar(const SampleGrid& grid, const RowMap& map, float* out,
                      std::size_t begin, std::size_t end) {
  const float xmax = static_cast<float>(grid.nx - 1);
  const float ymax = static_cast<float>(grid.ny - 1);
  const float zmax = static_cast<float>(grid.nz - 1);
  const std::int32_t plane = grid.nx * grid.ny;
  for (std::size_t i = begin; i < end; ++i) {
    const float fi = static_cast<float>(i);
    const float x = map.start[0] + fi * map.step[0];
    const float y = map.start[1] + fi * map.step[1];
    const float z = map.start[2] + fi * map.step[2];
    if (!(x >= 0.0f && x <= xmax && y >= 0.0f && y <= ymax && z >= 0.0f && z <= zmax)) {
      out[i] = 0.0f;
      continue;
    }
    const float xf = std::floor(x);
    const float yf = std::floor(y);
    const float zf = std::floor(z);
    const float fx = x - xf;
    const float fy = y - yf;
    const float fz = z - zf;
    const std::int32_t x0 = static_cast<std::int32_t>(xf);
    const std::int32_t y0 = static_cast<std::int32_t>(yf);
    const std::int32_t z0 = static_cast<std::int32_t>(zf);
    const std::int32_t x1 = std::min(x0 + 1, grid.nx - 1);
    const std::int32_t y1 = std::min(y0 + 1, grid.ny - 1);
    const std::int32_t z1 = std::min(z0 + 1, grid.nz - 1);
    const float* d = grid.data;
    const float v000 = d[z0 * plane + y0 * grid.nx + x0];
    const float v001 = d[z0 * plane + y0 * grid.nx + x1];
    const float v010 = d[z0 * plane + y1 * grid.nx + x0];
    const float v011 = d[z0 * plane + y1 * grid.nx + x1];
    const float v100 = d[z1 * plane + y0 * grid.nx + x0];
    const float v101 = d[z1 * plane + y0 * grid.nx + x1];
    const float v110 = d[z1 * plane + y1 * grid.nx + x0];
    const float v111 = d[z1 * plane + y1 * grid.nx + x1];
    const float c00 = v000 + fx * (v001 - v000);
    const float c01 = v010 + fx * (v011 - v010);
    const float c10 = v100 + fx * (v101 - v100);
    const float c11 = v110 + fx * (v111 - v110);
    const float c0 = c00 + fy * (c01 - c00);
    const float c1 = c10 + fy * (c11 - c10);
    out[i] = c0 + fz * (c1 - c0);
  }
}

}  // namespace detail

const Kernels& scalar_kernels() {
  static const Kernels table{
      Isa::Scalar, "scalar",   sum_abs_diff,  sum_sq_diff,   min_max,
      normalize,   scale_shift, accumulate,    trilinear_row, detail::crc32c_update_scalar,
  };
  return table;
}

}  // namespace voxelforge::simd
