// Compiled with -mavx2 -msse4.2; only reached after a runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <cstring>

#include "kernels_impl.hpp"

namespace voxelforge::simd {
namespace {

static_assert(kReductionLanes == 8, "two 4-wide double accumulators");

inline __m256d abs_pd(__m256d v) {
  return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v);
}

inline double combine_lanes(__m256d lo, __m256d hi) {
  alignas(32) double lanes[8];
  _mm256_store_pd(lanes, lo);
  _mm256_store_pd(lanes + 4, hi);
  double total = 0.0;
  for (double lane : lanes) total += lane;
  return total;
}

double sum_abs_diff(const float* a, const float* b, std::size_t n) {
  __m256d acc_lo = _mm256_setzero_pd();
  __m256d acc_hi = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 va = _mm256_loadu_ps(a + i);
    const __m256 vb = _mm256_loadu_ps(b + i);
    const __m256d dlo = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(va)),
                                      _mm256_cvtps_pd(_mm256_castps256_ps128(vb)));
    const __m256d dhi = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(va, 1)),
                                      _mm256_cvtps_pd(_mm256_extractf128_ps(vb, 1)));
    acc_lo = _mm256_add_pd(acc_lo, abs_pd(dlo));
    acc_hi = _mm256_add_pd(acc_hi, abs_pd(dhi));
  }
  const double total = combine_lanes(acc_lo, acc_hi);
  double tail = 0.0;
  for (; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    tail += d < 0.0 ? -d : d;
  }
  return total + tail;
}

double sum_sq_diff(const float* a, const float* b, std::size_t n) {
  __m256d acc_lo = _mm256_setzero_pd();
  __m256d acc_hi = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 va = _mm256_loadu_ps(a + i);
    const __m256 vb = _mm256_loadu_ps(b + i);
    const __m256d dlo = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(va)),
                                      _mm256_cvtps_pd(_mm256_castps256_ps128(vb)));
    const __m256d dhi = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(va, 1)),
                                      _mm256_cvtps_pd(_mm256_extractf128_ps(vb, 1)));
    acc_lo = _mm256_add_pd(acc_lo, _mm256_mul_pd(dlo, dlo));
    acc_hi = _mm256_add_pd(acc_hi, _mm256_mul_pd(dhi, dhi));
  }
  const double total = combine_lanes(acc_lo, acc_hi);
  double tail = 0.0;
  for (; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    tail += d * d;
  }
  return total + tail;
}

void min_max(const float* a, std::size_t n, float* lo, float* hi) {
  std::size_t i = 0;
  float l = a[0];
  float h = a[0];
  if (n >= 8) {
    __m256 vl = _mm256_loadu_ps(a);
    __m256 vh = vl;
    for (i = 8; i + 8 <= n; i += 8) {
      const __m256 v = _mm256_loadu_ps(a + i);
      vl = _mm256_min_ps(vl, v);
      vh = _mm256_max_ps(vh, v);
    }
    alignas(32) float bl[8];
    alignas(32) float bh[8];
    _mm256_store_ps(bl, vl);
    _mm256_store_ps(bh, vh);
    l = *std::min_element(bl, bl + 8);
    h = *std::max_element(bh, bh + 8);
  }
  for (; i < n; ++i) {
    l = std::min(l, a[i]);
    h = std::max(h, a[i]);
  }
  *lo = l;
  *hi = h;
}

void normalize(const float* in, float* out, std::size_t n, float lo, float range) {
  const __m256 vlo = _mm256_set1_ps(lo);
  const __m256 vr = _mm256_set1_ps(range);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_div_ps(_mm256_sub_ps(_mm256_loadu_ps(in + i), vlo), vr));
  }
  for (; i < n; ++i) out[i] = (in[i] - lo) / range;
}

void scale_shift(const float* in, float* out, std::size_t n, float scale, float shift) {
  const __m256 vs = _mm256_set1_ps(scale);
  const __m256 vb = _mm256_set1_ps(shift);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_mul_ps(_mm256_loadu_ps(in + i), vs), vb));
  }
  for (; i < n; ++i) out[i] = in[i] * scale + shift;
}

void accumulate(float* sum, float* weight, const float* src, const float* w, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 vw = _mm256_loadu_ps(w + i);
    const __m256 prod = _mm256_mul_ps(_mm256_loadu_ps(src + i), vw);
    _mm256_storeu_ps(sum + i, _mm256_add_ps(_mm256_loadu_ps(sum + i), prod));
    _mm256_storeu_ps(weight + i, _mm256_add_ps(_mm256_loadu_ps(weight + i), vw));
  }
  for (; i < n; ++i) {
    sum[i] = sum[i] + src[i] * w[i];
    weight[i] = weight[i] + w[i];
  }
}

inline __m256 lerp(__m256 a, __m256 b, __m256 t) {
  return _mm256_add_ps(a, _mm256_mul_ps(t, _mm256_sub_ps(b, a)));
}

void trilinear_row(const SampleGrid& grid, const RowMap& map, float* out, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  const __m256 xmax = _mm256_set1_ps(static_cast<float>(grid.nx - 1));
  const __m256 ymax = _mm256_set1_ps(static_cast<float>(grid.ny - 1));
  const __m256 zmax = _mm256_set1_ps(static_cast<float>(grid.nz - 1));
  const __m256i ixmax = _mm256_set1_epi32(grid.nx - 1);
  const __m256i iymax = _mm256_set1_epi32(grid.ny - 1);
  const __m256i izmax = _mm256_set1_epi32(grid.nz - 1);
  const __m256i one = _mm256_set1_epi32(1);
  const __m256i vnx = _mm256_set1_epi32(grid.nx);
  const __m256i vplane = _mm256_set1_epi32(grid.nx * grid.ny);
  const __m256 sx = _mm256_set1_ps(map.start[0]);
  const __m256 sy = _mm256_set1_ps(map.start[1]);
  const __m256 sz = _mm256_set1_ps(map.start[2]);
  const __m256 dx = _mm256_set1_ps(map.step[0]);
  const __m256 dy = _mm256_set1_ps(map.step[1]);
  const __m256 dz = _mm256_set1_ps(map.step[2]);
  const __m256 lane = _mm256_setr_ps(0.f, 1.f, 2.f, 3.f, 4.f, 5.f, 6.f, 7.f);
  const float* d = grid.data;

  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 fi = _mm256_add_ps(_mm256_set1_ps(static_cast<float>(i)), lane);
    __m256 x = _mm256_add_ps(sx, _mm256_mul_ps(fi, dx));
    __m256 y = _mm256_add_ps(sy, _mm256_mul_ps(fi, dy));
    __m256 z = _mm256_add_ps(sz, _mm256_mul_ps(fi, dz));
    __m256 inside = _mm256_and_ps(_mm256_cmp_ps(x, zero, _CMP_GE_OQ),
                                  _mm256_cmp_ps(x, xmax, _CMP_LE_OQ));
    inside = _mm256_and_ps(inside, _mm256_cmp_ps(y, zero, _CMP_GE_OQ));
    inside = _mm256_and_ps(inside, _mm256_cmp_ps(y, ymax, _CMP_LE_OQ));
    inside = _mm256_and_ps(inside, _mm256_cmp_ps(z, zero, _CMP_GE_OQ));
    inside = _mm256_and_ps(inside, _mm256_cmp_ps(z, zmax, _CMP_LE_OQ));
    if (_mm256_movemask_ps(inside) == 0) {
      _mm256_storeu_ps(out + i, zero);
      continue;
    }
    // Park outside lanes at the origin so their gathers stay in bounds.
    x = _mm256_and_ps(x, inside);
    y = _mm256_and_ps(y, inside);
    z = _mm256_and_ps(z, inside);
    const __m256 xf = _mm256_floor_ps(x);
    const __m256 yf = _mm256_floor_ps(y);
    const __m256 zf = _mm256_floor_ps(z);
    const __m256 fx = _mm256_sub_ps(x, xf);
    const __m256 fy = _mm256_sub_ps(y, yf);
    const __m256 fz = _mm256_sub_ps(z, zf);
    const __m256i x0 = _mm256_cvttps_epi32(xf);
    const __m256i y0 = _mm256_cvttps_epi32(yf);
    const __m256i z0 = _mm256_cvttps_epi32(zf);
    const __m256i x1 = _mm256_min_epi32(_mm256_add_epi32(x0, one), ixmax);
    const __m256i y1 = _mm256_min_epi32(_mm256_add_epi32(y0, one), iymax);
    const __m256i z1 = _mm256_min_epi32(_mm256_add_epi32(z0, one), izmax);
    const __m256i r00 = _mm256_add_epi32(_mm256_mullo_epi32(z0, vplane), _mm256_mullo_epi32(y0, vnx));
    const __m256i r01 = _mm256_add_epi32(_mm256_mullo_epi32(z0, vplane), _mm256_mullo_epi32(y1, vnx));
    const __m256i r10 = _mm256_add_epi32(_mm256_mullo_epi32(z1, vplane), _mm256_mullo_epi32(y0, vnx));
    const __m256i r11 = _mm256_add_epi32(_mm256_mullo_epi32(z1, vplane), _mm256_mullo_epi32(y1, vnx));
    const __m256 v000 = _mm256_i32gather_ps(d, _mm256_add_epi32(r00, x0), 4);
    const __m256 v001 = _mm256_i32gather_ps(d, _mm256_add_epi32(r00, x1), 4);
    const __m256 v010 = _mm256_i32gather_ps(d, _mm256_add_epi32(r01, x0), 4);
    const __m256 v011 = _mm256_i32gather_ps(d, _mm256_add_epi32(r01, x1), 4);
    const __m256 v100 = _mm256_i32gather_ps(d, _mm256_add_epi32(r10, x0), 4);
    const __m256 v101 = _mm256_i32gather_ps(d, _mm256_add_epi32(r10, x1), 4);
    const __m256 v110 = _mm256_i32gather_ps(d, _mm256_add_epi32(r11, x0), 4);
    const __m256 v111 = _mm256_i32gather_ps(d, _mm256_add_epi32(r11, x1), 4);
    const __m256 c00 = lerp(v000, v001, fx);
    const __m256 c01 = lerp(v010, v011, fx);
    const __m256 c10 = lerp(v100, v101, fx);
    const __m256 c11 = lerp(v110, v111, fx);
    const __m256 c0 = lerp(c00, c01, fy);
    const __m256 c1 = lerp(c10, c11, fy);
    _mm256_storeu_ps(out + i, _mm256_and_ps(lerp(c0, c1, fz), inside));
  }
  detail::trilinear_scalar(grid, map, out, i, n);
}

std::uint32_t crc32c_update(std::uint32_t state, const std::uint8_t* data, std::size_t n) {
  std::uint64_t s = state;
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    std::uint64_t word;
    std::memcpy(&word, data + i, sizeof word);
    s = _mm_crc32_u64(s, word);
  }
  return detail::crc32c_update_scalar(static_cast<std::uint32_t>(s), data + i, n - i);
}

}  // namespace

namespace detail {

const Kernels& avx2_table() {
  static const Kernels table{
      Isa::Avx2, "avx2",      sum_abs_diff, sum_sq_diff,   min_max,
      normalize, scale_shift, accumulate,   trilinear_row, crc32c_update,
  };
  return table;
}

}  // namespace detail
}  // namespace voxelforge::simd
