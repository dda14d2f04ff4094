#include <doctest.h>

#include <cstring>
#include <random>
#include <vector>

#include "support/oracles.hpp"
#include "voxelforge/simd/kernels.hpp"

using namespace voxelforge;

namespace {

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

const std::size_t kLengths[] = {0, 1, 2, 7, 8, 9, 15, 16, 17, 31, 33, 64, 100, 1000, 4097};

}  // namespace

TEST_CASE("scalar kernels are always available and listed first") {
  const auto all = simd::available_kernels();
  REQUIRE(!all.empty());
  CHECK(all.front()->isa == simd::Isa::Scalar);
  CHECK(&simd::scalar_kernels() == all.front());
}

TEST_CASE("every kernel variant matches the scalar reference bit for bit") {
  const simd::Kernels& ref = simd::scalar_kernels();
  std::mt19937_64 rng(11);
  for (const simd::Kernels* k : simd::available_kernels()) {
    CAPTURE(k->name);
    for (std::size_t n : kLengths) {
      CAPTURE(n);
      const auto a = oracle::random_floats(rng, n, -50.0f, 50.0f);
      const auto b = oracle::random_floats(rng, n, -50.0f, 50.0f);

      CHECK(same_bits(k->sum_abs_diff(a.data(), b.data(), n),
                      ref.sum_abs_diff(a.data(), b.data(), n)));
      CHECK(same_bits(k->sum_sq_diff(a.data(), b.data(), n),
                      ref.sum_sq_diff(a.data(), b.data(), n)));

      if (n > 0) {
        float lo1, hi1, lo2, hi2;
        k->min_max(a.data(), n, &lo1, &hi1);
        ref.min_max(a.data(), n, &lo2, &hi2);
        CHECK(lo1 == lo2);
        CHECK(hi1 == hi2);
      }

      std::vector<float> o1(n), o2(n);
      k->normalize(a.data(), o1.data(), n, -50.0f, 100.0f);
      ref.normalize(a.data(), o2.data(), n, -50.0f, 100.0f);
      CHECK(same_bits(o1, o2));

      k->scale_shift(a.data(), o1.data(), n, 3.25f, -1.5f);
      ref.scale_shift(a.data(), o2.data(), n, 3.25f, -1.5f);
      CHECK(same_bits(o1, o2));

      std::vector<float> s1(b), w1(n, 0.5f), s2(b), w2(n, 0.5f);
      const auto wt = oracle::random_floats(rng, n, 0.0f, 1.0f);
      k->accumulate(s1.data(), w1.data(), a.data(), wt.data(), n);
      ref.accumulate(s2.data(), w2.data(), a.data(), wt.data(), n);
      CHECK(same_bits(s1, s2));
      CHECK(same_bits(w1, w2));

      std::vector<std::uint8_t> bytes(n);
      for (auto& byte : bytes) byte = std::uint8_t(rng());
      CHECK(k->crc32c_update(0xffffffffu, bytes.data(), n) ==
            ref.crc32c_update(0xffffffffu, bytes.data(), n));
    }
  }
}

TEST_CASE("trilinear rows agree across variants, including out-of-bounds samples") {
  std::mt19937_64 rng(5);
  const std::int32_t nx = 13, ny = 9, nz = 7;
  const auto data = oracle::random_floats(rng, std::size_t(nx * ny * nz), 0.0f, 1.0f);
  const simd::SampleGrid grid{data.data(), nx, ny, nz};
  std::uniform_real_distribution<float> start(-3.0f, 15.0f);
  std::uniform_real_distribution<float> step(-0.7f, 0.7f);
  for (const simd::Kernels* k : simd::available_kernels()) {
    CAPTURE(k->name);
    for (int trial = 0; trial < 200; ++trial) {
      simd::RowMap map;
      for (int a = 0; a < 3; ++a) {
        map.start[a] = start(rng);
        map.step[a] = step(rng);
      }
      const std::size_t n = 1 + std::size_t(rng() % 40);
      std::vector<float> o1(n), o2(n);
      k->trilinear_row(grid, map, o1.data(), n);
      simd::scalar_kernels().trilinear_row(grid, map, o2.data(), n);
      CHECK(same_bits(o1, o2));
    }
  }
}

TEST_CASE("trilinear sampling hits grid values at integer positions and is 0 outside") {
  const std::vector<float> data{1, 2, 3, 4, 5, 6, 7, 8};  // 2x2x2
  const simd::SampleGrid grid{data.data(), 2, 2, 2};
  for (const simd::Kernels* k : simd::available_kernels()) {
    simd::RowMap map;
    map.start[0] = 0.0f;
    map.start[1] = 1.0f;
    map.start[2] = 1.0f;
    map.step[0] = 0.5f;
    float out[4];
    k->trilinear_row(grid, map, out, 4);
    CHECK(out[0] == 7.0f);
    CHECK(out[1] == 7.5f);
    CHECK(out[2] == 8.0f);
    CHECK(out[3] == 0.0f);
  }
}

TEST_CASE("crc register update matches a bitwise implementation") {
  std::mt19937_64 rng(3);
  for (const simd::Kernels* k : simd::available_kernels()) {
    for (std::size_t n : kLengths) {
      std::vector<std::uint8_t> bytes(n);
      for (auto& byte : bytes) byte = std::uint8_t(rng());
      CHECK(~k->crc32c_update(0xffffffffu, bytes.data(), n) == oracle::crc32c(bytes));
    }
  }
}

TEST_CASE("the active kernel set is one of the available ones") {
  bool found = false;
  for (const simd::Kernels* k : simd::available_kernels()) found = found || k == &simd::active();
  CHECK(found);
}
