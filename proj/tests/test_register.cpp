#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "support/oracles.hpp"
#include "voxelforge/error.hpp"
#include "voxelforge/register.hpp"
#include "voxelforge/synthetic.hpp"

using namespace voxelforge;
using namespace voxelforge::reg;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double det(const Mat3& m) {
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

RigidTransform random_transform(std::mt19937_64& rng, double max_angle, double max_shift) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  RigidTransform t;
  for (int i = 0; i < 3; ++i) {
    t.angles_rad[i] = u(rng) * max_angle;
    t.translation_mm[i] = u(rng) * max_shift;
    t.center_mm[i] = u(rng) * 20.0;
  }
  return t;
}

double max_diff(const Vec3& a, const Vec3& b) {
  double m = 0.0;
  for (int i = 0; i < 3; ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

Volume blob_volume(std::size_t n, std::uint64_t seed) {
  const Shape3 s{n, n, n};
  return synth::render(synth::random_blobs(s, {}, seed), s, {});
}

/// Probability-form MI computed directly from a count table.
double mi_oracle(const JointHistogram& h) {
  const std::size_t b = h.bins();
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j) total += h.count(i, j);
  double mi = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      const double pab = h.count(i, j) / total;
      if (pab == 0.0) continue;
      double pa = 0.0, pb = 0.0;
      for (std::size_t k = 0; k < b; ++k) {
        pa += h.count(i, k) / total;
        pb += h.count(k, j) / total;
      }
      mi += pab * std::log(pab / (pa * pb));
    }
  }
  return mi;
}

}  // namespace

TEST_CASE("rigid transforms are proper rotations, invertible and composable") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 100; ++t) {
    const RigidTransform a = random_transform(rng, std::numbers::pi, 50.0);
    const RigidTransform b = random_transform(rng, std::numbers::pi, 50.0);
    const Mat3 r = a.rotation();
    CHECK(det(r) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(is_orthonormal(r, 1e-12));

    const Vec3 p{3.0, -7.5, 12.25};
    CHECK(max_diff(a.inverse().apply(a.apply(p)), p) < 1e-9);
    CHECK(max_diff(compose(a, b).apply(p), a.apply(b.apply(p))) < 1e-9);

    const RigidTransform back = RigidTransform::from_rotation(r, a.translation_mm, a.center_mm);
    CHECK(max_diff(back.apply(p), a.apply(p)) < 1e-9);
    CHECK(rotation_difference(a, back) < 1e-7);
  }
}

TEST_CASE("rotation order is Rz * Ry * Rx") {
  RigidTransform t;
  t.angles_rad = {std::numbers::pi / 2, 0.0, std::numbers::pi / 2};
  // x first: (0, 1, 0) -> (0, 0, 1); then z leaves it.
  const Vec3 p = t.apply({0.0, 1.0, 0.0});
  CHECK(max_diff(p, {0.0, 0.0, 1.0}) < 1e-12);
  // (1, 0, 0): x rotation leaves it; z turns it to (0, 1, 0).
  CHECK(max_diff(t.apply({1.0, 0.0, 0.0}), {0.0, 1.0, 0.0}) < 1e-12);
}

TEST_CASE("rotation_difference measures the relative angle") {
  RigidTransform a;
  RigidTransform b;
  b.angles_rad = {0.0, 0.3, 0.0};
  CHECK(rotation_difference(a, b) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(rotation_difference(b, b) == doctest::Approx(0.0));
}

TEST_CASE("transforms serialize to angles, translation and center") {
  std::mt19937_64 rng(1);
  const RigidTransform t = random_transform(rng, 1.0, 10.0);
  const nlohmann::json j = t;
  CHECK(j.at("angles_rad").size() == 3);
  CHECK(j.at("translation_mm").size() == 3);
  CHECK(j.at("center_mm").size() == 3);
  CHECK(j.get<RigidTransform>() == t);
}

TEST_CASE("registration config validation") {
  RegistrationConfig c;
  CHECK_NOTHROW(c.validate());
  c.bins = 7;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.pyramid_levels = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.sampling_fraction = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.sampling_fraction = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.bins = 32;
  c.seed = 9;
  const nlohmann::json j = c;
  const RegistrationConfig r = j.get<RegistrationConfig>();
  CHECK(r.bins == 32);
  CHECK(r.seed == 9);
}

TEST_CASE("resample examples") {
  std::mt19937_64 rng(6);
  SUBCASE("identity copy") {
    const Volume v = oracle::random_volume(rng, {6, 7, 8});
    const Volume r = resample(v, RigidTransform::identity(v.world_center()), v);
    double worst = 0.0;
    for (std::size_t i = 0; i < v.voxels().size(); ++i)
      worst = std::max(worst, double(std::fabs(r.voxels()[i] - v.voxels()[i])));
    CHECK(worst < 1e-6 * 100.0);
  }
  SUBCASE("one-voxel translation shifts indices") {
    Geometry g;
    g.spacing = {2.0, 1.0, 1.5};
    const Volume v(Shape3{5, 6, 7}, g, oracle::random_floats(rng, 210, 0.0f, 1.0f));
    RigidTransform t;
    t.translation_mm = {2.0, 0.0, 0.0};
    const Volume r = resample(v, t, v);
    bool exact = true;
    for (std::size_t z = 0; z < 5; ++z)
      for (std::size_t y = 0; y < 6; ++y) {
        for (std::size_t x = 0; x + 1 < 7; ++x) exact = exact && r.at(z, y, x) == v.at(z, y, x + 1);
        CHECK(r.at(z, y, 6) == 0.0f);
      }
    CHECK(exact);
  }
  SUBCASE("quarter turn moves a spike to the rotated index") {
    std::vector<float> vox(9 * 9 * 9, 0.0f);
    const Shape3 s{9, 9, 9};
    Volume probe = Volume::zeros(s);
    vox[probe.index(4, 4, 6)] = 1.0f;  // x = 6, y = 4, z = 4
    const Volume v(s, {}, vox);
    RigidTransform t = RigidTransform::identity(v.world_center());
    t.angles_rad[2] = std::numbers::pi / 2;
    const Volume r = resample(v, t, v);
    // Output voxel q samples R(q - c) + c; R(0, -2) = (2, 0), so q = (4, 2, 4).
    CHECK(r.at(4, 2, 4) == doctest::Approx(1.0).epsilon(1e-5));
    double rest = 0.0;
    for (float f : r.voxels()) rest += f;
    CHECK(rest == doctest::Approx(1.0).epsilon(1e-5));
  }
  SUBCASE("output takes the reference grid") {
    const Volume v = oracle::random_volume(rng, {4, 4, 4});
    Geometry g;
    g.spacing = {0.5, 0.5, 0.5};
    const Volume ref = Volume::zeros({3, 5, 2}, g);
    const Volume r = resample(v, {}, ref);
    CHECK(r.shape() == ref.shape());
    CHECK(r.geometry() == ref.geometry());
  }
}

TEST_CASE("resampling through t then its inverse restores interior voxels") {
  const Shape3 s{64, 64, 64};
  synth::BlobOptions smooth;
  smooth.sigma_min = 20.0;
  smooth.sigma_max = 30.0;
  smooth.count = 12;
  const Volume v = minmax_normalize(synth::render(synth::random_blobs(s, {}, 3, smooth), s, {}))
                       .volume;
  RigidTransform t = RigidTransform::identity(v.world_center());
  t.angles_rad = {0.05, -0.03, 0.04};
  t.translation_mm = {1.3, -0.6, 0.45};
  const Volume fwd = resample(v, t, v);
  const Volume back = resample(fwd, t.inverse(), v);
  double worst = 0.0;
  for (std::size_t z = 13; z < 51; ++z)
    for (std::size_t y = 13; y < 51; ++y)
      for (std::size_t x = 13; x < 51; ++x)
        worst = std::max(worst, double(std::fabs(back.at(z, y, x) - v.at(z, y, x))));
  CHECK(worst < 1e-3);
}

TEST_CASE("SIMD and scalar resampling agree bit for bit") {
  const Volume v = blob_volume(24, 2);
  RigidTransform t = RigidTransform::identity(v.world_center());
  t.angles_rad = {0.1, 0.2, -0.3};
  t.translation_mm = {2.5, -1.0, 3.0};
  const Volume ref = resample(v, t, v, simd::scalar_kernels());
  for (const simd::Kernels* k : simd::available_kernels()) {
    const Volume r = resample(v, t, v, *k);
    CHECK(std::equal(r.voxels().begin(), r.voxels().end(), ref.voxels().begin()));
  }
}

TEST_CASE("joint histogram bookkeeping") {
  std::mt19937_64 rng(4);
  const auto a = oracle::random_floats(rng, 5000, 0.0f, 1.0f);
  const auto b = oracle::random_floats(rng, 5000, -2.0f, 2.0f);
  JointHistogram h = JointHistogram::uniform(16, {0.0f, 1.0f}, {-2.0f, 2.0f});
  h.add(a, b);
  double sum = 0.0;
  for (double c : h.counts()) sum += c;
  CHECK(sum == h.total());
  CHECK(h.total() == 5000.0);
  double fa = 0.0, fb = 0.0;
  for (double c : h.marginal_fixed()) fa += c;
  for (double c : h.marginal_moving()) fb += c;
  CHECK(fa == h.total());
  CHECK(fb == h.total());
  CHECK(h.bin_fixed(1.0f) == 15);
  CHECK(h.bin_fixed(-5.0f) == 0);
  CHECK(h.bin_fixed(7.0f) == 15);
  CHECK(h.edges_fixed().size() == 17);
}

TEST_CASE("mutual information matches the probability formula and its bounds") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 20; ++t) {
    const auto a = oracle::random_floats(rng, 4000, 0.0f, 1.0f);
    std::vector<float> b(a.size());
    std::normal_distribution<float> noise(0.0f, 0.1f + 0.05f * float(t));
    for (std::size_t i = 0; i < a.size(); ++i) b[i] = a[i] * a[i] + noise(rng);
    const auto [lo, hi] = std::minmax_element(b.begin(), b.end());
    JointHistogram h = JointHistogram::uniform(32, {0.0f, 1.0f}, {*lo, *hi});
    h.add(a, b);
    const double mi = h.mutual_information();
    CHECK(mi == doctest::Approx(mi_oracle(h)).epsilon(1e-10));
    CHECK(mi >= 0.0);
    CHECK(std::fabs(mi - h.transposed().mutual_information()) < 1e-9);
    CHECK(mi <= std::min(h.entropy_fixed(), h.entropy_moving()) + 1e-9);
  }
}

TEST_CASE("mutual information examples") {
  const Volume v = blob_volume(32, 5);
  SUBCASE("self-information equals the marginal entropy") {
    CHECK(mutual_information(v, v) == doctest::Approx(marginal_entropy(v)).epsilon(1e-9));
  }
  SUBCASE("a random permutation is nearly independent") {
    const Volume big = blob_volume(64, 8);
    std::vector<float> shuffled(big.voxels().begin(), big.voxels().end());
    std::mt19937_64 rng(1);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const double mi =
        mutual_information(big, big.with_voxels(std::move(shuffled), IntensityDomain::Real));
    CHECK(mi < 0.05);
  }
  SUBCASE("a monotone remap keeps all the information under remapped edges") {
    std::mt19937_64 rng(2);
    std::vector<float> a(20000), b(20000);
    std::vector<double> ea, eb;
    for (int k = 0; k <= 32; ++k) {
      ea.push_back(double(k) - 0.5);
      eb.push_back(std::pow(double(k) - 0.5 + 1.0, 3.0));
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = float(rng() % 32);
      b[i] = float(std::pow(double(a[i]) + 1.0, 3.0));
    }
    JointHistogram h = JointHistogram::with_edges(ea, eb);
    h.add(a, b);
    CHECK(h.mutual_information() == doctest::Approx(h.entropy_fixed()).epsilon(1e-12));
  }
  SUBCASE("constant volumes are rejected") {
    const Volume flat = Volume::zeros(v.shape());
    try {
      mutual_information(v, flat);
      FAIL("expected DegenerateIntensity");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::DegenerateIntensity);
    }
  }
  SUBCASE("grids must match") {
    try {
      mutual_information(v, blob_volume(16, 1));
      FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ShapeMismatch);
    }
  }
}

TEST_CASE("downsample2 averages 2x2x2 blocks") {
  std::vector<float> vox(4 * 4 * 4);
  for (std::size_t i = 0; i < vox.size(); ++i) vox[i] = float(i);
  const Volume v({4, 4, 4}, {}, vox);
  const Volume d = downsample2(v);
  REQUIRE(d.shape() == Shape3{2, 2, 2});
  const float expect = (0 + 1 + 4 + 5 + 16 + 17 + 20 + 21) / 8.0f;
  CHECK(d.voxels()[0] == doctest::Approx(expect));
  CHECK(d.geometry().spacing[0] == 2.0);
}

TEST_CASE("coregister examples") {
  const Shape3 s{48, 48, 48};
  const synth::BlobField field = synth::random_blobs(s, {}, 21);
  const Volume fixed = synth::render(field, s, {});

  auto check_recovery = [&](const Volume& moving, const RigidTransform& truth, double tol_mm,
                            double tol_deg, bool starts_aligned = false) {
    const RegistrationResult r = coregister(fixed, moving);
    CHECK(r.did_not_improve == starts_aligned);
    CHECK(max_diff(r.transform.translation_mm, truth.translation_mm) < tol_mm);
    CHECK(rotation_difference(r.transform, truth) < tol_deg * kDeg);
    // Within each pyramid level accepted steps never lower MI.
    for (std::size_t i = 1; i < r.trace.size(); ++i) {
      if (r.trace[i].level == r.trace[i - 1].level) {
        CHECK(r.trace[i].mutual_information >= r.trace[i - 1].mutual_information);
      }
    }
  };

  SUBCASE("self-registration stays at the identity") {
    check_recovery(fixed, RigidTransform::identity(fixed.world_center()), 0.1, 0.1, true);
  }
  SUBCASE("pure translation") {
    RigidTransform truth = RigidTransform::identity(fixed.world_center());
    truth.translation_mm = {3.0, -2.0, 1.0};
    const RigidTransform inv = truth.inverse();
    check_recovery(synth::render(field, s, {}, &inv), truth, 0.5, 0.5);
  }
  SUBCASE("inverted contrast with translation") {
    RigidTransform truth = RigidTransform::identity(fixed.world_center());
    truth.translation_mm = {3.0, -2.0, 1.0};
    const RigidTransform inv = truth.inverse();
    const Volume moved = synth::render(field, s, {}, &inv);
    const IntensityRange r = intensity_range(moved);
    std::vector<float> flipped(moved.voxels().size());
    for (std::size_t i = 0; i < flipped.size(); ++i) flipped[i] = r.max - moved.voxels()[i];
    check_recovery(moved.with_voxels(std::move(flipped), IntensityDomain::Real), truth, 0.5,
                   0.5);
  }
}

TEST_CASE("coregister is deterministic") {
  const Volume fixed = blob_volume(32, 4);
  RigidTransform truth = RigidTransform::identity(fixed.world_center());
  truth.translation_mm = {1.5, 0.5, -2.0};
  const RigidTransform inv = truth.inverse();
  const Shape3 s{32, 32, 32};
  const Volume moving = synth::render(synth::random_blobs(s, {}, 4), s, {}, &inv);
  RegistrationConfig c;
  c.sampling_fraction = 0.5;
  c.seed = 3;
  const RegistrationResult a = coregister(fixed, moving, c);
  const RegistrationResult b = coregister(fixed, moving, c);
  CHECK(a.transform == b.transform);
  CHECK(a.evaluations == b.evaluations);
}
