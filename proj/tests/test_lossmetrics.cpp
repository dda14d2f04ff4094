#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

#include "support/oracles.hpp"
#include "voxelforge/error.hpp"
#include "voxelforge/lossmetrics.hpp"

using namespace voxelforge;
using namespace voxelforge::loss;

namespace {

GridView view(const std::vector<float>& v) { return GridView::flat(v); }

GridView view(const std::vector<float>& v, std::vector<std::size_t> ext) {
  return GridView{v, std::move(ext)};
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::InvariantBreach;
}

std::vector<std::size_t> random_extents(std::mt19937_64& rng) {
  const std::size_t rank = 1 + rng() % 3;
  std::vector<std::size_t> e(rank);
  for (auto& x : e) x = 1 + rng() % 16;
  return e;
}

std::size_t product(const std::vector<std::size_t>& e) {
  std::size_t n = 1;
  for (std::size_t x : e) n *= x;
  return n;
}

}  // namespace

TEST_CASE("mae and mse examples") {
  const std::vector<float> a{0, 1}, b{1, 1}, c{0, 0.5f}, d{1, 0.5f}, e{0, 2}, f{2, 0};
  CHECK(mae(view(a), view(a)) == 0.0);
  CHECK(mae(view(a), view(b)) == 0.5);
  CHECK(mae(view(c), view(d)) == 0.5);
  CHECK(mse(view(a), view(a)) == 0.0);
  CHECK(mse(view(c), view(d)) == 0.5);
  CHECK(mse(view(e), view(f)) == 4.0);
  const std::vector<float> three{1, 2, 3};
  CHECK(kind_of([&] { mae(view(a), view(three)); }) == ErrorKind::ShapeMismatch);
  CHECK(kind_of([&] { mse(view(three, {3}), view(three, {1, 3})); }) == ErrorKind::ShapeMismatch);
  const std::vector<float> none;
  CHECK(kind_of([&] { mae(view(none), view(none)); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { mse(view(three, {2}), view(three, {2})); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("spatial gradient examples") {
  const std::vector<float> x{0, 1, 0};
  CHECK(spatial_gradient(view(x), 0) == std::vector<double>{0, 1, 0});
  CHECK(spatial_gradient(view(x), 0, false) == std::vector<double>{-1, 1, 0});
  const std::vector<float> two{3, 7};
  CHECK(spatial_gradient(view(two), 0) == std::vector<double>{0, 0});
  const std::vector<float> flat(27, 4.0f);
  for (double g : spatial_gradient(view(flat, {3, 3, 3}), 1)) CHECK(g == 0.0);
  // 2D, axis 0 on a 4x2 grid: rows 1 and 2 active.
  const std::vector<float> grid{0, 0, 1, 2, 4, 6, 9, 12};
  CHECK(spatial_gradient(view(grid, {4, 2}), 0) ==
        std::vector<double>{0, 0, -3, -4, -5, -6, 0, 0});
  CHECK_THROWS_AS(spatial_gradient(view(grid, {4, 2}), 2), Error);
}

TEST_CASE("gdl examples") {
  const std::vector<float> x{0, 1, 0}, zero{0, 0, 0};
  CHECK(gdl(view(x), view(x)) == 0.0);
  CHECK(gdl(view(x), view(zero)) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  std::mt19937_64 rng(1);
  std::vector<float> a(60);
  for (float& v : a) v = float(rng() % 1000);
  std::vector<float> b(a);
  for (float& v : b) v += 8.0f;
  CHECK(gdl(view(a, {3, 4, 5}), view(b, {3, 4, 5})) == 0.0);
  CHECK(gdl(view(a, {3, 4, 5}), view(b, {3, 4, 5}), false) == 0.0);
}

TEST_CASE("losses match scalar-loop oracles on random grids") {
  std::mt19937_64 rng(123);
  for (int t = 0; t < 200; ++t) {
    const auto ext = random_extents(rng);
    const std::size_t n = product(ext);
    const auto x = oracle::random_floats(rng, n, -10.0f, 10.0f);
    const auto y = oracle::random_floats(rng, n, -10.0f, 10.0f);
    const GridView gx{x, ext}, gy{y, ext};
    CHECK(mae(gx, gy) == doctest::Approx(oracle::mae(x, y)).epsilon(1e-12));
    CHECK(mse(gx, gy) == doctest::Approx(oracle::mse(x, y)).epsilon(1e-12));
    for (bool strict : {true, false}) {
      CHECK(gdl(gx, gy, strict) ==
            doctest::Approx(oracle::gdl(x, y, ext, strict)).epsilon(1e-12).scale(1e-300));
    }
    for (const simd::Kernels* k : simd::available_kernels()) {
      CHECK(mae(gx, gy, *k) == mae(gx, gy, simd::scalar_kernels()));
      CHECK(mse(gx, gy, *k) == mse(gx, gy, simd::scalar_kernels()));
    }
  }
}

TEST_CASE("distance properties") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng() % 300;
    const auto x = oracle::random_floats(rng, n, -5.0f, 5.0f);
    const auto y = oracle::random_floats(rng, n, -5.0f, 5.0f);
    const double a = mae(view(x), view(y));
    const double s = mse(view(x), view(y));
    CHECK(a <= std::sqrt(s) * (1.0 + 1e-12));
    CHECK(a == mae(view(y), view(x)));
    CHECK(s == mse(view(y), view(x)));
    CHECK(a >= 0.0);
    CHECK(mae(view(x), view(x)) == 0.0);
    CHECK(mse(view(x), view(x)) == 0.0);
  }
}

TEST_CASE("combined loss examples and linearity") {
  const std::vector<float> x{0, 1, 0}, y{0, 0, 0};
  LossWeights w;
  CHECK(combined_loss(view(x), view(y), w) == mae(view(x), view(y)));
  w.lambda_gdl = 1e-7;
  CHECK(combined_loss(view(x), view(y), w) ==
        doctest::Approx(1.0 / 3.0 + 1e-7 / 3.0).epsilon(1e-15));
  CHECK(combined_loss(view(x), view(y), LossWeights{0, 0, 0, 0}) == 0.0);

  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    const auto ext = random_extents(rng);
    const auto a = oracle::random_floats(rng, product(ext), 0.0f, 1.0f);
    const auto b = oracle::random_floats(rng, product(ext), 0.0f, 1.0f);
    const GridView ga{a, ext}, gb{b, ext};
    const LossWeights base{0.7, 0.3, 0.2, 0.0};
    const double l0 = combined_loss(ga, gb, base);
    LossWeights twice = base;
    twice.lambda_mse *= 2.0;
    CHECK(std::abs(combined_loss(ga, gb, twice) - l0 - 0.3 * mse(ga, gb)) < 1e-14);
    twice = base;
    twice.lambda_gdl *= 2.0;
    CHECK(std::abs(combined_loss(ga, gb, twice) - l0 - 0.2 * gdl(ga, gb)) < 1e-14);
  }
}

TEST_CASE("loss weights validate and serialize") {
  CHECK_THROWS_AS((LossWeights{-1, 0, 0, 0}.validate()), Error);
  CHECK_THROWS_AS((LossWeights{1, std::numeric_limits<double>::infinity(), 0, 0}.validate()),
                  Error);
  const LossWeights w{1.0, 0.5, 1e-7, 0.01};
  const nlohmann::json j = w;
  const LossWeights r = j.get<LossWeights>();
  CHECK(r.lambda_gdl == 1e-7);
  CHECK(r.lambda_adv == 0.01);
}

TEST_CASE("adversarial loss examples") {
  const std::vector<float> one(4, 1.0f), zero(4, 0.0f), half(4, 0.5f);
  CHECK(adversarial_minmax(one, zero) == 0.0);
  CHECK(adversarial_minmax(half, half) == doctest::Approx(2.0 * std::log(0.5)).epsilon(1e-15));
  CHECK(kind_of([&] { adversarial_minmax(zero, zero); }) == ErrorKind::DomainError);
  CHECK(kind_of([&] { adversarial_minmax(one, one); }) == ErrorKind::DomainError);
  CHECK(kind_of([&] { adversarial_minmax(one, std::vector<float>(3, 0.0f)); }) ==
        ErrorKind::ShapeMismatch);

  CHECK(adversarial_lsq(one, zero) == 0.0);
  CHECK(adversarial_lsq(one, zero, LsqForm::LogSquared) == 0.0);
  CHECK(adversarial_lsq(half, half) == 0.5);
  CHECK(adversarial_lsq(half, half, LsqForm::LogSquared) ==
        doctest::Approx(2.0 * std::log(0.25)).epsilon(1e-15));
  CHECK(kind_of([&] { adversarial_lsq(zero, zero, LsqForm::LogSquared); }) == ErrorKind::DomainError);
  const std::vector<float> wide(4, 3.0f);
  CHECK_NOTHROW(adversarial_lsq(wide, wide));
}

TEST_CASE("standard least-squares form is uniquely minimized at the optimum") {
  for (int i = 0; i <= 20; ++i) {
    for (int j = 0; j <= 20; ++j) {
      const std::vector<float> r(3, float(i) / 10.0f - 0.5f), f(3, float(j) / 10.0f - 0.5f);
      const double v = adversarial_lsq(r, f);
      if (r[0] == 1.0f && f[0] == 0.0f) {
        CHECK(v == 0.0);
      } else {
        CHECK(v > 0.0);
      }
    }
  }
}

TEST_CASE("psnr examples and monotonicity") {
  CHECK(psnr_from_mse(6577.0).db == doctest::Approx(58.149187656712).epsilon(1e-12));
  CHECK(psnr_from_mse(65535.0 * 65535.0).db == doctest::Approx(0.0).scale(1.0));
  const Psnr inf = psnr_from_mse(0.0);
  CHECK(inf.infinite);
  CHECK(std::isinf(inf.db));
  const std::vector<float> x{1, 2, 3};
  CHECK(psnr(view(x), view(x)).infinite);
  double prev = std::numeric_limits<double>::infinity();
  for (double m = 0.5; m < 1e9; m *= 1.7) {
    const double db = psnr_from_mse(m).db;
    CHECK(db < prev);
    prev = db;
  }
  CHECK(psnr_from_mse(1.0, 255.0).db == doctest::Approx(oracle::psnr(1.0, 255.0)));
}

TEST_CASE("evaluate examples") {
  Shape3 one{1, 1, 1};
  SUBCASE("identical volumes") {
    const Volume v({1, 1, 3}, {}, {1, 2, 3});
    const EvalReport r = evaluate(v, v);
    CHECK(r.mae == 0.0);
    CHECK(r.mse == 0.0);
    CHECK(r.psnr_of_mean_mse.infinite);
    CHECK(r.mean_psnr.infinite);
  }
  SUBCASE("single-voxel extremes") {
    const EvalReport r = evaluate(Volume(one, {}, {0.0f}), Volume(one, {}, {65535.0f}));
    CHECK(r.mae == 65535.0);
    CHECK(r.mse == 65535.0 * 65535.0);
    CHECK(r.psnr_of_mean_mse.db == doctest::Approx(0.0).scale(1.0));
  }
  SUBCASE("aggregation is voxel weighted and both psnr variants are reported") {
    std::vector<VolumeMetrics> vols{{"a", 10, 10.0, 100.0, psnr_from_mse(100.0)},
                                    {"b", 10, 20.0, 300.0, psnr_from_mse(300.0)}};
    const EvalReport r = summarize(vols);
    CHECK(r.mse == 200.0);
    CHECK(r.mae == 15.0);
    CHECK(r.voxels == 20);
    CHECK(r.psnr_of_mean_mse.db == doctest::Approx(oracle::psnr(200.0, 65535.0)));
    CHECK(r.mean_psnr.db == doctest::Approx(0.5 * (oracle::psnr(100.0, 65535.0) +
                                                   oracle::psnr(300.0, 65535.0))));
    CHECK(r.mean_psnr.db > r.psnr_of_mean_mse.db);

    const nlohmann::json j = r;
    CHECK(j.at("aggregate").contains("psnr_of_mean_mse"));
    CHECK(j.at("aggregate").contains("mean_psnr"));
    CHECK(j.at("volumes").size() == 2);
    const std::string table = format_table(r);
    CHECK(table.find("a") != std::string::npos);
    CHECK(table.find("b") != std::string::npos);
  }
  SUBCASE("unequal sizes weight by voxel count") {
    std::vector<VolumeMetrics> vols{{"a", 30, 1.0, 100.0, psnr_from_mse(100.0)},
                                    {"b", 10, 5.0, 500.0, psnr_from_mse(500.0)}};
    const EvalReport r = summarize(vols);
    CHECK(r.mse == doctest::Approx(200.0));
    CHECK(r.mae == doctest::Approx(2.0));
  }
  SUBCASE("grids must match") {
    CHECK(kind_of([] { evaluate(Volume::zeros({1, 1, 2}), Volume::zeros({1, 2, 1})); }) ==
          ErrorKind::ShapeMismatch);
  }
}

TEST_CASE("normalized inputs are measured on the raw scale") {
  std::mt19937_64 rng(5);
  std::vector<float> a(64), b(64);
  for (std::size_t i = 0; i < 64; ++i) {
    a[i] = float(rng() % 4000);
    b[i] = float(rng() % 4000);
  }
  a[0] = 0;
  a[1] = 4000;
  b[0] = 0;
  b[1] = 4000;
  const Volume va({4, 4, 4}, {}, a, IntensityDomain::Raw16);
  const Volume vb({4, 4, 4}, {}, b, IntensityDomain::Raw16);
  const VolumeMetrics raw = measure(va, vb);
  const VolumeMetrics norm = measure(minmax_normalize(va), minmax_normalize(vb));
  CHECK(norm.mae == doctest::Approx(raw.mae).epsilon(1e-6));
  CHECK(norm.mse == doctest::Approx(raw.mse).epsilon(1e-6));
  CHECK(raw.mae == doctest::Approx(oracle::mae(a, b)).epsilon(1e-12));
}
