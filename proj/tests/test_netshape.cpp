#include <doctest.h>

#include <random>

#include <nlohmann/json.hpp>

#include "voxelforge/error.hpp"
#include "voxelforge/netshape.hpp"

using namespace voxelforge;
using namespace voxelforge::net;

namespace {

LayerSpec layer(LayerKind k, std::vector<std::int64_t> kernel, std::vector<std::int64_t> strides,
                std::int64_t features = 0) {
  return {k, std::move(kernel), std::move(strides), Padding::Infer, features};
}

const TableReport& report_for(const std::vector<TableReport>& all, const std::string& id) {
  for (const TableReport& r : all)
    if (r.id == id) return r;
  FAIL("missing table " << id);
  return all.front();
}

std::vector<TableReport> bundled_reports() {
  std::vector<TableReport> out;
  for (const ShapeTable& t : load_tables(default_tables_path())) out.push_back(verify_table(t));
  return out;
}

}  // namespace

TEST_CASE("tensor shapes parse and print") {
  const TensorShape s = TensorShape::parse("384x384x1");
  CHECK(s.spatial == std::vector<std::int64_t>{384, 384});
  CHECK(s.channels == 1);
  CHECK(s.to_string() == "384x384x1");
  CHECK(TensorShape::parse("16x16x16x1").spatial.size() == 3);
  CHECK_THROWS_AS(TensorShape::parse("384"), Error);
  CHECK_THROWS_AS(TensorShape::parse("384xAx1"), Error);
  CHECK_THROWS_AS(TensorShape::parse("0x4x1"), Error);
}

TEST_CASE("infer_shape examples") {
  const auto conv2 = layer(LayerKind::Convolution, {4, 4}, {2, 2}, 64);
  CHECK(infer_shape(conv2, TensorShape::parse("384x384x1"), Padding::Same) ==
        TensorShape::parse("192x192x64"));
  const auto conv9 = layer(LayerKind::Convolution, {9, 9, 9}, {1, 1, 1}, 32);
  CHECK(infer_shape(conv9, TensorShape::parse("32x32x32x1"), Padding::Valid) ==
        TensorShape::parse("24x24x24x32"));
  const auto pool = layer(LayerKind::MaxPooling, {3, 3, 3}, {1, 1, 1});
  CHECK(infer_shape(pool, TensorShape::parse("16x16x16x32"), Padding::Valid) ==
        TensorShape::parse("14x14x14x32"));
  const auto deconv = layer(LayerKind::Deconvolution, {4, 4}, {2, 2}, 512);
  CHECK(infer_shape(deconv, TensorShape::parse("12x12x512"), Padding::Same) ==
        TensorShape::parse("24x24x512"));
  CHECK(infer_shape(deconv, TensorShape::parse("12x12x512"), Padding::Valid) ==
        TensorShape::parse("26x26x512"));
  const auto dense = layer(LayerKind::Dense, {}, {}, 512);
  CHECK(infer_shape(dense, TensorShape::parse("10x10x10x128")) ==
        TensorShape::parse("10x10x10x512"));
}

TEST_CASE("infer_shape errors") {
  const auto big = layer(LayerKind::Convolution, {9, 9}, {1, 1}, 8);
  try {
    infer_shape(big, TensorShape::parse("4x4x1"), Padding::Valid);
    FAIL("expected NonPositiveOutput");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonPositiveOutput);
  }
  const auto rank3 = layer(LayerKind::Convolution, {3, 3, 3}, {1, 1, 1}, 8);
  CHECK_THROWS_AS(infer_shape(rank3, TensorShape::parse("8x8x1")), Error);
  CHECK_THROWS_AS(infer_shape(big, TensorShape::parse("16x16x1"), Padding::Infer), Error);
}

TEST_CASE("shape inference properties") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 500; ++t) {
    const std::int64_t n = 1 + std::int64_t(rng() % 500);
    const std::int64_t k = 1 + std::int64_t(rng() % 9);
    const std::int64_t s = 1 + std::int64_t(rng() % 4);
    const TensorShape in{{n, n + 1}, 3};
    // Same padding at stride 1 is the identity on spatial extents.
    CHECK(infer_shape(layer(LayerKind::Convolution, {k, k}, {1, 1}, 7), in, Padding::Same)
              .spatial == in.spatial);
    // Deconvolution then convolution at the same stride (both same) round-trips.
    const TensorShape up =
        infer_shape(layer(LayerKind::Deconvolution, {k, k}, {s, s}, 5), in, Padding::Same);
    CHECK(infer_shape(layer(LayerKind::Convolution, {k, k}, {s, s}, 3), up, Padding::Same) ==
          in);
  }
}

TEST_CASE("verify_table gives one entry per row and resynchronizes after a flag") {
  ShapeTable t{"t", "toy", {}};
  t.rows.push_back({layer(LayerKind::Input, {}, {}), TensorShape::parse("8x8x1")});
  t.rows.push_back({layer(LayerKind::Convolution, {3, 3}, {1, 1}, 4), TensorShape::parse("5x5x4")});
  t.rows.push_back({layer(LayerKind::Convolution, {3, 3}, {1, 1}, 4), TensorShape::parse("3x3x4")});
  t.rows.push_back({layer(LayerKind::Output, {}, {}), TensorShape::parse("3x3x4")});
  const TableReport r = verify_table(t);
  REQUIRE(r.rows.size() == 4);
  CHECK(r.rows[1].status == RowStatus::Mismatch);
  CHECK(r.rows[2].status == RowStatus::Match);
  CHECK(r.rows[2].padding == Padding::Valid);
  CHECK(r.flagged() == 1);
  CHECK(r.final_shape == TensorShape::parse("3x3x4"));
  const TableReport again = verify_table(t);
  CHECK(nlohmann::json(again) == nlohmann::json(r));
}

TEST_CASE("explicit padding is honoured rather than searched") {
  ShapeTable t{"t", "toy", {}};
  t.rows.push_back({layer(LayerKind::Input, {}, {}), TensorShape::parse("8x8x1")});
  LayerSpec conv = layer(LayerKind::Convolution, {3, 3}, {1, 1}, 4);
  conv.padding = Padding::Valid;
  t.rows.push_back({conv, TensorShape::parse("8x8x4")});
  t.rows.push_back({layer(LayerKind::Output, {}, {}), TensorShape::parse("8x8x4")});
  CHECK(verify_table(t).rows[1].status == RowStatus::Mismatch);
}

TEST_CASE("bundled architecture tables") {
  const auto all = bundled_reports();
  REQUIRE(all.size() == 4);

  const TableReport& unet = report_for(all, "unet-generator");
  CHECK(unet.fully_matched());
  CHECK(unet.final_shape == TensorShape::parse("384x384x1"));
  for (const RowReport& r : unet.rows) {
    if (r.padding) CHECK(*r.padding == Padding::Same);
  }

  const TableReport& gen3d = report_for(all, "context-aware-generator");
  CHECK(gen3d.fully_matched());
  CHECK(gen3d.final_shape == TensorShape::parse("16x16x16x1"));
  CHECK(gen3d.rows[1].padding == Padding::Valid);
  CHECK(gen3d.rows[5].padding == Padding::Valid);

  const TableReport& disc2d = report_for(all, "pix2pix-discriminator");
  CHECK(disc2d.flagged() == 1);
  CHECK(disc2d.rows[5].status == RowStatus::Mismatch);
  CHECK(disc2d.rows[5].computed == TensorShape::parse("24x24x512"));

  const TableReport& disc3d = report_for(all, "context-aware-discriminator");
  CHECK(disc3d.flagged() == 1);
  CHECK(disc3d.rows[7].kind == LayerKind::Dense);
  CHECK(disc3d.rows[7].status == RowStatus::Unresolvable);
  CHECK(disc3d.rows[2].computed == TensorShape::parse("14x14x14x32"));

  for (const TableReport& r : all) {
    CHECK(r.rows.front().kind == LayerKind::Input);
    CHECK(r.rows.back().kind == LayerKind::Output);
    CHECK_FALSE(format_report(r).empty());
  }
}

TEST_CASE("table JSON validation") {
  const auto bad = nlohmann::json::parse(R"({"id": "x", "rows": [
      {"type": "Convolution", "output": "4x4x1", "kernel": [3, 3], "strides": [1, 1]}]})");
  CHECK_THROWS_AS(table_from_json(bad), Error);
  const auto zero_stride = nlohmann::json::parse(R"({"id": "x", "rows": [
      {"type": "Input", "output": "4x4x1"},
      {"type": "Convolution", "output": "4x4x1", "kernel": [3, 3], "strides": [0, 1]},
      {"type": "Output", "output": "4x4x1"}]})");
  CHECK_THROWS_AS(table_from_json(zero_stride), Error);
}
