#include <doctest.h>

#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "support/oracles.hpp"
#include "voxelforge/dataset.hpp"
#include "voxelforge/error.hpp"
#include "voxelforge/formats/mhd.hpp"
#include "voxelforge/formats/nifti.hpp"
#include "voxelforge/patchkit.hpp"
#include "voxelforge/pipeline.hpp"
#include "voxelforge/synthetic.hpp"

using namespace voxelforge;
using namespace voxelforge::pipeline;
using nlohmann::json;

namespace {

/// Two phantom subjects with a misaligned MRI; the first has a prediction.
json write_inputs(const fs::path& dir, const std::string& mode) {
  fs::create_directories(dir / "in");
  const Shape3 shape{36, 44, 40};
  json subjects = json::array();
  for (int i = 0; i < 2; ++i) {
    const std::string id = "s" + std::to_string(i + 1);
    const synth::HeadPair head = synth::head_phantom(shape, 50 + std::uint64_t(i));
    reg::RigidTransform t = reg::RigidTransform::identity(head.mri.world_center());
    t.translation_mm = {1.5, -1.0, 0.5 * i};
    t.angles_rad = {0.0, 0.0, 0.02};
    formats::write_mhd(reg::resample(head.mri, t.inverse(), head.mri), dir / "in" / (id + "-mri.mhd"));
    formats::write_mhd(head.ct, dir / "in" / (id + "-ct.mhd"));
    json e{{"id", id}, {"mri", "in/" + id + "-mri.mhd"}, {"ct", "in/" + id + "-ct.mhd"}};
    if (i == 0) {
      std::vector<float> pred(head.ct.voxels().begin(), head.ct.voxels().end());
      for (std::size_t k = 0; k < pred.size(); k += 7) pred[k] += 25.0f;
      formats::write_nifti(head.ct.with_voxels(std::move(pred), IntensityDomain::Real),
                           dir / "in" / "s1-pred.nii.gz");
      e["prediction"] = "in/s1-pred.nii.gz";
    } else {
      e["trim"] = json::array({json::array({0, 2})});
    }
    subjects.push_back(e);
  }
  return json{{"subjects", subjects},
              {"registration", {{"pyramid_levels", 2}, {"sampling_fraction", 0.5}}},
              {"patch", {{"mode", mode}, {"stride", 8}, {"target_hw", {48, 48}}}},
              {"lambda_boost", 0.5},
              {"output", "out"}};
}

Manifest manifest_in(const fs::path& dir, const std::string& mode) {
  const json j = write_inputs(dir, mode);
  std::ofstream(dir / "manifest.json") << j.dump(2);
  return load_manifest(dir / "manifest.json");
}

std::map<std::string, std::string> tree_hashes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = file_sha256(e.path());
  }
  return out;
}

std::map<std::string, fs::file_time_type> tree_mtimes(const fs::path& root) {
  std::map<std::string, fs::file_time_type> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = e.last_write_time();
  }
  return out;
}

std::size_t count_run(const std::vector<StageOutcome>& o) {
  std::size_t n = 0;
  for (const StageOutcome& s : o) n += s.skipped ? 0 : 1;
  return n;
}

}  // namespace

TEST_CASE("manifest parsing resolves paths and validates") {
  const json base = json::parse(R"({
    "subjects": [{"id": "a", "mri": "m.mhd", "ct": "/data/c.mhd", "trim": [[0, 3]]}],
    "patch": {"mode": "2d", "stride": 4},
    "loss_weights": {"lambda_mae": 1, "lambda_gdl": 1e-7},
    "output": "o"})");
  const Manifest m = manifest_from_json(base, "/work");
  REQUIRE(m.subjects.size() == 1);
  CHECK(m.subjects[0].mri == fs::path("/work/m.mhd"));
  CHECK(m.subjects[0].ct == fs::path("/data/c.mhd"));
  CHECK(m.subjects[0].trim == std::vector<morph::SliceRange>{{0, 3}});
  CHECK(m.patch.mode == rec::RecordMode::Slices2D);
  CHECK(m.patch.stride == 4);
  CHECK(m.output == fs::path("/work/o"));
  CHECK(m.loss_weights.lambda_gdl == 1e-7);
  const Manifest again = manifest_from_json(manifest_to_json(m), "/elsewhere");
  CHECK(manifest_to_json(again) == manifest_to_json(m));

  auto rejects = [](json j) {
    try {
      manifest_from_json(j, "/w");
    } catch (const Error& e) {
      return e.kind() == ErrorKind::InvalidArgument;
    }
    return false;
  };
  json dup = base;
  dup["subjects"].push_back(base["subjects"][0]);
  CHECK(rejects(dup));
  json shared = base;
  shared["subjects"].push_back({{"id", "b"}, {"mri", "m.mhd"}, {"ct", "x.mhd"}});
  CHECK(rejects(shared));
  json no_subjects = base;
  no_subjects["subjects"] = json::array();
  CHECK(rejects(no_subjects));
  json bad_mode = base;
  bad_mode["patch"]["mode"] = "4d";
  CHECK(rejects(bad_mode));
  json bad_bins = base;
  bad_bins["registration"] = {{"bins", 4}};
  CHECK(rejects(bad_bins));
  json bad_weight = base;
  bad_weight["loss_weights"]["lambda_mse"] = -1;
  CHECK(rejects(bad_weight));
  json missing = base;
  missing["subjects"][0].erase("ct");
  CHECK(rejects(missing));
  json bad_id = base;
  bad_id["subjects"][0]["id"] = "../x";
  CHECK(rejects(bad_id));
}

TEST_CASE("stage names round-trip") {
  for (Stage s : all_stages()) CHECK(parse_stage(to_string(s)) == s);
  CHECK_THROWS_AS(parse_stage("train"), Error);
}

TEST_CASE("2D pipeline: records re-read equal the preprocessed volumes") {
  const fs::path dir = oracle::scratch_dir("pipe2d");
  const Manifest m = manifest_in(dir, "2d");
  const auto first = run_all(m, {2, false});
  CHECK(count_run(first) == 11);

  for (const SubjectEntry& s : m.subjects) {
    const fs::path d = subject_dir(m, s.id);
    for (const char* f : {"mri.nii.gz", "ct.nii.gz", "transform.json", "registration.json",
                          "mri_registered.nii.gz", "ct_clean.nii.gz", "mask.nii.gz",
                          "mri_clean.nii.gz", "mri_input.nii.gz", "ct_target.nii.gz",
                          "boost.nii.gz", "patches.json"}) {
      CHECK_MESSAGE(fs::exists(d / f), f);
    }
    const Volume mri = formats::read_nifti(d / "mri_input.nii.gz");
    const Volume ct = formats::read_nifti(d / "ct_target.nii.gz");
    CHECK(mri.shape() == Shape3{s.trim.empty() ? 36u : 34u, 48, 48});
    CHECK(mri.domain() == IntensityDomain::Unit);
    const Volume boost = formats::read_nifti(d / "boost.nii.gz");
    for (float b : boost.voxels()) CHECK((b == 1.0f || b == 1.5f));

    const auto records = rec::read_records(records_path(m, s));
    REQUIRE(records.size() == 1 + ct.shape().depth);
    const rec::FileHeader h = rec::header_from_features(rec::decode_example(records[0]));
    CHECK(h.mode == rec::RecordMode::Slices2D);
    CHECK(h.subject == s.id);
    CHECK(h.modality == "T1");
    const std::size_t plane = 48 * 48;
    bool equal = true;
    for (std::size_t z = 0; z < ct.shape().depth; ++z) {
      const rec::TrainingPair p = rec::pair_from_features(rec::decode_example(records[z + 1]));
      equal = equal && p.anchor == std::vector<std::int64_t>{std::int64_t(z)};
      equal = equal && p.input_shape == std::vector<std::int64_t>{48, 48};
      equal = equal && std::equal(p.input.begin(), p.input.end(), mri.voxels().begin() + std::ptrdiff_t(z * plane));
      equal = equal && std::equal(p.target.begin(), p.target.end(), ct.voxels().begin() + std::ptrdiff_t(z * plane));
    }
    CHECK(equal);
  }

  const json eval = json::parse(std::ifstream(m.output / "evaluation.json"));
  CHECK(eval.at("aggregate").contains("psnr_of_mean_mse"));
  CHECK(eval.at("aggregate").contains("mean_psnr"));
  CHECK(eval.at("volumes").size() == 1);
  CHECK(fs::exists(m.output / "evaluation.txt"));

  SUBCASE("an up-to-date re-run performs no writes") {
    const auto before = tree_mtimes(m.output);
    const auto again = run_all(m, {1, false});
    CHECK(count_run(again) == 0);
    CHECK(tree_mtimes(m.output) == before);
  }
  SUBCASE("changing a setting re-runs only the affected stages") {
    Manifest changed = m;
    changed.lambda_boost = 1.0;
    const auto outcomes = run_all(changed, {1, false});
    for (const StageOutcome& o : outcomes) {
      const bool expect_run = o.stage == Stage::Patch;
      CHECK_MESSAGE(o.skipped != expect_run, to_string(o.stage));
    }
  }
  SUBCASE("a tampered output is regenerated") {
    const fs::path f = subject_dir(m, "s2") / "mask.nii.gz";
    std::ofstream(f, std::ios::app) << "x";
    const auto outcomes = run_stage(m, Stage::Clean);
    CHECK(count_run(outcomes) == 1);
    CHECK(formats::read_nifti(f).domain() == IntensityDomain::Mask);
  }
  SUBCASE("force re-runs everything") {
    CHECK(count_run(run_stage(m, Stage::Convert, {1, true})) == 2);
  }
  fs::remove_all(dir);
}

TEST_CASE("3D pipeline exports one record per patch pair and is deterministic") {
  const fs::path dir = oracle::scratch_dir("pipe3d");
  const Manifest m = manifest_in(dir, "3d");
  run_all(m);
  Manifest other = m;
  other.output = dir / "out-parallel";
  run_all(other, {2, false});
  CHECK(tree_hashes(m.output) == tree_hashes(other.output));

  const SubjectEntry& s = m.subjects[1];
  const fs::path d = subject_dir(m, s.id);
  const Volume mri = formats::read_nifti(d / "mri_input.nii.gz");
  const Volume ct = formats::read_nifti(d / "ct_target.nii.gz");
  const auto anchors = patch::lattice(ct.shape(), 8);
  const auto records = rec::read_records(records_path(m, s));
  REQUIRE(records.size() == 1 + anchors.size());
  CHECK(rec::header_from_features(rec::decode_example(records[0])).mode ==
        rec::RecordMode::Patches3D);
  std::vector<float> target(patch::kTargetVoxels), input(patch::kInputVoxels);
  bool equal = true;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const rec::TrainingPair p = rec::pair_from_features(rec::decode_example(records[i + 1]));
    const patch::Index3 a = anchors[i];
    patch::copy_block(ct, a, patch::kTargetEdge, target.data());
    patch::copy_block(mri, {a.z - 8, a.y - 8, a.x - 8}, patch::kInputEdge, input.data());
    equal = equal && p.target == target && p.input == input;
    equal = equal && p.anchor == std::vector<std::int64_t>{std::int64_t(a.z), std::int64_t(a.y),
                                                           std::int64_t(a.x)};
  }
  CHECK(equal);
  fs::remove_all(dir);
}

TEST_CASE("pipeline errors carry subject and stage context") {
  const fs::path dir = oracle::scratch_dir("pipe-err");
  json j = write_inputs(dir, "2d");
  j["subjects"][1]["ct"] = "in/absent.mhd";
  const Manifest m = manifest_from_json(j, dir);
  try {
    run_stage(m, Stage::Convert);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
    CHECK(std::string(e.what()).find("subject s2, stage convert") != std::string::npos);
  }
  try {
    run_stage(m, Stage::Patch);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
    CHECK(std::string(e.what()).find("stage patch") != std::string::npos);
  }
  try {
    load_manifest(dir / "nope.json");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
  }
  fs::remove_all(dir);
}

TEST_CASE("dataset counts reproduce the published modality table") {
  const dataset::DatasetIndex idx = dataset::load_index(dataset::default_index_path());
  const dataset::ModalityCounts c = dataset::count(idx);
  const std::map<std::string, std::size_t> all{{"CT", 17}, {"PD", 14}, {"T1", 19},
                                               {"T2", 18}, {"MP-RAGE", 9}, {"PET", 8}};
  const std::map<std::string, std::size_t> with_ct{
      {"PD", 12}, {"T1", 17}, {"T2", 16}, {"MP-RAGE", 9}, {"PET", 6}};
  CHECK(c.all == all);
  CHECK(c.with_ct == with_ct);
  CHECK(dataset::verify(idx).ok());

  dataset::DatasetIndex fewer = idx;
  fewer.subjects.pop_back();
  CHECK_FALSE(dataset::verify(fewer).ok());
  CHECK(dataset::format_report(dataset::verify(fewer)).find("FAIL") != std::string::npos);
}

TEST_CASE("duplicate modality entries count once per subject") {
  dataset::DatasetIndex idx;
  idx.modalities = {"CT", "T1"};
  idx.subjects = {{"a", {"T1", "T1", "CT"}}, {"b", {"T1"}}};
  const dataset::ModalityCounts c = dataset::count(idx);
  CHECK(c.all.at("T1") == 2);
  CHECK(c.with_ct.at("T1") == 1);
}

TEST_CASE("trim ranges reproduce the published depths") {
  const auto cases = dataset::load_trim_table(dataset::default_trim_table_path());
  CHECK(cases.size() == 17);
  for (const dataset::TrimCheck& c : dataset::verify_trims(cases)) {
    CAPTURE(c.subject);
    CHECK(c.ok());
  }
  const dataset::TrimCheck first = dataset::verify_trims({cases.front()}).front();
  CHECK(first.actual.depth == 137);
  CHECK(cases.front().before.depth == 161);
  const dataset::TrimCheck thirteenth = dataset::verify_trims({cases[12]}).front();
  CHECK(cases[12].before.depth == 112);
  CHECK(thirteenth.actual.depth == 93);

  // Full-plane trimming of one small case agrees with the shrunk-plane shortcut.
  dataset::TrimCase small = cases[2];
  small.before.height = 3;
  small.before.width = 2;
  small.after.height = 3;
  small.after.width = 2;
  CHECK(dataset::verify_trims({small}, true).front().ok());
}
