#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "voxelforge/dataset.hpp"
#include "voxelforge/error.hpp"
#include "voxelforge/formats/mhd.hpp"
#include "voxelforge/formats/nifti.hpp"
#include "voxelforge/netshape.hpp"
#include "voxelforge/pipeline.hpp"
#include "voxelforge/simd/kernels.hpp"
#include "voxelforge/synthetic.hpp"

namespace fs = std::filesystem;
using namespace voxelforge;

namespace {

enum Exit { kOk = 0, kValidation = 1, kIo = 2, kInternal = 3 };

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::Io:
    case ErrorKind::TruncatedFile:
      return kIo;
    case ErrorKind::InvariantBreach:
      return kInternal;
    default:
      return kValidation;
  }
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("voxelforge");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("VOXELFORGE_LOG")) {
    spdlog::set_level(spdlog::level::from_str(level));
  }
}

struct Common {
  std::string manifest;
  std::size_t jobs = 1;
  std::string output;
  bool force = false;
};

pipeline::Manifest load(const Common& c) {
  if (c.manifest.empty()) fail(ErrorKind::InvalidArgument, "--manifest is required");
  pipeline::Manifest m = pipeline::load_manifest(c.manifest);
  if (!c.output.empty()) m.output = fs::absolute(c.output);
  return m;
}

void report(const std::vector<pipeline::StageOutcome>& outcomes) {
  std::size_t ran = 0;
  std::size_t skipped = 0;
  for (const auto& o : outcomes) (o.skipped ? skipped : ran)++;
  std::cout << ran << " stage run(s), " << skipped << " up to date\n";
}

int run_stage(const Common& c, const std::optional<std::string>& stage) {
  const pipeline::Manifest m = load(c);
  const pipeline::RunOptions options{c.jobs, c.force};
  if (stage) {
    report(pipeline::run_stage(m, pipeline::parse_stage(*stage), options));
  } else {
    report(pipeline::run_all(m, options));
  }
  return kOk;
}

int verify_shapes(const std::string& tables_path, bool as_json) {
  const fs::path path = tables_path.empty() ? net::default_tables_path() : fs::path(tables_path);
  nlohmann::json all = nlohmann::json::array();
  for (const net::ShapeTable& t : net::load_tables(path)) {
    const net::TableReport r = net::verify_table(t);
    if (as_json) {
      all.push_back(r);
    } else {
      std::cout << net::format_report(r) << "\n";
    }
  }
  if (as_json) std::cout << all.dump(2) << "\n";
  return kOk;
}

int dataset_verify(const std::string& index_path, const std::string& trims_path) {
  const dataset::DatasetIndex idx = dataset::load_index(
      index_path.empty() ? dataset::default_index_path() : fs::path(index_path));
  const dataset::DatasetReport r = dataset::verify(idx);
  std::cout << "subjects: " << idx.subjects.size() << "\n" << dataset::format_report(r);
  bool ok = r.ok();
  const auto cases = dataset::load_trim_table(
      trims_path.empty() ? dataset::default_trim_table_path() : fs::path(trims_path));
  bool trims_ok = true;
  for (const dataset::TrimCheck& c : dataset::verify_trims(cases)) {
    std::cout << "  trim " << c.subject << ": depth " << c.actual.depth << " (expected "
              << c.expected.depth << ") " << (c.ok() ? "PASS" : "FAIL") << "\n";
    trims_ok = trims_ok && c.ok();
  }
  std::cout << (trims_ok ? "trim depths: PASS\n" : "trim depths: FAIL\n");
  return ok && trims_ok ? kOk : kValidation;
}

int cmd_synth(const fs::path& dir, std::size_t subjects, std::vector<std::size_t> size,
              const std::string& mode) {
  fs::create_directories(dir / "input");
  const Shape3 shape{size.at(0), size.at(1), size.at(2)};
  nlohmann::json list = nlohmann::json::array();
  for (std::size_t i = 0; i < subjects; ++i) {
    const std::string id = "synth-" + std::to_string(i + 1);
    const synth::HeadPair head = synth::head_phantom(shape, 1000 + i);
    // Misalign the MRI by a small rigid motion the register stage must undo.
    reg::RigidTransform t = reg::RigidTransform::identity(head.mri.world_center());
    t.angles_rad = {0.03 * double(i + 1), -0.02, 0.01};
    t.translation_mm = {2.0, -1.5 * double(i + 1), 1.0};
    const Volume moved = reg::resample(head.mri, t.inverse(), head.mri);
    const fs::path mri = dir / "input" / (id + "-mri.mhd");
    const fs::path ct = dir / "input" / (id + "-ct.mhd");
    formats::write_mhd(moved, mri);
    formats::write_mhd(head.ct, ct);
    nlohmann::json e{{"id", id},
                     {"mri", fs::relative(mri, dir).string()},
                     {"ct", fs::relative(ct, dir).string()},
                     {"modality", "T1"}};
    if (i == 0) {
      const fs::path pred = dir / "input" / (id + "-prediction.nii.gz");
      std::vector<float> noisy(head.ct.voxels().begin(), head.ct.voxels().end());
      for (std::size_t k = 0; k < noisy.size(); ++k) noisy[k] += float((k * 2654435761u) % 97);
      formats::write_nifti(head.ct.with_voxels(std::move(noisy), IntensityDomain::Real), pred);
      e["prediction"] = fs::relative(pred, dir).string();
    } else {
      e["trim"] = nlohmann::json::array({nlohmann::json::array({0, 2})});
    }
    list.push_back(std::move(e));
  }
  const nlohmann::json manifest{
      {"subjects", list},
      {"registration", {{"pyramid_levels", 2}, {"sampling_fraction", 0.5}}},
      {"clean", {{"connectivity", "face"}}},
      {"patch",
       {{"mode", mode}, {"stride", 8}, {"target_hw", {shape.height, shape.width}}}},
      {"loss_weights", {{"lambda_mae", 1.0}, {"lambda_gdl", 1e-7}}},
      {"lambda_boost", 0.5},
      {"output", "out"}};
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";
  std::cout << "wrote " << subjects << " synthetic subject(s) and "
            << (dir / "manifest.json").string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"voxelforge: MRI/CT preprocessing pipeline and verification tools"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--manifest", common.manifest, "Pipeline manifest (JSON)")->required();
    sub->add_option("--jobs", common.jobs, "Subjects processed in parallel")
        ->check(CLI::PositiveNumber);
    sub->add_option("--output", common.output, "Override the manifest output directory");
    sub->add_flag("--force", common.force, "Re-run stages even when up to date");
  };

  std::vector<std::pair<CLI::App*, pipeline::Stage>> stage_cmds;
  for (pipeline::Stage s : pipeline::all_stages()) {
    CLI::App* sub = app.add_subcommand(pipeline::to_string(s), "Run the " +
                                                                   pipeline::to_string(s) +
                                                                   " stage for every subject");
    add_common(sub);
    stage_cmds.emplace_back(sub, s);
  }

  CLI::App* run = app.add_subcommand("run", "Run every stage, or one with --stage");
  add_common(run);
  std::string stage_name;
  run->add_option("--stage", stage_name, "Only this stage");

  CLI::App* shapes = app.add_subcommand("verify-shapes", "Verify the network shape tables");
  std::string tables;
  bool as_json = false;
  shapes->add_option("--tables", tables, "Shape-table JSON (default: bundled)");
  shapes->add_flag("--json", as_json, "Print JSON instead of text");

  CLI::App* ds = app.add_subcommand("dataset-verify", "Check dataset counts and trim depths");
  std::string index_path;
  std::string trims_path;
  ds->add_option("--index", index_path, "Dataset index JSON (default: bundled)");
  ds->add_option("--trims", trims_path, "Trim table JSON (default: bundled)");

  CLI::App* syn = app.add_subcommand("synth", "Write synthetic subjects and a manifest");
  std::string synth_dir;
  std::size_t synth_subjects = 2;
  std::vector<std::size_t> synth_size{40, 64, 64};
  std::string synth_mode = "3d";
  syn->add_option("--output", synth_dir, "Directory to create")->required();
  syn->add_option("--subjects", synth_subjects, "Number of subjects")->check(CLI::PositiveNumber);
  syn->add_option("--size", synth_size, "Depth height width")->expected(3);
  syn->add_option("--mode", synth_mode, "Record mode (2d or 3d)")
      ->check(CLI::IsMember({"2d", "3d"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    spdlog::debug("kernels: {}", simd::active().name);
    for (const auto& [sub, stage] : stage_cmds) {
      if (sub->parsed()) return run_stage(common, pipeline::to_string(stage));
    }
    if (run->parsed()) {
      return run_stage(common, stage_name.empty() ? std::nullopt
                                                  : std::optional<std::string>(stage_name));
    }
    if (shapes->parsed()) return verify_shapes(tables, as_json);
    if (ds->parsed()) return dataset_verify(index_path, trims_path);
    if (syn->parsed()) return cmd_synth(synth_dir, synth_subjects, synth_size, synth_mode);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return kInternal;
  }
  return kInternal;
}
