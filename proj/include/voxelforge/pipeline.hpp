#pragma once

// Manifest-driven preprocessing pipeline. Each stage reads the previous
// stage's files from <output>/<subject>/ and records a content-hash stamp so
// an unchanged re-run performs no writes.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "voxelforge/example.hpp"
#include "voxelforge/lossmetrics.hpp"
#include "voxelforge/morph.hpp"
#include "voxelforge/register.hpp"

namespace voxelforge::pipeline {

namespace fs = std::filesystem;

struct SubjectEntry {
  std::string id;
  fs::path mri;
  fs::path ct;
  std::string modality = "T1";
  std::vector<morph::SliceRange> trim;
  /// Optional synthesized CT on the raw scale, compared by the evaluate stage.
  std::optional<fs::path> prediction;
};

struct CleanSettings {
  std::optional<double> threshold;
  morph::Connectivity connectivity = morph::Connectivity::Face;
};

struct PatchSettings {
  rec::RecordMode mode = rec::RecordMode::Patches3D;
  std::size_t stride = 8;
  double min_foreground_fraction = 0.0;
  std::size_t target_height = 384;
  std::size_t target_width = 384;
};

struct Manifest {
  std::vector<SubjectEntry> subjects;
  reg::RegistrationConfig registration;
  CleanSettings clean;
  PatchSettings patch;
  loss::LossWeights loss_weights;
  double lambda_boost = 0.0;
  fs::path output = "out";

  /// Throws InvalidArgument on duplicate ids or paths and bad settings.
  void validate() const;
};

/// Relative paths resolve against `base_dir`.
Manifest manifest_from_json(const nlohmann::json& j, const fs::path& base_dir);
nlohmann::json manifest_to_json(const Manifest& m);
Manifest load_manifest(const fs::path& path);

enum class Stage { Convert, Register, Clean, Patch, Export, Evaluate };

const std::vector<Stage>& all_stages();
std::string to_string(Stage s);
Stage parse_stage(const std::string& s);

struct StageOutcome {
  std::string subject;  // empty for the cross-subject evaluate stage
  Stage stage = Stage::Convert;
  bool skipped = false;
  std::vector<fs::path> outputs;
};

struct RunOptions {
  std::size_t jobs = 1;
  bool force = false;
};

/// Runs one stage for every subject, up to `jobs` subjects at a time. Module
/// errors are rethrown with subject and stage context and their kind kept.
std::vector<StageOutcome> run_stage(const Manifest& m, Stage stage, const RunOptions& options = {});

/// Every stage in order; stages within a subject are sequential.
std::vector<StageOutcome> run_all(const Manifest& m, const RunOptions& options = {});

/// Stage file locations.
fs::path subject_dir(const Manifest& m, const std::string& id);
fs::path records_path(const Manifest& m, const SubjectEntry& s);

/// SHA-256 of a file's bytes, lowercase hex.
std::string file_sha256(const fs::path& path);

/// Reads a volume by extension (.mhd, .nii, .nii.gz).
Volume read_volume(const fs::path& path);

}  // namespace voxelforge::pipeline
