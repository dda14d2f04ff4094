#pragma once

// Dataset bookkeeping: modality counts of the public registration dataset
// and the per-subject transverse trims.

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "voxelforge/morph.hpp"
#include "voxelforge/volume.hpp"

namespace voxelforge::dataset {

struct IndexSubject {
  std::string id;
  std::vector<std::string> modalities;
};

struct DatasetIndex {
  /// Modalities the index claims to transcribe completely.
  std::vector<std::string> modalities;
  std::vector<IndexSubject> subjects;
};

DatasetIndex load_index(const std::filesystem::path& path);
std::filesystem::path default_index_path();

struct ModalityCounts {
  std::map<std::string, std::size_t> all;
  /// Counted only over subjects that have CT.
  std::map<std::string, std::size_t> with_ct;
};

ModalityCounts count(const DatasetIndex& index);

/// Published subject counts per modality.
const ModalityCounts& reference_counts();

struct CountCheck {
  std::string row;  // "all" or "with CT"
  std::string modality;
  std::size_t expected = 0;
  std::size_t actual = 0;
  bool ok() const noexcept { return expected == actual; }
};

struct DatasetReport {
  std::vector<CountCheck> checks;
  bool ok() const;
};

/// Compares the index against the reference counts for every modality the
/// index declares.
DatasetReport verify(const DatasetIndex& index);

std::string format_report(const DatasetReport& r);

struct TrimCase {
  std::string subject;
  std::string split;
  Shape3 before;
  Shape3 after;
  std::vector<morph::SliceRange> trim;
};

std::vector<TrimCase> load_trim_table(const std::filesystem::path& path);
std::filesystem::path default_trim_table_path();

struct TrimCheck {
  std::string subject;
  Shape3 expected;
  Shape3 actual;
  bool ok() const noexcept { return expected == actual; }
};

/// Applies each case's trims to a volume of its `before` shape. With
/// `full_planes` false the transverse planes are shrunk to 1x1 (the depth
/// arithmetic is identical) and the reported shape restores the plane size.
std::vector<TrimCheck> verify_trims(const std::vector<TrimCase>& cases, bool full_planes = false);

}  // namespace voxelforge::dataset
