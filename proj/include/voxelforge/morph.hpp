#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "voxelforge/volume.hpp"

namespace voxelforge::morph {

enum class Connectivity {
  Face,  // 6-neighbourhood
  Full,  // 26-neighbourhood (faces, edges, corners)
};

/// Sets every background voxel that is not connected to the grid border
/// (under `connectivity`, applied to the background) to 1.
Volume fill_holes(const Volume& mask, Connectivity connectivity = Connectivity::Face);

/// Keeps only the largest foreground component; ties go to the component
/// found first in storage order. An all-zero mask is returned unchanged.
Volume largest_component(const Volume& mask, Connectivity connectivity = Connectivity::Face);

struct CleanResult {
  Volume volume;
  Volume mask;
};

struct CleanOptions {
  /// Intensity threshold in the volume's own units; when unset, 10% of the
  /// way from the minimum to the maximum.
  std::optional<double> threshold;
  Connectivity connectivity = Connectivity::Face;
};

/// mask = fill_holes(largest component of (ct > threshold)); volume = ct * mask.
/// Throws EmptyForeground when nothing exceeds the threshold.
CleanResult clean_ct(const Volume& ct, const CleanOptions& options = {});

/// Half-open transverse slice range [lo, hi).
struct SliceRange {
  std::size_t lo = 0;
  std::size_t hi = 0;

  std::size_t size() const noexcept { return hi > lo ? hi - lo : 0; }
  bool operator==(const SliceRange&) const = default;
};

struct TrimManifestEntry {
  std::string subject;
  std::vector<SliceRange> trim;
};

void to_json(nlohmann::json& j, const SliceRange& r);
void from_json(const nlohmann::json& j, SliceRange& r);
void to_json(nlohmann::json& j, const TrimManifestEntry& e);
void from_json(const nlohmann::json& j, TrimManifestEntry& e);

/// Deletes the listed transverse slices. Ranges must be non-empty, inside the
/// depth and non-overlapping (RangeOutOfBounds otherwise); deleting every
/// slice is refused with EmptyVolume. The origin moves to the first kept slice.
Volume trim_slices(const Volume& v, std::span<const SliceRange> ranges);

}  // namespace voxelforge::morph
