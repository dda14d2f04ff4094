#pragma once

// Deterministic synthetic volumes for tests, benchmarks and demos.

#include <cstdint>
#include <vector>

#include "voxelforge/register.hpp"
#include "voxelforge/volume.hpp"

namespace voxelforge::synth {

struct Blob {
  Vec3 center;
  double sigma = 1.0;
  double amplitude = 1.0;
};

/// Sum of isotropic Gaussians, evaluated analytically in world space.
struct BlobField {
  std::vector<Blob> blobs;

  double operator()(const Vec3& world) const noexcept;
};

struct BlobOptions {
  std::size_t count = 40;
  double sigma_min = 3.0;
  double sigma_max = 7.0;
};

/// Blobs spread over the world box of `shape` under `geometry`.
BlobField random_blobs(const Shape3& shape, const Geometry& geometry, std::uint64_t seed,
                       const BlobOptions& options = {});

/// Samples `field` at every voxel; with `warp`, voxel p takes field(warp(p)).
Volume render(const BlobField& field, const Shape3& shape, const Geometry& geometry,
              const reg::RigidTransform* warp = nullptr);

/// Non-monotonic intensity remap used to mimic a second modality.
Volume remap_contrast(const Volume& v);

struct HeadPair {
  Volume mri;
  Volume ct;
};

/// Ellipsoidal head with skull shell, ventricles and, for CT, a patient-table
/// strip below the head. Intensities are integers in [0, 65535].
HeadPair head_phantom(const Shape3& shape, std::uint64_t seed);

}  // namespace voxelforge::synth
