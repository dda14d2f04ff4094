#pragma once

#include "voxelforge/register.hpp"

namespace voxelforge::reg::detail {

/// Affine map from reference voxel index (x, y, z) to moving continuous index:
/// idx_m = linear * idx_r + offset.
struct IndexMap {
  Mat3 linear{};
  Vec3 offset{};

  simd::RowMap row(std::size_t y, std::size_t z) const noexcept {
    simd::RowMap m;
    for (int i = 0; i < 3; ++i) {
      m.step[i] = static_cast<float>(linear[i * 3 + 0]);
      m.start[i] = static_cast<float>(linear[i * 3 + 1] * double(y) +
                                      linear[i * 3 + 2] * double(z) + offset[i]);
    }
    return m;
  }
};

IndexMap make_index_map(const Geometry& moving, const RigidTransform& t, const Geometry& reference);

}  // namespace voxelforge::reg::detail
