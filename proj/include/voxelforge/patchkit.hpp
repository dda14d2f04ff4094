#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "voxelforge/simd/kernels.hpp"
#include "voxelforge/volume.hpp"

namespace voxelforge::patch {

inline constexpr std::size_t kInputEdge = 32;
inline constexpr std::size_t kTargetEdge = 16;
/// Context margin between the input and target corners.
inline constexpr std::size_t kMargin = (kInputEdge - kTargetEdge) / 2;
inline constexpr std::size_t kTargetVoxels = kTargetEdge * kTargetEdge * kTargetEdge;
inline constexpr std::size_t kInputVoxels = kInputEdge * kInputEdge * kInputEdge;

/// Voxel index in storage order.
struct Index3 {
  std::size_t z = 0;
  std::size_t y = 0;
  std::size_t x = 0;

  bool operator==(const Index3&) const = default;
};

/// 32³ MRI context block and the 16³ CT block at its center. `anchor` is the
/// target's low corner; the input's low corner is anchor - kMargin.
struct PatchPair {
  std::vector<float> input;
  std::vector<float> target;
  Index3 anchor;
};

struct ExtractOptions {
  std::size_t stride = 8;
  /// Pairs whose target has a smaller fraction of non-zero voxels are skipped.
  double min_foreground_fraction = 0.0;
};

/// Lattice along one axis: kMargin, kMargin + stride, ... with the last
/// position snapped to extent - kInputEdge + kMargin. Throws VolumeTooSmall
/// when extent < kInputEdge.
std::vector<std::size_t> axis_anchors(std::size_t extent, std::size_t stride);

/// All anchors in depth-major order.
std::vector<Index3> lattice(const Shape3& shape, std::size_t stride);

/// Copies an edge³ block with low corner `corner` (must be in bounds).
void copy_block(const Volume& v, Index3 corner, std::size_t edge, float* out);

std::vector<PatchPair> extract_pairs(const Volume& mri, const Volume& ct,
                                     const ExtractOptions& options = {});

enum class PatchWeight {
  Uniform,
  /// Separable triangle 1 - |i - 7.5| / 8 per axis.
  CenterTapered,
};

/// Weight of each voxel of a target patch, storage order.
const std::array<float, kTargetVoxels>& patch_weights(PatchWeight mode);

/// Streaming (sum, weight) accumulator for overlapping 16³ patches.
class AggregationBuffer {
 public:
  AggregationBuffer(Shape3 shape, PatchWeight mode = PatchWeight::Uniform,
                    const simd::Kernels& kernels = simd::active());

  /// Throws AnchorOutOfBounds unless the patch lies inside the grid.
  void add(std::span<const float> patch, Index3 anchor);
  /// Adds only the part of the patch with z in [z_begin, z_end).
  void add_clipped(std::span<const float> patch, Index3 anchor, std::size_t z_begin,
                   std::size_t z_end);
  void merge(const AggregationBuffer& other);

  const Shape3& shape() const noexcept { return shape_; }
  std::span<const float> sum() const noexcept { return sum_; }
  std::span<const float> weight() const noexcept { return weight_; }

  /// sum / weight where weight > 0, else 0.
  Volume finish(const Geometry& geometry = {},
                IntensityDomain domain = IntensityDomain::Real) const;

 private:
  void check_anchor(Index3 anchor) const;

  Shape3 shape_;
  const std::array<float, kTargetVoxels>* weights_;
  const simd::Kernels* kernels_;
  std::vector<float> sum_;
  std::vector<float> weight_;
};

struct PatchRef {
  std::span<const float> values;
  Index3 anchor;
};

/// Overlap-weighted reconstruction. With threads > 1 every worker owns a depth
/// slab, so the result is bit-identical to the single-threaded one.
Volume aggregate(std::span<const PatchRef> patches, Shape3 shape,
                 PatchWeight mode = PatchWeight::Uniform, const Geometry& geometry = {},
                 std::size_t threads = 1);

/// 1 + lambda * mask. Throws InvalidArgument for a negative lambda or a
/// non-binary mask.
Volume make_boost_weights(const Volume& mask, double lambda_boost);

}  // namespace voxelforge::patch
