#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace voxelforge {

using Vec3 = std::array<double, 3>;
/// Row-major 3x3 matrix.
using Mat3 = std::array<double, 9>;

inline constexpr Mat3 kIdentity3{1, 0, 0, 0, 1, 0, 0, 0, 1};

/// Grid extents in storage order: depth (slowest), height, width (fastest).
struct Shape3 {
  std::size_t depth = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t voxel_count() const noexcept { return depth * height * width; }
  bool operator==(const Shape3&) const = default;
};

/// World geometry in index order (x = width, y = height, z = depth), the
/// MetaImage/NIfTI convention:
///   world = origin + direction * (spacing ⊙ (x, y, z))
/// The columns of `direction` are the world directions of the x, y, z axes.
struct Geometry {
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{0.0, 0.0, 0.0};
  Mat3 direction = kIdentity3;

  Vec3 index_to_world(const Vec3& xyz) const noexcept;
  Vec3 world_to_index(const Vec3& world) const noexcept;
  bool operator==(const Geometry&) const = default;
};

enum class IntensityDomain {
  Raw16,  // integers in [0, 65535]
  Unit,   // reals in [0, 1]
  Mask,   // {0, 1}
  Real,   // unrestricted finite values (signed scanner data, interpolated output)
};

/// Native element type of the source data; voxels are held as float, which is
/// exact for every int16/uint16 value, and the tag lets writers restore the
/// original on-disk type losslessly.
enum class ScalarType { Int16, UInt16, Float32 };

/// Immutable 3D scalar grid plus world geometry.
class Volume {
 public:
  Volume() = default;
  /// Validates every invariant (voxel count, spacing, orthonormal direction,
  /// domain range) and throws Error(InvalidArgument) on violation.
  Volume(Shape3 shape, Geometry geometry, std::vector<float> voxels,
         IntensityDomain domain = IntensityDomain::Real,
         ScalarType scalar_type = ScalarType::Float32);

  static Volume zeros(Shape3 shape, Geometry geometry = {},
                      IntensityDomain domain = IntensityDomain::Real);

  const Shape3& shape() const noexcept { return shape_; }
  const Geometry& geometry() const noexcept { return geometry_; }
  IntensityDomain domain() const noexcept { return domain_; }
  ScalarType scalar_type() const noexcept { return scalar_type_; }
  std::span<const float> voxels() const noexcept { return voxels_; }
  bool empty() const noexcept { return voxels_.empty(); }

  std::size_t index(std::size_t z, std::size_t y, std::size_t x) const noexcept {
    return (z * shape_.height + y) * shape_.width + x;
  }
  float at(std::size_t z, std::size_t y, std::size_t x) const noexcept {
    return voxels_[index(z, y, x)];
  }

  /// Same grid and geometry, new contents.
  Volume with_voxels(std::vector<float> voxels, IntensityDomain domain,
                     ScalarType scalar_type = ScalarType::Float32) const;
  Volume with_geometry(Geometry geometry) const;

  /// World position of the geometric center of the grid.
  Vec3 world_center() const noexcept;

 private:
  Shape3 shape_{};
  Geometry geometry_{};
  std::vector<float> voxels_;
  IntensityDomain domain_ = IntensityDomain::Real;
  ScalarType scalar_type_ = ScalarType::Float32;
};

struct IntensityRange {
  float min = 0.0f;
  float max = 0.0f;
};

struct NormalizedVolume {
  Volume volume;
  /// Original range, kept so metrics can be computed back on the raw scale.
  IntensityRange range;
};

IntensityRange intensity_range(const Volume& v);

/// (x - min) / (max - min) into the Unit domain; constant input maps to zeros.
NormalizedVolume minmax_normalize(const Volume& v);

/// Inverse of minmax_normalize: x * (max - min) + min.
Volume denormalize(const Volume& unit, IntensityRange range);

struct AxisPlan {
  std::size_t low_pad = 0;
  std::size_t high_pad = 0;
  std::size_t low_crop = 0;
  std::size_t high_crop = 0;

  bool operator==(const AxisPlan&) const = default;
};

/// Per-axis plan in storage order (depth, height, width).
struct CropPadPlan {
  std::array<AxisPlan, 3> axes{};
};

/// Centered plan for the transverse (height, width) axes; the depth axis is
/// left untouched. An odd difference puts the extra voxel on the high side.
CropPadPlan plan_pad_or_crop(const Shape3& shape, std::size_t target_height,
                             std::size_t target_width);

/// Applies a plan; padding is 0 and the origin moves so every retained voxel
/// keeps its world position.
Volume apply_plan(const Volume& v, const CropPadPlan& plan);

Volume pad_or_crop(const Volume& v, std::size_t target_height, std::size_t target_width);

// Small helpers shared across modules.
Vec3 mat_vec(const Mat3& m, const Vec3& v) noexcept;
Mat3 mat_mul(const Mat3& a, const Mat3& b) noexcept;
Mat3 transpose(const Mat3& m) noexcept;
bool is_orthonormal(const Mat3& m, double tol = 1e-6) noexcept;

}  // namespace voxelforge
