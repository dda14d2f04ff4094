#include "voxelforge/volume.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "voxelforge/error.hpp"
#include "voxelforge/simd/kernels.hpp"

namespace voxelforge {

Vec3 mat_vec(const Mat3& m, const Vec3& v) noexcept {
  return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2], m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
          m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

Mat3 mat_mul(const Mat3& a, const Mat3& b) noexcept {
  Mat3 out{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += a[r * 3 + k] * b[k * 3 + c];
      out[r * 3 + c] = s;
    }
  }
  return out;
}

Mat3 transpose(const Mat3& m) noexcept {
  return {m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]};
}

bool is_orthonormal(const Mat3& m, double tol) noexcept {
  const Mat3 p = mat_mul(transpose(m), m);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      const double expected = r == c ? 1.0 : 0.0;
      if (!(std::abs(p[r * 3 + c] - expected) <= tol)) return false;
    }
  }
  return true;
}

Vec3 Geometry::index_to_world(const Vec3& xyz) const noexcept {
  const Vec3 scaled{xyz[0] * spacing[0], xyz[1] * spacing[1], xyz[2] * spacing[2]};
  const Vec3 r = mat_vec(direction, scaled);
  return {origin[0] + r[0], origin[1] + r[1], origin[2] + r[2]};
}

Vec3 Geometry::world_to_index(const Vec3& world) const noexcept {
  const Vec3 rel{world[0] - origin[0], world[1] - origin[1], world[2] - origin[2]};
  const Vec3 r = mat_vec(transpose(direction), rel);
  return {r[0] / spacing[0], r[1] / spacing[1], r[2] / spacing[2]};
}

namespace {

void validate_domain(std::span<const float> voxels, IntensityDomain domain) {
  auto bad = [](const char* what, std::size_t i, float v) {
    fail(ErrorKind::InvalidArgument,
         std::string(what) + " violated at voxel " + std::to_string(i) + " (" +
             std::to_string(v) + ")");
  };
  for (std::size_t i = 0; i < voxels.size(); ++i) {
    const float v = voxels[i];
    if (!std::isfinite(v)) bad("finite intensity", i, v);
    switch (domain) {
      case IntensityDomain::Raw16:
        if (v < 0.0f || v > 65535.0f || v != std::floor(v)) bad("Raw16 domain", i, v);
        break;
      case IntensityDomain::Unit:
        if (v < 0.0f || v > 1.0f) bad("Unit domain", i, v);
        break;
      case IntensityDomain::Mask:
        if (v != 0.0f && v != 1.0f) bad("Mask domain", i, v);
        break;
      case IntensityDomain::Real:
        break;
    }
  }
}

}  // namespace

Volume::Volume(Shape3 shape, Geometry geometry, std::vector<float> voxels,
               IntensityDomain domain, ScalarType scalar_type)
    : shape_(shape),
      geometry_(geometry),
      voxels_(std::move(voxels)),
      domain_(domain),
      scalar_type_(scalar_type) {
  if (voxels_.size() != shape_.voxel_count()) {
    fail(ErrorKind::InvalidArgument, "voxel count " + std::to_string(voxels_.size()) +
                                         " does not match shape product " +
                                         std::to_string(shape_.voxel_count()));
  }
  for (double s : geometry_.spacing) {
    if (!(s > 0.0) || !std::isfinite(s)) fail(ErrorKind::InvalidArgument, "spacing must be positive");
  }
  if (!is_orthonormal(geometry_.direction)) {
    fail(ErrorKind::InvalidArgument, "direction matrix is not orthonormal");
  }
  validate_domain(voxels_, domain_);
}

Volume Volume::zeros(Shape3 shape, Geometry geometry, IntensityDomain domain) {
  return Volume(shape, geometry, std::vector<float>(shape.voxel_count(), 0.0f), domain);
}

Volume Volume::with_voxels(std::vector<float> voxels, IntensityDomain domain,
                           ScalarType scalar_type) const {
  return Volume(shape_, geometry_, std::move(voxels), domain, scalar_type);
}

Volume Volume::with_geometry(Geometry geometry) const {
  return Volume(shape_, geometry, voxels_, domain_, scalar_type_);
}

Vec3 Volume::world_center() const noexcept {
  return geometry_.index_to_world({(static_cast<double>(shape_.width) - 1.0) / 2.0,
                                   (static_cast<double>(shape_.height) - 1.0) / 2.0,
                                   (static_cast<double>(shape_.depth) - 1.0) / 2.0});
}

IntensityRange intensity_range(const Volume& v) {
  if (v.empty()) fail(ErrorKind::EmptyVolume, "intensity range of an empty volume");
  IntensityRange r;
  simd::active().min_max(v.voxels().data(), v.voxels().size(), &r.min, &r.max);
  return r;
}

NormalizedVolume minmax_normalize(const Volume& v) {
  const IntensityRange range = intensity_range(v);
  std::vector<float> out(v.voxels().size(), 0.0f);
  const float width = range.max - range.min;
  if (width > 0.0f) {
    simd::active().normalize(v.voxels().data(), out.data(), out.size(), range.min, width);
  }
  return {v.with_voxels(std::move(out), IntensityDomain::Unit), range};
}

Volume denormalize(const Volume& unit, IntensityRange range) {
  std::vector<float> out(unit.voxels().size());
  simd::active().scale_shift(unit.voxels().data(), out.data(), out.size(),
                             range.max - range.min, range.min);
  return unit.with_voxels(std::move(out), IntensityDomain::Real);
}

namespace {

AxisPlan plan_axis(std::size_t extent, std::size_t target) {
  AxisPlan p;
  if (target > extent) {
    const std::size_t total = target - extent;
    p.low_pad = total / 2;
    p.high_pad = total - p.low_pad;
  } else if (target < extent) {
    const std::size_t total = extent - target;
    p.low_crop = total / 2;
    p.high_crop = total - p.low_crop;
  }
  return p;
}

std::size_t planned_extent(std::size_t extent, const AxisPlan& p) {
  return extent + p.low_pad + p.high_pad - p.low_crop - p.high_crop;
}

}  // namespace

CropPadPlan plan_pad_or_crop(const Shape3& shape, std::size_t target_height,
                             std::size_t target_width) {
  if (target_height == 0 || target_width == 0) {
    fail(ErrorKind::InvalidArgument, "pad_or_crop target extents must be positive");
  }
  CropPadPlan plan;
  plan.axes[1] = plan_axis(shape.height, target_height);
  plan.axes[2] = plan_axis(shape.width, target_width);
  return plan;
}

Volume apply_plan(const Volume& v, const CropPadPlan& plan) {
  const Shape3& in = v.shape();
  const std::size_t in_ext[3] = {in.depth, in.height, in.width};
  for (int a = 0; a < 3; ++a) {
    const AxisPlan& p = plan.axes[a];
    if ((p.low_pad + p.high_pad) > 0 && (p.low_crop + p.high_crop) > 0) {
      fail(ErrorKind::InvalidArgument, "plan both pads and crops one axis");
    }
    if (p.low_crop + p.high_crop > in_ext[a]) {
      fail(ErrorKind::InvalidArgument, "plan crops more than the axis extent");
    }
  }
  const Shape3 out{planned_extent(in.depth, plan.axes[0]), planned_extent(in.height, plan.axes[1]),
                   planned_extent(in.width, plan.axes[2])};
  std::vector<float> voxels(out.voxel_count(), 0.0f);

  // Signed source offset of output index 0 along each axis.
  auto offset = [](const AxisPlan& p) {
    return static_cast<std::ptrdiff_t>(p.low_crop) - static_cast<std::ptrdiff_t>(p.low_pad);
  };
  const std::ptrdiff_t oz = offset(plan.axes[0]);
  const std::ptrdiff_t oy = offset(plan.axes[1]);
  const std::ptrdiff_t ox = offset(plan.axes[2]);

  const std::ptrdiff_t x_begin = std::max<std::ptrdiff_t>(0, -ox);
  const std::ptrdiff_t x_end =
      std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(out.width),
                               static_cast<std::ptrdiff_t>(in.width) - ox);
  const auto src = v.voxels();
  for (std::size_t z = 0; z < out.depth; ++z) {
    const std::ptrdiff_t sz = static_cast<std::ptrdiff_t>(z) + oz;
    if (sz < 0 || sz >= static_cast<std::ptrdiff_t>(in.depth)) continue;
    for (std::size_t y = 0; y < out.height; ++y) {
      const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + oy;
      if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(in.height)) continue;
      if (x_end <= x_begin) continue;
      const std::size_t src_row = v.index(static_cast<std::size_t>(sz), static_cast<std::size_t>(sy),
                                          static_cast<std::size_t>(x_begin + ox));
      const std::size_t dst_row = (z * out.height + y) * out.width + static_cast<std::size_t>(x_begin);
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(src_row), x_end - x_begin,
                  voxels.begin() + static_cast<std::ptrdiff_t>(dst_row));
    }
  }

  Geometry g = v.geometry();
  g.origin = v.geometry().index_to_world(
      {static_cast<double>(ox), static_cast<double>(oy), static_cast<double>(oz)});
  return Volume(out, g, std::move(voxels), v.domain(), v.scalar_type());
}

Volume pad_or_crop(const Volume& v, std::size_t target_height, std::size_t target_width) {
  return apply_plan(v, plan_pad_or_crop(v.shape(), target_height, target_width));
}

}  // namespace voxelforge
