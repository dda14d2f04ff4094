#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "voxelforge/error.hpp"
#include "index_map.hpp"
#include "voxelforge/register.hpp"

namespace voxelforge::reg {

RigidTransform RigidTransform::identity(const Vec3& center) {
  RigidTransform t;
  t.center_mm = center;
  return t;
}

Mat3 RigidTransform::rotation() const noexcept {
  const double ca = std::cos(angles_rad[0]), sa = std::sin(angles_rad[0]);
  const double cb = std::cos(angles_rad[1]), sb = std::sin(angles_rad[1]);
  const double cg = std::cos(angles_rad[2]), sg = std::sin(angles_rad[2]);
  return {cg * cb, cg * sb * sa - sg * ca, cg * sb * ca + sg * sa,
          sg * cb, sg * sb * sa + cg * ca, sg * sb * ca - cg * sa,
          -sb,     cb * sa,                cb * ca};
}

RigidTransform RigidTransform::from_rotation(const Mat3& r, const Vec3& translation,
                                             const Vec3& center) {
  RigidTransform t;
  t.translation_mm = translation;
  t.center_mm = center;
  const double sb = std::clamp(-r[6], -1.0, 1.0);
  if (std::abs(sb) < 1.0 - 1e-12) {
    t.angles_rad = {std::atan2(r[7], r[8]), std::asin(sb), std::atan2(r[3], r[0])};
  } else if (sb > 0.0) {
    // Gimbal lock: only x - z is determined; put it all on x.
    t.angles_rad = {std::atan2(r[1], r[4]), M_PI / 2.0, 0.0};
  } else {
    t.angles_rad = {std::atan2(-r[1], r[4]), -M_PI / 2.0, 0.0};
  }
  return t;
}

Vec3 RigidTransform::apply(const Vec3& p) const noexcept {
  const Vec3 rel{p[0] - center_mm[0], p[1] - center_mm[1], p[2] - center_mm[2]};
  const Vec3 r = mat_vec(rotation(), rel);
  return {r[0] + center_mm[0] + translation_mm[0], r[1] + center_mm[1] + translation_mm[1],
          r[2] + center_mm[2] + translation_mm[2]};
}

RigidTransform RigidTransform::inverse() const {
  const Mat3 rt = transpose(rotation());
  const Vec3 back = mat_vec(rt, translation_mm);
  return from_rotation(rt, {-back[0], -back[1], -back[2]}, center_mm);
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  const Mat3 r = mat_mul(a.rotation(), b.rotation());
  // a(b(p)) = Ra Rb (p - cb) + Ra (cb + Tb - ca) + ca + Ta
  const Vec3 inner{b.center_mm[0] + b.translation_mm[0] - a.center_mm[0],
                   b.center_mm[1] + b.translation_mm[1] - a.center_mm[1],
                   b.center_mm[2] + b.translation_mm[2] - a.center_mm[2]};
  const Vec3 ra = mat_vec(a.rotation(), inner);
  Vec3 t{};
  for (int i = 0; i < 3; ++i) t[i] = ra[i] + a.center_mm[i] + a.translation_mm[i] - b.center_mm[i];
  return RigidTransform::from_rotation(r, t, b.center_mm);
}

double rotation_difference(const RigidTransform& a, const RigidTransform& b) {
  const Mat3 rel = mat_mul(transpose(a.rotation()), b.rotation());
  const double c = std::clamp((rel[0] + rel[4] + rel[8] - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

void to_json(nlohmann::json& j, const RigidTransform& t) {
  j = nlohmann::json{{"angles_rad", t.angles_rad},
                     {"translation_mm", t.translation_mm},
                     {"center_mm", t.center_mm}};
}

void from_json(const nlohmann::json& j, RigidTransform& t) {
  try {
    j.at("angles_rad").get_to(t.angles_rad);
    j.at("translation_mm").get_to(t.translation_mm);
    j.at("center_mm").get_to(t.center_mm);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("transform record: ") + e.what());
  }
}

namespace detail {

IndexMap make_index_map(const Geometry& gm, const RigidTransform& t, const Geometry& gr) {
  const Mat3 to_moving = transpose(gm.direction);
  const Mat3 scale_r{gr.spacing[0], 0, 0, 0, gr.spacing[1], 0, 0, 0, gr.spacing[2]};
  IndexMap m;
  m.linear = mat_mul(to_moving, mat_mul(t.rotation(), mat_mul(gr.direction, scale_r)));
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) m.linear[row * 3 + col] /= gm.spacing[row];
  }
  const Vec3 origin_moved = t.apply(gr.origin);
  m.offset = mat_vec(to_moving, {origin_moved[0] - gm.origin[0], origin_moved[1] - gm.origin[1],
                                 origin_moved[2] - gm.origin[2]});
  for (int i = 0; i < 3; ++i) m.offset[i] /= gm.spacing[i];
  return m;
}

}  // namespace detail

Volume resample(const Volume& moving, const RigidTransform& t, const Volume& reference,
                const simd::Kernels& kernels) {
  const detail::IndexMap index_map =
      detail::make_index_map(moving.geometry(), t, reference.geometry());
  const Shape3& rs = reference.shape();
  const Shape3& ms = moving.shape();
  const simd::SampleGrid grid{moving.voxels().data(), static_cast<std::int32_t>(ms.width),
                              static_cast<std::int32_t>(ms.height),
                              static_cast<std::int32_t>(ms.depth)};
  std::vector<float> out(rs.voxel_count());
  for (std::size_t z = 0; z < rs.depth; ++z) {
    for (std::size_t y = 0; y < rs.height; ++y) {
      const simd::RowMap map = index_map.row(y, z);
      kernels.trilinear_row(grid, map, out.data() + (z * rs.height + y) * rs.width, rs.width);
    }
  }
  IntensityDomain domain = IntensityDomain::Real;
  if (moving.domain() == IntensityDomain::Unit) {
    for (float& v : out) v = std::clamp(v, 0.0f, 1.0f);
    domain = IntensityDomain::Unit;
  }
  return Volume(rs, reference.geometry(), std::move(out), domain, ScalarType::Float32);
}

}  // namespace voxelforge::reg
