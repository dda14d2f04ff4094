#pragma once

// Rigid multi-modal coregistration by maximization of mutual information.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "voxelforge/simd/kernels.hpp"
#include "voxelforge/volume.hpp"

namespace voxelforge::reg {

/// Maps fixed-space world points to moving-space world points:
///   p' = R (p - center) + center + translation,  R = Rz * Ry * Rx
/// so the x rotation is applied first.
struct RigidTransform {
  Vec3 angles_rad{0.0, 0.0, 0.0};
  Vec3 translation_mm{0.0, 0.0, 0.0};
  Vec3 center_mm{0.0, 0.0, 0.0};

  static RigidTransform identity(const Vec3& center = {0.0, 0.0, 0.0});
  /// Decomposes a rotation matrix into the angle convention above.
  static RigidTransform from_rotation(const Mat3& rotation, const Vec3& translation,
                                      const Vec3& center);

  Mat3 rotation() const noexcept;
  Vec3 apply(const Vec3& p) const noexcept;
  RigidTransform inverse() const;

  bool operator==(const RigidTransform&) const = default;
};

/// (a ∘ b)(p) = a(b(p)), expressed about b's center.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

/// Angle of the relative rotation between two transforms, in radians.
double rotation_difference(const RigidTransform& a, const RigidTransform& b);

void to_json(nlohmann::json& j, const RigidTransform& t);
void from_json(const nlohmann::json& j, RigidTransform& t);

/// Trilinear resampling of `moving` onto the grid of `reference` through `t`;
/// samples that fall outside `moving` are 0.
Volume resample(const Volume& moving, const RigidTransform& t, const Volume& reference,
                const simd::Kernels& kernels = simd::active());

/// B x B joint intensity histogram. Rows index the fixed volume's bins.
class JointHistogram {
 public:
  /// Uniform bins over [min, max] of each side (max falls in the last bin,
  /// values outside clamp to the end bins).
  static JointHistogram uniform(std::size_t bins, IntensityRange fixed, IntensityRange moving);
  /// Arbitrary strictly increasing edges (bins + 1 of them per side).
  static JointHistogram with_edges(std::vector<double> edges_fixed,
                                   std::vector<double> edges_moving);

  void add(std::span<const float> fixed, std::span<const float> moving);

  std::size_t bins() const noexcept { return bins_; }
  double count(std::size_t fixed_bin, std::size_t moving_bin) const noexcept {
    return counts_[fixed_bin * bins_ + moving_bin];
  }
  std::span<const double> counts() const noexcept { return counts_; }
  double total() const noexcept { return total_; }
  const std::vector<double>& edges_fixed() const noexcept { return edges_fixed_; }
  const std::vector<double>& edges_moving() const noexcept { return edges_moving_; }

  std::size_t bin_fixed(float v) const noexcept;
  std::size_t bin_moving(float v) const noexcept;

  std::vector<double> marginal_fixed() const;
  std::vector<double> marginal_moving() const;

  /// Σ p(a,b) ln[p(a,b) / (p(a) p(b))], in nats.
  double mutual_information() const;
  double entropy_fixed() const;
  double entropy_moving() const;

  JointHistogram transposed() const;

 private:
  JointHistogram() = default;

  std::size_t bins_ = 0;
  std::vector<double> counts_;
  std::vector<double> edges_fixed_;
  std::vector<double> edges_moving_;
  bool uniform_ = false;
  double total_ = 0.0;
};

/// MI from raw B x B counts (row = fixed bin); shared by the histogram class
/// and the registration hot loop.
double mutual_information_from_counts(std::span<const double> counts, std::size_t bins);

/// Shannon entropy (nats) of the volume's uniform-bin intensity histogram.
double marginal_entropy(const Volume& v, std::size_t bins = 64);

/// MI between two volumes on the same grid, each min-max binned. Throws
/// ShapeMismatch or DegenerateIntensity (constant volume).
double mutual_information(const Volume& fixed, const Volume& moved, std::size_t bins = 64);

struct RegistrationConfig {
  std::size_t bins = 64;
  /// Per pyramid level; one iteration probes ±step along each of 6 parameters.
  std::size_t max_iterations = 200;
  /// Search stops at a level once the step falls below this many voxels of
  /// that level.
  double convergence_tol = 0.02;
  std::size_t pyramid_levels = 3;
  /// Fraction of fixed-grid rows sampled for MI, in (0, 1].
  double sampling_fraction = 1.0;
  /// Initial step at the coarsest level, in voxels of that level.
  double initial_step = 2.0;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const RegistrationConfig& c);
void from_json(const nlohmann::json& j, RegistrationConfig& c);

struct TracePoint {
  std::size_t level = 0;  // 0 = full resolution
  std::size_t iteration = 0;
  double mutual_information = 0.0;
};

struct RegistrationResult {
  RigidTransform transform;
  /// Accepted steps; MI is non-decreasing within each level.
  std::vector<TracePoint> trace;
  /// No probe improved MI at the coarsest level; `transform` is the identity.
  bool did_not_improve = false;
  std::size_t evaluations = 0;
};

/// 2x mean downsampling per axis (axes of extent 1 are kept).
Volume downsample2(const Volume& v);

/// Estimates the transform mapping fixed (CT) space into moving (MRI) space so
/// that resample(moving, result.transform, fixed) aligns with fixed.
/// Derivative-free regular-step compass search over a mean pyramid, with
/// rotations scaled by half the fixed volume's diagonal so steps move
/// comparable distances. Rotation center is the fixed volume's world center.
RegistrationResult coregister(const Volume& fixed, const Volume& moving,
                              const RegistrationConfig& config = {});

}  // namespace voxelforge::reg
