#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "index_map.hpp"
#include "voxelforge/error.hpp"
#include "voxelforge/register.hpp"

namespace voxelforge::reg {

void RegistrationConfig::validate() const {
  if (bins < 8) fail(ErrorKind::InvalidArgument, "registration needs at least 8 histogram bins");
  if (pyramid_levels < 1) fail(ErrorKind::InvalidArgument, "pyramid_levels must be >= 1");
  if (!(sampling_fraction > 0.0 && sampling_fraction <= 1.0)) {
    fail(ErrorKind::InvalidArgument, "sampling_fraction must lie in (0, 1]");
  }
  if (!(convergence_tol > 0.0)) fail(ErrorKind::InvalidArgument, "convergence_tol must be positive");
  if (!(initial_step > 0.0)) fail(ErrorKind::InvalidArgument, "initial_step must be positive");
  if (max_iterations == 0) fail(ErrorKind::InvalidArgument, "max_iterations must be positive");
}

void to_json(nlohmann::json& j, const RegistrationConfig& c) {
  j = nlohmann::json{{"bins", c.bins},
                     {"max_iterations", c.max_iterations},
                     {"convergence_tol", c.convergence_tol},
                     {"pyramid_levels", c.pyramid_levels},
                     {"sampling_fraction", c.sampling_fraction},
                     {"initial_step", c.initial_step},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, RegistrationConfig& c) {
  const RegistrationConfig d;
  c.bins = j.value("bins", d.bins);
  c.max_iterations = j.value("max_iterations", d.max_iterations);
  c.convergence_tol = j.value("convergence_tol", d.convergence_tol);
  c.pyramid_levels = j.value("pyramid_levels", d.pyramid_levels);
  c.sampling_fraction = j.value("sampling_fraction", d.sampling_fraction);
  c.initial_step = j.value("initial_step", d.initial_step);
  c.seed = j.value("seed", d.seed);
  c.validate();
}

Volume downsample2(const Volume& v) {
  const Shape3& s = v.shape();
  auto half = [](std::size_t n) { return n >= 2 ? n / 2 : n; };
  const Shape3 out{half(s.depth), half(s.height), half(s.width)};
  const std::size_t fz = s.depth >= 2 ? 2 : 1;
  const std::size_t fy = s.height >= 2 ? 2 : 1;
  const std::size_t fx = s.width >= 2 ? 2 : 1;
  const float inv = 1.0f / float(fz * fy * fx);
  std::vector<float> voxels(out.voxel_count());
  const auto src = v.voxels();
  for (std::size_t z = 0; z < out.depth; ++z) {
    for (std::size_t y = 0; y < out.height; ++y) {
      for (std::size_t x = 0; x < out.width; ++x) {
        float sum = 0.0f;
        for (std::size_t dz = 0; dz < fz; ++dz) {
          for (std::size_t dy = 0; dy < fy; ++dy) {
            for (std::size_t dx = 0; dx < fx; ++dx) {
              sum += src[v.index(z * fz + dz, y * fy + dy, x * fx + dx)];
            }
          }
        }
        voxels[(z * out.height + y) * out.width + x] = sum * inv;
      }
    }
  }
  Geometry g = v.geometry();
  const double factor[3] = {double(fx), double(fy), double(fz)};
  g.origin = v.geometry().index_to_world(
      {(factor[0] - 1.0) / 2.0, (factor[1] - 1.0) / 2.0, (factor[2] - 1.0) / 2.0});
  for (int i = 0; i < 3; ++i) g.spacing[i] *= factor[i];
  IntensityDomain domain = IntensityDomain::Real;
  if (v.domain() == IntensityDomain::Unit) {
    for (float& x : voxels) x = std::clamp(x, 0.0f, 1.0f);
    domain = IntensityDomain::Unit;
  }
  return Volume(out, g, std::move(voxels), domain);
}

namespace {

using Params = std::array<double, 6>;

struct Row {
  std::uint32_t y;
  std::uint32_t z;
};

inline std::size_t bin_of(float v, float lo, float scale, std::size_t bins) {
  const float u = (v - lo) * scale;
  if (!(u > 0.0f)) return 0;
  return std::min(static_cast<std::size_t>(u), bins - 1);
}

/// MI between a fixed pyramid level and the moving level resampled through a
/// candidate transform; fixed-side bins are computed once.
class LevelMetric {
 public:
  LevelMetric(const Volume& fixed, const Volume& moving, std::size_t max_bins,
              double sampling_fraction, std::uint64_t seed)
      : fixed_(fixed), moving_(moving) {
    const Shape3& s = fixed.shape();
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution keep(sampling_fraction);
    for (std::uint32_t z = 0; z < s.depth; ++z) {
      for (std::uint32_t y = 0; y < s.height; ++y) {
        if (sampling_fraction >= 1.0 || keep(rng)) rows_.push_back({y, z});
      }
    }
    if (rows_.empty()) rows_.push_back({0, 0});

    const double samples = double(rows_.size() * s.width);
    bins_ = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(std::cbrt(samples))), 8,
                                    max_bins);

    const IntensityRange rf = intensity_range(fixed);
    const IntensityRange rm = intensity_range(moving);
    if (!(rf.max > rf.min)) fail(ErrorKind::DegenerateIntensity, "fixed volume is constant");
    if (!(rm.max > rm.min)) fail(ErrorKind::DegenerateIntensity, "moving volume is constant");
    moving_lo_ = rm.min;
    moving_scale_ = float(bins_) / (rm.max - rm.min);
    const float fixed_scale = float(bins_) / (rf.max - rf.min);

    fixed_bins_.reserve(rows_.size() * s.width);
    for (const Row& r : rows_) {
      for (std::size_t x = 0; x < s.width; ++x) {
        fixed_bins_.push_back(static_cast<std::uint16_t>(
            bin_of(fixed.at(r.z, r.y, x), rf.min, fixed_scale, bins_)));
      }
    }
    counts_.resize(bins_ * bins_);
    row_.resize(s.width);
  }

  std::size_t bins() const noexcept { return bins_; }

  double operator()(const RigidTransform& t) {
    const detail::IndexMap map = detail::make_index_map(moving_.geometry(), t, fixed_.geometry());
    const Shape3& ms = moving_.shape();
    const simd::SampleGrid grid{moving_.voxels().data(), std::int32_t(ms.width),
                                std::int32_t(ms.height), std::int32_t(ms.depth)};
    const simd::Kernels& k = simd::active();
    std::fill(counts_.begin(), counts_.end(), 0.0);
    const std::size_t width = fixed_.shape().width;
    const std::uint16_t* fb = fixed_bins_.data();
    for (const Row& r : rows_) {
      k.trilinear_row(grid, map.row(r.y, r.z), row_.data(), width);
      for (std::size_t x = 0; x < width; ++x) {
        counts_[std::size_t(fb[x]) * bins_ + bin_of(row_[x], moving_lo_, moving_scale_, bins_)] += 1.0;
      }
      fb += width;
    }
    return mutual_information_from_counts(counts_, bins_);
  }

 private:
  const Volume& fixed_;
  const Volume& moving_;
  std::vector<Row> rows_;
  std::vector<std::uint16_t> fixed_bins_;
  std::vector<double> counts_;
  std::vector<float> row_;
  std::size_t bins_ = 0;
  float moving_lo_ = 0.0f;
  float moving_scale_ = 1.0f;
};

double max_spacing(const Volume& v) {
  const auto& s = v.geometry().spacing;
  return std::max({s[0], s[1], s[2]});
}

}  // namespace

RegistrationResult coregister(const Volume& fixed, const Volume& moving,
                              const RegistrationConfig& config) {
  config.validate();
  std::vector<Volume> fixed_pyramid{fixed};
  std::vector<Volume> moving_pyramid{moving};
  for (std::size_t l = 1; l < config.pyramid_levels; ++l) {
    const Shape3& f = fixed_pyramid.back().shape();
    const Shape3& m = moving_pyramid.back().shape();
    if (std::min({f.depth, f.height, f.width, m.depth, m.height, m.width}) < 16) break;
    fixed_pyramid.push_back(downsample2(fixed_pyramid.back()));
    moving_pyramid.push_back(downsample2(moving_pyramid.back()));
  }

  const Vec3 center = fixed.world_center();
  const Shape3& fs = fixed.shape();
  const auto& sp = fixed.geometry().spacing;
  const double half_diagonal =
      0.5 * std::sqrt(std::pow((double(fs.width) - 1.0) * sp[0], 2.0) +
                      std::pow((double(fs.height) - 1.0) * sp[1], 2.0) +
                      std::pow((double(fs.depth) - 1.0) * sp[2], 2.0));
  // Rotation parameters are searched as arc length at half the diagonal.
  const double rotation_scale = std::max(half_diagonal, 1.0);

  auto to_transform = [&](const Params& u) {
    RigidTransform t = RigidTransform::identity(center);
    for (int i = 0; i < 3; ++i) {
      t.angles_rad[i] = u[i] / rotation_scale;
      t.translation_mm[i] = u[i + 3];
    }
    return t;
  };

  RegistrationResult result;
  Params u{};
  const std::size_t coarsest = fixed_pyramid.size() - 1;
  for (std::size_t level = coarsest + 1; level-- > 0;) {
    LevelMetric metric(fixed_pyramid[level], moving_pyramid[level], config.bins,
                       config.sampling_fraction, config.seed + level);
    const double voxel = max_spacing(fixed_pyramid[level]);
    double step = (level == coarsest ? config.initial_step : 1.0) * voxel;
    const double stop = config.convergence_tol * voxel;

    double current = metric(to_transform(u));
    ++result.evaluations;
    result.trace.push_back({level, 0, current});
    bool moved = false;
    for (std::size_t iter = 1; iter <= config.max_iterations && step >= stop; ++iter) {
      double best = current;
      Params best_u = u;
      for (int d = 0; d < 6; ++d) {
        for (double sign : {1.0, -1.0}) {
          Params cand = u;
          cand[d] += sign * step;
          const double value = metric(to_transform(cand));
          ++result.evaluations;
          if (value > best) {
            best = value;
            best_u = cand;
          }
        }
      }
      if (best > current) {
        u = best_u;
        current = best;
        moved = true;
        result.trace.push_back({level, iter, current});
      } else {
        step *= 0.5;
      }
    }
    if (level == coarsest && !moved) {
      result.transform = RigidTransform::identity(center);
      result.did_not_improve = true;
      return result;
    }
  }
  result.transform = to_transform(u);
  return result;
}

}  // namespace voxelforge::reg
