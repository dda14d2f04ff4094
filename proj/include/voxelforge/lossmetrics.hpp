#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "voxelforge/simd/kernels.hpp"
#include "voxelforge/volume.hpp"

namespace voxelforge::loss {

/// Row-major view over a grid of rank 1 to 3; the last extent varies fastest.
struct GridView {
  std::span<const float> data;
  std::vector<std::size_t> extents;

  static GridView flat(std::span<const float> data);
  static GridView of(const Volume& v);

  std::size_t rank() const noexcept { return extents.size(); }
  /// Throws InvalidArgument unless the extents multiply to data.size() >= 1.
  void validate() const;
};

double mae(const GridView& x, const GridView& y, const simd::Kernels& k = simd::active());
double mse(const GridView& x, const GridView& y, const simd::Kernels& k = simd::active());

/// g[i] = x[i] - x[i + 1] along `axis`. With `strict` (the default) only
/// interior indices 1 <= i <= n - 2 are non-zero; otherwise every i <= n - 2.
std::vector<double> spatial_gradient(const GridView& x, std::size_t axis, bool strict = true);

/// Mean over the grid's axes of the MSE between the two gradient fields.
double gdl(const GridView& x, const GridView& y, bool strict = true);

struct LossWeights {
  double lambda_mae = 1.0;
  double lambda_mse = 0.0;
  double lambda_gdl = 0.0;
  double lambda_adv = 0.0;

  void validate() const;
};

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);

/// lambda_mae * mae + lambda_mse * mse + lambda_gdl * gdl. Terms with a zero
/// weight are not evaluated.
double combined_loss(const GridView& x, const GridView& y, const LossWeights& w,
                     bool strict_gradient = true);

/// mean(ln d_real + ln(1 - d_fake)); d_real in (0, 1], d_fake in [0, 1).
double adversarial_minmax(std::span<const float> d_real, std::span<const float> d_fake);

enum class LsqForm {
  /// mean((d_real - 1)^2 + d_fake^2)
  Standard,
  /// mean(ln(d_real^2) + ln((1 - d_fake)^2)), domain as for minmax
  LogSquared,
};

double adversarial_lsq(std::span<const float> d_real, std::span<const float> d_fake,
                       LsqForm form = LsqForm::Standard);

inline constexpr double kRaw16Max = 65535.0;

struct Psnr {
  double db = 0.0;
  /// mse == 0; db is +inf.
  bool infinite = false;
};

Psnr psnr_from_mse(double mse, double max_value = kRaw16Max);
Psnr psnr(const GridView& x, const GridView& y, double max_value = kRaw16Max);

struct VolumeMetrics {
  std::string name;
  std::size_t voxels = 0;
  double mae = 0.0;
  double mse = 0.0;
  Psnr psnr;
};

struct EvalReport {
  std::vector<VolumeMetrics> volumes;
  std::size_t voxels = 0;
  /// Voxel-weighted means.
  double mae = 0.0;
  double mse = 0.0;
  /// PSNR of the aggregate MSE.
  Psnr psnr_of_mean_mse;
  /// Mean of per-volume PSNR values; infinite if any volume is.
  Psnr mean_psnr;
};

VolumeMetrics measure(const Volume& pred, const Volume& truth, std::string name = {},
                      double max_value = kRaw16Max);

/// Metrics on the raw scale: Unit-domain inputs are first mapped back with the
/// stored original ranges.
VolumeMetrics measure(const NormalizedVolume& pred, const NormalizedVolume& truth,
                      std::string name = {}, double max_value = kRaw16Max);

EvalReport summarize(std::vector<VolumeMetrics> volumes, double max_value = kRaw16Max);

EvalReport evaluate(const Volume& pred, const Volume& truth, double max_value = kRaw16Max);

void to_json(nlohmann::json& j, const Psnr& p);
void to_json(nlohmann::json& j, const VolumeMetrics& m);
void to_json(nlohmann::json& j, const EvalReport& r);

/// Aligned-column text table: one row per volume plus two aggregate rows.
std::string format_table(const EvalReport& r);

}  // namespace voxelforge::loss
