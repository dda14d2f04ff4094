#include "voxelforge/lossmetrics.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "voxelforge/error.hpp"

namespace voxelforge::loss {

GridView GridView::flat(std::span<const float> data) { return {data, {data.size()}}; }

GridView GridView::of(const Volume& v) {
  const Shape3& s = v.shape();
  return {v.voxels(), {s.depth, s.height, s.width}};
}

void GridView::validate() const {
  if (extents.empty() || extents.size() > 3) {
    fail(ErrorKind::InvalidArgument, "grids must have rank 1, 2 or 3");
  }
  const std::size_t n =
      std::accumulate(extents.begin(), extents.end(), std::size_t{1}, std::multiplies<>());
  if (n != data.size() || n == 0) {
    fail(ErrorKind::InvalidArgument, "grid extents do not match its element count");
  }
}

namespace {

void check_pair(const GridView& x, const GridView& y) {
  x.validate();
  y.validate();
  if (x.extents != y.extents) fail(ErrorKind::ShapeMismatch, "grids differ in shape");
}

void check_scores(std::span<const float> d_real, std::span<const float> d_fake, bool log_domain) {
  if (d_real.size() != d_fake.size() || d_real.empty()) {
    fail(ErrorKind::ShapeMismatch, "score maps must be non-empty and equally sized");
  }
  for (std::size_t i = 0; i < d_real.size(); ++i) {
    const float r = d_real[i];
    const float f = d_fake[i];
    if (!std::isfinite(r) || !std::isfinite(f)) {
      fail(ErrorKind::DomainError, "discriminator scores must be finite");
    }
    if (log_domain && !(r > 0.0f && r <= 1.0f && f >= 0.0f && f < 1.0f)) {
      fail(ErrorKind::DomainError,
           "log-form adversarial loss needs d_real in (0, 1] and d_fake in [0, 1)");
    }
  }
}

template <typename Term>
double mean_of(std::span<const float> a, std::span<const float> b, Term term) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += term(double(a[i]), double(b[i]));
  return total / double(a.size());
}

struct AxisLayout {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisLayout layout(const GridView& g, std::size_t axis) {
  AxisLayout l;
  for (std::size_t a = 0; a < g.extents.size(); ++a) {
    if (a < axis) l.outer *= g.extents[a];
    if (a == axis) l.extent = g.extents[a];
    if (a > axis) l.inner *= g.extents[a];
  }
  return l;
}

}  // namespace

double mae(const GridView& x, const GridView& y, const simd::Kernels& k) {
  check_pair(x, y);
  return k.sum_abs_diff(x.data.data(), y.data.data(), x.data.size()) / double(x.data.size());
}

double mse(const GridView& x, const GridView& y, const simd::Kernels& k) {
  check_pair(x, y);
  return k.sum_sq_diff(x.data.data(), y.data.data(), x.data.size()) / double(x.data.size());
}

std::vector<double> spatial_gradient(const GridView& x, std::size_t axis, bool strict) {
  x.validate();
  if (axis >= x.rank()) fail(ErrorKind::InvalidArgument, "gradient axis exceeds grid rank");
  const AxisLayout l = layout(x, axis);
  std::vector<double> g(x.data.size(), 0.0);
  const std::size_t first = strict ? 1 : 0;
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t i = first; i + 1 < l.extent; ++i) {
      const std::size_t base = (o * l.extent + i) * l.inner;
      for (std::size_t r = 0; r < l.inner; ++r) {
        g[base + r] = double(x.data[base + r]) - double(x.data[base + l.inner + r]);
      }
    }
  }
  return g;
}

double gdl(const GridView& x, const GridView& y, bool strict) {
  check_pair(x, y);
  const double n = double(x.data.size());
  double total = 0.0;
  for (std::size_t axis = 0; axis < x.rank(); ++axis) {
    const AxisLayout l = layout(x, axis);
    const std::size_t first = strict ? 1 : 0;
    double sum = 0.0;
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t i = first; i + 1 < l.extent; ++i) {
        const std::size_t base = (o * l.extent + i) * l.inner;
        for (std::size_t r = 0; r < l.inner; ++r) {
          const std::size_t a = base + r;
          const std::size_t b = a + l.inner;
          const double gx = double(x.data[a]) - double(x.data[b]);
          const double gy = double(y.data[a]) - double(y.data[b]);
          sum += (gx - gy) * (gx - gy);
        }
      }
    }
    total += sum / n;
  }
  return total / double(x.rank());
}

void LossWeights::validate() const {
  for (double w : {lambda_mae, lambda_mse, lambda_gdl, lambda_adv}) {
    if (!std::isfinite(w) || w < 0.0) {
      fail(ErrorKind::InvalidArgument, "loss weights must be finite and non-negative");
    }
  }
}

void to_json(nlohmann::json& j, const LossWeights& w) {
  j = nlohmann::json{{"lambda_mae", w.lambda_mae},
                     {"lambda_mse", w.lambda_mse},
                     {"lambda_gdl", w.lambda_gdl},
                     {"lambda_adv", w.lambda_adv}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
  const LossWeights d;
  w.lambda_mae = j.value("lambda_mae", d.lambda_mae);
  w.lambda_mse = j.value("lambda_mse", d.lambda_mse);
  w.lambda_gdl = j.value("lambda_gdl", d.lambda_gdl);
  w.lambda_adv = j.value("lambda_adv", d.lambda_adv);
  w.validate();
}

double combined_loss(const GridView& x, const GridView& y, const LossWeights& w,
                     bool strict_gradient) {
  w.validate();
  check_pair(x, y);
  double total = 0.0;
  if (w.lambda_mae != 0.0) total += w.lambda_mae * mae(x, y);
  if (w.lambda_mse != 0.0) total += w.lambda_mse * mse(x, y);
  if (w.lambda_gdl != 0.0) total += w.lambda_gdl * gdl(x, y, strict_gradient);
  return total;
}

double adversarial_minmax(std::span<const float> d_real, std::span<const float> d_fake) {
  check_scores(d_real, d_fake, true);
  return mean_of(d_real, d_fake,
                 [](double r, double f) { return std::log(r) + std::log(1.0 - f); });
}

double adversarial_lsq(std::span<const float> d_real, std::span<const float> d_fake,
                       LsqForm form) {
  if (form == LsqForm::LogSquared) {
    check_scores(d_real, d_fake, true);
    return mean_of(d_real, d_fake, [](double r, double f) {
      return std::log(r * r) + std::log((1.0 - f) * (1.0 - f));
    });
  }
  check_scores(d_real, d_fake, false);
  return mean_of(d_real, d_fake,
                 [](double r, double f) { return (r - 1.0) * (r - 1.0) + f * f; });
}

Psnr psnr_from_mse(double mse, double max_value) {
  if (!(mse >= 0.0) || !std::isfinite(mse)) fail(ErrorKind::DomainError, "MSE must be >= 0");
  if (!(max_value > 0.0)) fail(ErrorKind::DomainError, "PSNR peak value must be positive");
  if (mse == 0.0) return {std::numeric_limits<double>::infinity(), true};
  return {10.0 * std::log10(max_value * max_value / mse), false};
}

Psnr psnr(const GridView& x, const GridView& y, double max_value) {
  return psnr_from_mse(mse(x, y), max_value);
}

VolumeMetrics measure(const Volume& pred, const Volume& truth, std::string name,
                      double max_value) {
  if (!(pred.shape() == truth.shape())) {
    fail(ErrorKind::ShapeMismatch, "prediction and truth differ in shape");
  }
  const GridView p = GridView::of(pred);
  const GridView t = GridView::of(truth);
  VolumeMetrics m;
  m.name = std::move(name);
  m.voxels = pred.voxels().size();
  m.mae = mae(p, t);
  m.mse = mse(p, t);
  m.psnr = psnr_from_mse(m.mse, max_value);
  return m;
}

VolumeMetrics measure(const NormalizedVolume& pred, const NormalizedVolume& truth,
                      std::string name, double max_value) {
  auto raw = [](const NormalizedVolume& n) {
    return n.volume.domain() == IntensityDomain::Unit ? denormalize(n.volume, n.range) : n.volume;
  };
  return measure(raw(pred), raw(truth), std::move(name), max_value);
}

EvalReport summarize(std::vector<VolumeMetrics> volumes, double max_value) {
  EvalReport r;
  r.volumes = std::move(volumes);
  if (r.volumes.empty()) fail(ErrorKind::EmptyVolume, "nothing to summarize");
  double mae_sum = 0.0;
  double mse_sum = 0.0;
  double psnr_sum = 0.0;
  bool any_infinite = false;
  for (const VolumeMetrics& v : r.volumes) {
    r.voxels += v.voxels;
    mae_sum += v.mae * double(v.voxels);
    mse_sum += v.mse * double(v.voxels);
    any_infinite = any_infinite || v.psnr.infinite;
    psnr_sum += v.psnr.db;
  }
  r.mae = mae_sum / double(r.voxels);
  r.mse = mse_sum / double(r.voxels);
  r.psnr_of_mean_mse = psnr_from_mse(r.mse, max_value);
  if (any_infinite) {
    r.mean_psnr = {std::numeric_limits<double>::infinity(), true};
  } else {
    r.mean_psnr = {psnr_sum / double(r.volumes.size()), false};
  }
  return r;
}

EvalReport evaluate(const Volume& pred, const Volume& truth, double max_value) {
  return summarize({measure(pred, truth, "volume", max_value)}, max_value);
}

void to_json(nlohmann::json& j, const Psnr& p) {
  if (p.infinite) {
    j = nlohmann::json{{"db", nullptr}, {"infinite", true}};
  } else {
    j = nlohmann::json{{"db", p.db}, {"infinite", false}};
  }
}

void to_json(nlohmann::json& j, const VolumeMetrics& m) {
  j = nlohmann::json{
      {"name", m.name}, {"voxels", m.voxels}, {"mae", m.mae}, {"mse", m.mse}, {"psnr", m.psnr}};
}

void to_json(nlohmann::json& j, const EvalReport& r) {
  j = nlohmann::json{{"volumes", r.volumes},
                     {"aggregate",
                      {{"voxels", r.voxels},
                       {"count", r.volumes.size()},
                       {"mae", r.mae},
                       {"mse", r.mse},
                       {"psnr_of_mean_mse", r.psnr_of_mean_mse},
                       {"mean_psnr", r.mean_psnr}}}};
}

namespace {

std::string psnr_text(const Psnr& p) {
  if (p.infinite) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", p.db);
  return buf;
}

std::string row(const std::string& name, const std::string& voxels, double mae, double mse,
                const std::string& psnr) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-24s %12s %12.1f %14.0f %10s\n", name.c_str(), voxels.c_str(),
                mae, mse, psnr.c_str());
  return buf;
}

}  // namespace

std::string format_table(const EvalReport& r) {
  char header[160];
  std::snprintf(header, sizeof header, "%-24s %12s %12s %14s %10s\n", "volume", "voxels", "MAE",
                "MSE", "PSNR [dB]");
  std::string out = header;
  for (const VolumeMetrics& v : r.volumes) {
    out += row(v.name, std::to_string(v.voxels), v.mae, v.mse, psnr_text(v.psnr));
  }
  out += row("all (PSNR of mean MSE)", std::to_string(r.voxels), r.mae, r.mse,
             psnr_text(r.psnr_of_mean_mse));
  out += row("all (mean of PSNR)", std::to_string(r.voxels), r.mae, r.mse,
             psnr_text(r.mean_psnr));
  return out;
}

}  // namespace voxelforge::loss
