#include <algorithm>
#include <cmath>
#include <string>

#include "voxelforge/error.hpp"
#include "voxelforge/register.hpp"

namespace voxelforge::reg {

namespace {

std::vector<double> uniform_edges(std::size_t bins, IntensityRange r) {
  std::vector<double> e(bins + 1);
  const double lo = r.min;
  const double width = double(r.max) - double(r.min);
  for (std::size_t k = 0; k <= bins; ++k) e[k] = lo + width * double(k) / double(bins);
  return e;
}

std::size_t uniform_bin(float v, double lo, double width, std::size_t bins) {
  if (!(width > 0.0)) return 0;
  const double u = (double(v) - lo) / width * double(bins);
  if (!(u > 0.0)) return 0;
  return std::min(static_cast<std::size_t>(u), bins - 1);
}

std::size_t edge_bin(float v, const std::vector<double>& edges) {
  const auto it = std::upper_bound(edges.begin(), edges.end(), double(v));
  const auto idx = static_cast<std::ptrdiff_t>(it - edges.begin()) - 1;
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(
      idx, 0, static_cast<std::ptrdiff_t>(edges.size()) - 2));
}

double entropy_of(const std::vector<double>& counts, double total) {
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) {
      const double p = c / total;
      h -= p * std::log(p);
    }
  }
  return h;
}

}  // namespace

JointHistogram JointHistogram::uniform(std::size_t bins, IntensityRange fixed,
                                       IntensityRange moving) {
  if (bins < 2) fail(ErrorKind::InvalidArgument, "histogram needs at least 2 bins");
  JointHistogram h;
  h.bins_ = bins;
  h.counts_.assign(bins * bins, 0.0);
  h.edges_fixed_ = uniform_edges(bins, fixed);
  h.edges_moving_ = uniform_edges(bins, moving);
  h.uniform_ = true;
  return h;
}

JointHistogram JointHistogram::with_edges(std::vector<double> edges_fixed,
                                          std::vector<double> edges_moving) {
  if (edges_fixed.size() != edges_moving.size() || edges_fixed.size() < 3) {
    fail(ErrorKind::InvalidArgument, "edge lists must have equal length >= 3");
  }
  for (const auto* e : {&edges_fixed, &edges_moving}) {
    if (std::adjacent_find(e->begin(), e->end(), std::greater_equal<>()) != e->end()) {
      fail(ErrorKind::InvalidArgument, "histogram edges must be strictly increasing");
    }
  }
  JointHistogram h;
  h.bins_ = edges_fixed.size() - 1;
  h.counts_.assign(h.bins_ * h.bins_, 0.0);
  h.edges_fixed_ = std::move(edges_fixed);
  h.edges_moving_ = std::move(edges_moving);
  return h;
}

std::size_t JointHistogram::bin_fixed(float v) const noexcept {
  if (uniform_) {
    return uniform_bin(v, edges_fixed_.front(), edges_fixed_.back() - edges_fixed_.front(), bins_);
  }
  return edge_bin(v, edges_fixed_);
}

std::size_t JointHistogram::bin_moving(float v) const noexcept {
  if (uniform_) {
    return uniform_bin(v, edges_moving_.front(), edges_moving_.back() - edges_moving_.front(),
                       bins_);
  }
  return edge_bin(v, edges_moving_);
}

void JointHistogram::add(std::span<const float> fixed, std::span<const float> moving) {
  if (fixed.size() != moving.size()) {
    fail(ErrorKind::ShapeMismatch, "histogram inputs differ in length");
  }
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    counts_[bin_fixed(fixed[i]) * bins_ + bin_moving(moving[i])] += 1.0;
  }
  total_ += double(fixed.size());
}

std::vector<double> JointHistogram::marginal_fixed() const {
  std::vector<double> m(bins_, 0.0);
  for (std::size_t a = 0; a < bins_; ++a) {
    for (std::size_t b = 0; b < bins_; ++b) m[a] += counts_[a * bins_ + b];
  }
  return m;
}

std::vector<double> JointHistogram::marginal_moving() const {
  std::vector<double> m(bins_, 0.0);
  for (std::size_t a = 0; a < bins_; ++a) {
    for (std::size_t b = 0; b < bins_; ++b) m[b] += counts_[a * bins_ + b];
  }
  return m;
}

double JointHistogram::mutual_information() const {
  return mutual_information_from_counts(counts_, bins_);
}

double JointHistogram::entropy_fixed() const { return entropy_of(marginal_fixed(), total_); }

double JointHistogram::entropy_moving() const { return entropy_of(marginal_moving(), total_); }

JointHistogram JointHistogram::transposed() const {
  JointHistogram t = *this;
  std::swap(t.edges_fixed_, t.edges_moving_);
  for (std::size_t a = 0; a < bins_; ++a) {
    for (std::size_t b = 0; b < bins_; ++b) t.counts_[b * bins_ + a] = counts_[a * bins_ + b];
  }
  return t;
}

double mutual_information_from_counts(std::span<const double> counts, std::size_t bins) {
  std::vector<double> row(bins, 0.0);
  std::vector<double> col(bins, 0.0);
  double total = 0.0;
  for (std::size_t a = 0; a < bins; ++a) {
    for (std::size_t b = 0; b < bins; ++b) {
      const double c = counts[a * bins + b];
      row[a] += c;
      col[b] += c;
      total += c;
    }
  }
  if (!(total > 0.0)) return 0.0;
  double mi = 0.0;
  for (std::size_t a = 0; a < bins; ++a) {
    if (row[a] == 0.0) continue;
    for (std::size_t b = 0; b < bins; ++b) {
      const double c = counts[a * bins + b];
      if (c > 0.0) mi += c * std::log(c * total / (row[a] * col[b]));
    }
  }
  return std::max(0.0, mi / total);
}

double marginal_entropy(const Volume& v, std::size_t bins) {
  const IntensityRange r = intensity_range(v);
  JointHistogram h = JointHistogram::uniform(bins, r, r);
  h.add(v.voxels(), v.voxels());
  return h.entropy_fixed();
}

double mutual_information(const Volume& fixed, const Volume& moved, std::size_t bins) {
  if (!(fixed.shape() == moved.shape())) {
    fail(ErrorKind::ShapeMismatch, "mutual information needs volumes on the same grid");
  }
  const IntensityRange rf = intensity_range(fixed);
  const IntensityRange rm = intensity_range(moved);
  if (!(rf.max > rf.min)) fail(ErrorKind::DegenerateIntensity, "fixed volume is constant");
  if (!(rm.max > rm.min)) fail(ErrorKind::DegenerateIntensity, "moved volume is constant");
  JointHistogram h = JointHistogram::uniform(bins, rf, rm);
  h.add(fixed.voxels(), moved.voxels());
  return h.mutual_information();
}

}  // namespace voxelforge::reg
