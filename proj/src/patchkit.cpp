#include "voxelforge/patchkit.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "voxelforge/error.hpp"

namespace voxelforge::patch {

namespace {

std::string describe(Index3 a) {
  return "(" + std::to_string(a.z) + ", " + std::to_string(a.y) + ", " + std::to_string(a.x) + ")";
}

std::array<float, kTargetVoxels> make_weights(PatchWeight mode) {
  std::array<float, kTargetVoxels> w{};
  std::array<float, kTargetEdge> profile{};
  for (std::size_t i = 0; i < kTargetEdge; ++i) {
    const double center = (double(kTargetEdge) - 1.0) / 2.0;
    profile[i] = mode == PatchWeight::Uniform
                     ? 1.0f
                     : float(1.0 - std::abs(double(i) - center) / (double(kTargetEdge) / 2.0));
  }
  for (std::size_t z = 0; z < kTargetEdge; ++z) {
    for (std::size_t y = 0; y < kTargetEdge; ++y) {
      for (std::size_t x = 0; x < kTargetEdge; ++x) {
        w[(z * kTargetEdge + y) * kTargetEdge + x] = profile[z] * profile[y] * profile[x];
      }
    }
  }
  return w;
}

}  // namespace

std::vector<std::size_t> axis_anchors(std::size_t extent, std::size_t stride) {
  if (stride == 0) fail(ErrorKind::InvalidArgument, "patch stride must be positive");
  if (extent < kInputEdge) {
    fail(ErrorKind::VolumeTooSmall, "extent " + std::to_string(extent) + " is below the " +
                                        std::to_string(kInputEdge) + "-voxel patch");
  }
  const std::size_t last = extent - kInputEdge + kMargin;
  std::vector<std::size_t> out;
  for (std::size_t a = kMargin; a < last; a += stride) out.push_back(a);
  out.push_back(last);
  return out;
}

std::vector<Index3> lattice(const Shape3& shape, std::size_t stride) {
  const auto zs = axis_anchors(shape.depth, stride);
  const auto ys = axis_anchors(shape.height, stride);
  const auto xs = axis_anchors(shape.width, stride);
  std::vector<Index3> out;
  out.reserve(zs.size() * ys.size() * xs.size());
  for (std::size_t z : zs) {
    for (std::size_t y : ys) {
      for (std::size_t x : xs) out.push_back({z, y, x});
    }
  }
  return out;
}

void copy_block(const Volume& v, Index3 c, std::size_t edge, float* out) {
  const Shape3& s = v.shape();
  if (c.z + edge > s.depth || c.y + edge > s.height || c.x + edge > s.width) {
    fail(ErrorKind::AnchorOutOfBounds, "block at " + describe(c) + " leaves the volume");
  }
  const auto src = v.voxels();
  for (std::size_t z = 0; z < edge; ++z) {
    for (std::size_t y = 0; y < edge; ++y) {
      const float* row = src.data() + v.index(c.z + z, c.y + y, c.x);
      std::copy(row, row + edge, out + (z * edge + y) * edge);
    }
  }
}

std::vector<PatchPair> extract_pairs(const Volume& mri, const Volume& ct,
                                     const ExtractOptions& options) {
  if (!(mri.shape() == ct.shape())) {
    fail(ErrorKind::ShapeMismatch, "MRI and CT must share a grid for patch extraction");
  }
  const auto anchors = lattice(mri.shape(), options.stride);
  std::vector<PatchPair> out;
  out.reserve(anchors.size());
  for (const Index3& a : anchors) {
    PatchPair p;
    p.anchor = a;
    p.target.resize(kTargetVoxels);
    copy_block(ct, a, kTargetEdge, p.target.data());
    if (options.min_foreground_fraction > 0.0) {
      const auto nonzero = std::count_if(p.target.begin(), p.target.end(),
                                         [](float v) { return v != 0.0f; });
      if (double(nonzero) < options.min_foreground_fraction * double(kTargetVoxels)) continue;
    }
    p.input.resize(kInputVoxels);
    copy_block(mri, {a.z - kMargin, a.y - kMargin, a.x - kMargin}, kInputEdge, p.input.data());
    out.push_back(std::move(p));
  }
  return out;
}

const std::array<float, kTargetVoxels>& patch_weights(PatchWeight mode) {
  static const auto uniform = make_weights(PatchWeight::Uniform);
  static const auto tapered = make_weights(PatchWeight::CenterTapered);
  return mode == PatchWeight::Uniform ? uniform : tapered;
}

AggregationBuffer::AggregationBuffer(Shape3 shape, PatchWeight mode,
                                     const simd::Kernels& kernels)
    : shape_(shape),
      weights_(&patch_weights(mode)),
      kernels_(&kernels),
      sum_(shape.voxel_count(), 0.0f),
      weight_(shape.voxel_count(), 0.0f) {}

void AggregationBuffer::check_anchor(Index3 a) const {
  if (a.z + kTargetEdge > shape_.depth || a.y + kTargetEdge > shape_.height ||
      a.x + kTargetEdge > shape_.width) {
    fail(ErrorKind::AnchorOutOfBounds, "patch anchor " + describe(a) + " leaves the grid");
  }
}

void AggregationBuffer::add(std::span<const float> patch, Index3 anchor) {
  add_clipped(patch, anchor, 0, shape_.depth);
}

void AggregationBuffer::add_clipped(std::span<const float> patch, Index3 anchor,
                                    std::size_t z_begin, std::size_t z_end) {
  if (patch.size() != kTargetVoxels) {
    fail(ErrorKind::ShapeMismatch, "aggregated patches must hold 16^3 values");
  }
  check_anchor(anchor);
  const std::size_t lo = std::max(anchor.z, z_begin);
  const std::size_t hi = std::min(anchor.z + kTargetEdge, z_end);
  for (std::size_t z = lo; z < hi; ++z) {
    const std::size_t pz = z - anchor.z;
    for (std::size_t py = 0; py < kTargetEdge; ++py) {
      const std::size_t dst = (z * shape_.height + anchor.y + py) * shape_.width + anchor.x;
      const std::size_t src = (pz * kTargetEdge + py) * kTargetEdge;
      kernels_->accumulate(sum_.data() + dst, weight_.data() + dst, patch.data() + src,
                           weights_->data() + src, kTargetEdge);
    }
  }
}

void AggregationBuffer::merge(const AggregationBuffer& other) {
  if (!(other.shape_ == shape_)) fail(ErrorKind::ShapeMismatch, "cannot merge differing grids");
  for (std::size_t i = 0; i < sum_.size(); ++i) {
    sum_[i] += other.sum_[i];
    weight_[i] += other.weight_[i];
  }
}

Volume AggregationBuffer::finish(const Geometry& geometry, IntensityDomain domain) const {
  std::vector<float> out(sum_.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = weight_[i] > 0.0f ? sum_[i] / weight_[i] : 0.0f;
  }
  if (domain == IntensityDomain::Unit) {
    for (float& v : out) v = std::clamp(v, 0.0f, 1.0f);
  }
  return Volume(shape_, geometry, std::move(out), domain);
}

Volume aggregate(std::span<const PatchRef> patches, Shape3 shape, PatchWeight mode,
                 const Geometry& geometry, std::size_t threads) {
  AggregationBuffer buffer(shape, mode);
  for (const PatchRef& p : patches) {
    if (p.anchor.z + kTargetEdge > shape.depth || p.anchor.y + kTargetEdge > shape.height ||
        p.anchor.x + kTargetEdge > shape.width) {
      fail(ErrorKind::AnchorOutOfBounds, "patch anchor " + describe(p.anchor) + " leaves the grid");
    }
  }
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(shape.depth, 1));
  if (threads == 1) {
    for (const PatchRef& p : patches) buffer.add(p.values, p.anchor);
  } else {
    std::vector<std::thread> workers;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t z0 = shape.depth * t / threads;
      const std::size_t z1 = shape.depth * (t + 1) / threads;
      workers.emplace_back([&, z0, z1] {
        for (const PatchRef& p : patches) {
          if (p.anchor.z >= z1 || p.anchor.z + kTargetEdge <= z0) continue;
          buffer.add_clipped(p.values, p.anchor, z0, z1);
        }
      });
    }
    for (auto& w : workers) w.join();
  }
  return buffer.finish(geometry);
}

Volume make_boost_weights(const Volume& mask, double lambda_boost) {
  if (!(lambda_boost >= 0.0) || !std::isfinite(lambda_boost)) {
    fail(ErrorKind::InvalidArgument, "lambda_boost must be finite and non-negative");
  }
  const auto m = mask.voxels();
  std::vector<float> out(m.size());
  const float boosted = float(1.0 + lambda_boost);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] == 0.0f) {
      out[i] = 1.0f;
    } else if (m[i] == 1.0f) {
      out[i] = boosted;
    } else {
      fail(ErrorKind::InvalidArgument, "boost mask must be binary");
    }
  }
  return mask.with_voxels(std::move(out), IntensityDomain::Real);
}

}  // namespace voxelforge::patch
