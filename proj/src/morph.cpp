#include "voxelforge/morph.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <string>

#include <nlohmann/json.hpp>

#include "voxelforge/error.hpp"

namespace voxelforge::morph {

namespace {

struct Offset {
  int dz, dy, dx;
};

std::vector<Offset> neighbourhood(Connectivity c) {
  std::vector<Offset> out;
  for (int dz = -1; dz <= 1; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int manhattan = std::abs(dz) + std::abs(dy) + std::abs(dx);
        if (manhattan == 0) continue;
        if (c == Connectivity::Face && manhattan != 1) continue;
        out.push_back({dz, dy, dx});
      }
    }
  }
  return out;
}

void require_binary(const Volume& v) {
  for (float x : v.voxels()) {
    if (x != 0.0f && x != 1.0f) fail(ErrorKind::InvalidArgument, "mask must be binary");
  }
}

/// Breadth-first flood over voxels where `eligible` holds, starting at the
/// seeds; marks visited voxels with `label` and returns how many it reached.
template <typename Eligible>
std::size_t flood(const Shape3& s, const std::vector<Offset>& nbrs, std::vector<std::int32_t>& labels,
                  std::deque<std::size_t>& queue, std::int32_t label, Eligible eligible) {
  std::size_t reached = 0;
  const auto h = static_cast<std::ptrdiff_t>(s.height);
  const auto w = static_cast<std::ptrdiff_t>(s.width);
  const auto d = static_cast<std::ptrdiff_t>(s.depth);
  while (!queue.empty()) {
    const std::size_t idx = queue.front();
    queue.pop_front();
    ++reached;
    const auto z = static_cast<std::ptrdiff_t>(idx / (s.height * s.width));
    const auto y = static_cast<std::ptrdiff_t>((idx / s.width) % s.height);
    const auto x = static_cast<std::ptrdiff_t>(idx % s.width);
    for (const Offset& o : nbrs) {
      const std::ptrdiff_t nz = z + o.dz, ny = y + o.dy, nx = x + o.dx;
      if (nz < 0 || ny < 0 || nx < 0 || nz >= d || ny >= h || nx >= w) continue;
      const auto n = static_cast<std::size_t>((nz * h + ny) * w + nx);
      if (labels[n] != 0 || !eligible(n)) continue;
      labels[n] = label;
      queue.push_back(n);
    }
  }
  return reached;
}

}  // namespace

Volume fill_holes(const Volume& mask, Connectivity connectivity) {
  require_binary(mask);
  const Shape3& s = mask.shape();
  const auto vox = mask.voxels();
  std::vector<std::int32_t> outside(vox.size(), 0);
  std::deque<std::size_t> queue;
  auto background = [&](std::size_t i) { return vox[i] == 0.0f; };
  for (std::size_t z = 0; z < s.depth; ++z) {
    for (std::size_t y = 0; y < s.height; ++y) {
      for (std::size_t x = 0; x < s.width; ++x) {
        const bool border = z == 0 || y == 0 || x == 0 || z + 1 == s.depth ||
                            y + 1 == s.height || x + 1 == s.width;
        if (!border) continue;
        const std::size_t i = mask.index(z, y, x);
        if (background(i) && outside[i] == 0) {
          outside[i] = 1;
          queue.push_back(i);
        }
      }
    }
  }
  flood(s, neighbourhood(connectivity), outside, queue, 1, background);
  std::vector<float> out(vox.size());
  for (std::size_t i = 0; i < vox.size(); ++i) out[i] = outside[i] ? 0.0f : 1.0f;
  return mask.with_voxels(std::move(out), IntensityDomain::Mask);
}

Volume largest_component(const Volume& mask, Connectivity connectivity) {
  require_binary(mask);
  const auto vox = mask.voxels();
  const auto nbrs = neighbourhood(connectivity);
  std::vector<std::int32_t> labels(vox.size(), 0);
  std::deque<std::size_t> queue;
  auto foreground = [&](std::size_t i) { return vox[i] != 0.0f; };
  std::int32_t next = 0;
  std::int32_t best_label = 0;
  std::size_t best_size = 0;
  for (std::size_t i = 0; i < vox.size(); ++i) {
    if (!foreground(i) || labels[i] != 0) continue;
    labels[i] = ++next;
    queue.push_back(i);
    const std::size_t size = flood(mask.shape(), nbrs, labels, queue, next, foreground);
    if (size > best_size) {
      best_size = size;
      best_label = next;
    }
  }
  std::vector<float> out(vox.size(), 0.0f);
  if (best_label != 0) {
    for (std::size_t i = 0; i < vox.size(); ++i) out[i] = labels[i] == best_label ? 1.0f : 0.0f;
  }
  return mask.with_voxels(std::move(out), IntensityDomain::Mask);
}

CleanResult clean_ct(const Volume& ct, const CleanOptions& options) {
  const IntensityRange r = intensity_range(ct);
  const double threshold =
      options.threshold.value_or(double(r.min) + 0.1 * (double(r.max) - double(r.min)));
  const auto vox = ct.voxels();
  std::vector<float> fg(vox.size());
  bool any = false;
  for (std::size_t i = 0; i < vox.size(); ++i) {
    fg[i] = double(vox[i]) > threshold ? 1.0f : 0.0f;
    any = any || fg[i] != 0.0f;
  }
  if (!any) {
    fail(ErrorKind::EmptyForeground,
         "no voxel exceeds the threshold " + std::to_string(threshold));
  }
  const Volume raw_mask = ct.with_voxels(std::move(fg), IntensityDomain::Mask);
  Volume mask = fill_holes(largest_component(raw_mask, options.connectivity), options.connectivity);
  std::vector<float> cleaned(vox.size());
  const auto m = mask.voxels();
  for (std::size_t i = 0; i < vox.size(); ++i) cleaned[i] = m[i] != 0.0f ? vox[i] : 0.0f;
  return {ct.with_voxels(std::move(cleaned), ct.domain(), ct.scalar_type()), std::move(mask)};
}

void to_json(nlohmann::json& j, const SliceRange& r) { j = nlohmann::json::array({r.lo, r.hi}); }

void from_json(const nlohmann::json& j, SliceRange& r) {
  if (!j.is_array() || j.size() != 2) {
    fail(ErrorKind::InvalidArgument, "slice range must be a [lo, hi) pair");
  }
  r.lo = j[0].get<std::size_t>();
  r.hi = j[1].get<std::size_t>();
}

void to_json(nlohmann::json& j, const TrimManifestEntry& e) {
  j = nlohmann::json{{"subject", e.subject}, {"trim", e.trim}};
}

void from_json(const nlohmann::json& j, TrimManifestEntry& e) {
  e.subject = j.at("subject").get<std::string>();
  e.trim = j.value("trim", std::vector<SliceRange>{});
}

Volume trim_slices(const Volume& v, std::span<const SliceRange> ranges) {
  const std::size_t depth = v.shape().depth;
  std::vector<SliceRange> sorted(ranges.begin(), ranges.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const SliceRange& a, const SliceRange& b) { return a.lo < b.lo; });
  std::size_t removed = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const SliceRange& r = sorted[i];
    if (r.lo >= r.hi || r.hi > depth) {
      fail(ErrorKind::RangeOutOfBounds, "slice range [" + std::to_string(r.lo) + ", " +
                                            std::to_string(r.hi) + ") invalid for depth " +
                                            std::to_string(depth));
    }
    if (i > 0 && r.lo < sorted[i - 1].hi) {
      fail(ErrorKind::RangeOutOfBounds, "slice ranges overlap");
    }
    removed += r.size();
  }
  if (removed == depth) fail(ErrorKind::EmptyVolume, "trim would delete every slice");
  if (removed == 0) return v;

  std::vector<bool> keep(depth, true);
  for (const SliceRange& r : sorted) {
    for (std::size_t z = r.lo; z < r.hi; ++z) keep[z] = false;
  }
  const std::size_t plane = v.shape().height * v.shape().width;
  std::vector<float> out;
  out.reserve((depth - removed) * plane);
  std::size_t first_kept = depth;
  const auto src = v.voxels();
  for (std::size_t z = 0; z < depth; ++z) {
    if (!keep[z]) continue;
    first_kept = std::min(first_kept, z);
    out.insert(out.end(), src.begin() + static_cast<std::ptrdiff_t>(z * plane),
               src.begin() + static_cast<std::ptrdiff_t>((z + 1) * plane));
  }
  Geometry g = v.geometry();
  g.origin = v.geometry().index_to_world({0.0, 0.0, double(first_kept)});
  return Volume(Shape3{depth - removed, v.shape().height, v.shape().width}, g, std::move(out),
                v.domain(), v.scalar_type());
}

}  // namespace voxelforge::morph
