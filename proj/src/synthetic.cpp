#include "voxelforge/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace voxelforge::synth {

double BlobField::operator()(const Vec3& p) const noexcept {
  double v = 0.0;
  for (const Blob& b : blobs) {
    const double dx = p[0] - b.center[0];
    const double dy = p[1] - b.center[1];
    const double dz = p[2] - b.center[2];
    v += b.amplitude * std::exp(-(dx * dx + dy * dy + dz * dz) / (2.0 * b.sigma * b.sigma));
  }
  return v;
}

BlobField random_blobs(const Shape3& shape, const Geometry& geometry, std::uint64_t seed,
                       const BlobOptions& options) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  BlobField f;
  for (std::size_t i = 0; i < options.count; ++i) {
    const Vec3 idx{unit(rng) * double(shape.width - 1), unit(rng) * double(shape.height - 1),
                   unit(rng) * double(shape.depth - 1)};
    Blob b;
    b.center = geometry.index_to_world(idx);
    b.sigma = options.sigma_min + unit(rng) * (options.sigma_max - options.sigma_min);
    b.amplitude = 0.25 + 0.75 * unit(rng);
    f.blobs.push_back(b);
  }
  return f;
}

Volume render(const BlobField& field, const Shape3& shape, const Geometry& geometry,
              const reg::RigidTransform* warp) {
  std::vector<float> out(shape.voxel_count());
  std::size_t i = 0;
  for (std::size_t z = 0; z < shape.depth; ++z) {
    for (std::size_t y = 0; y < shape.height; ++y) {
      for (std::size_t x = 0; x < shape.width; ++x) {
        Vec3 p = geometry.index_to_world({double(x), double(y), double(z)});
        if (warp) p = warp->apply(p);
        out[i++] = float(field(p));
      }
    }
  }
  return Volume(shape, geometry, std::move(out));
}

Volume remap_contrast(const Volume& v) {
  const IntensityRange r = intensity_range(v);
  const float span = r.max > r.min ? r.max - r.min : 1.0f;
  std::vector<float> out(v.voxels().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const float u = (v.voxels()[i] - r.min) / span;
    out[i] = u * (1.0f - u) * 4.0f + 0.3f * u;
  }
  return v.with_voxels(std::move(out), IntensityDomain::Real);
}

HeadPair head_phantom(const Shape3& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  const double cx = 0.5 * double(s.width) + 0.02 * double(s.width) * jitter(rng);
  const double cy = 0.47 * double(s.height);
  const double cz = 0.5 * double(s.depth);
  const double ax = 0.30 * double(s.width);
  const double ay = 0.42 * double(s.height);
  const double az = 0.40 * double(s.depth);
  const double table_lo = 0.93 * double(s.height);
  const double table_hi = 0.96 * double(s.height);
  std::uniform_int_distribution<int> noise(0, 40);

  std::vector<float> mri(s.voxel_count());
  std::vector<float> ct(s.voxel_count());
  std::size_t i = 0;
  for (std::size_t z = 0; z < s.depth; ++z) {
    for (std::size_t y = 0; y < s.height; ++y) {
      for (std::size_t x = 0; x < s.width; ++x, ++i) {
        const double u = (double(x) - cx) / ax;
        const double v = (double(y) - cy) / ay;
        const double w = (double(z) - cz) / az;
        const double r = std::sqrt(u * u + v * v + w * w);
        const double rv = std::sqrt(std::pow((u - 0.2) / 0.25, 2.0) +
                                    std::pow((v - 0.1) / 0.15, 2.0) + std::pow(w / 0.3, 2.0));
        const double rs = std::sqrt(std::pow((u - 0.0) / 0.12, 2.0) +
                                    std::pow((v + 0.78) / 0.08, 2.0) + std::pow(w / 0.12, 2.0));
        double m = 0.0;
        double c = 0.0;
        if (r < 1.0) {
          if (r >= 0.88) {
            m = 3000.0;
            c = 3000.0;
          } else if (rv < 1.0) {
            m = 40000.0;
            c = 900.0;
          } else {
            m = 20000.0 + 4000.0 * std::cos(6.0 * u) * std::sin(5.0 * w);
            c = 1000.0 + 60.0 * std::sin(7.0 * v);
          }
          if (rs < 1.0) {
            // air-filled sinus enclosed by bone
            m = 0.0;
            c = 0.0;
          }
        } else if (double(y) >= table_lo && double(y) < table_hi) {
          c = 2000.0;
        }
        mri[i] = float(std::round(m) + (m > 0.0 ? noise(rng) : 0));
        ct[i] = float(std::round(c) + (c > 0.0 ? noise(rng) : 0));
      }
    }
  }
  Geometry g;
  g.spacing = {1.0, 1.0, 1.5};
  return {Volume(s, g, std::move(mri), IntensityDomain::Raw16, ScalarType::UInt16),
          Volume(s, g, std::move(ct), IntensityDomain::Raw16, ScalarType::UInt16)};
}

}  // namespace voxelforge::synth
