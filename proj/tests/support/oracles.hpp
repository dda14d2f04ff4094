#pragma once

// Straightforward reference implementations used to cross-check the library.
// Each one is written independently of the code under test: plain loops,
// naive summation order, no shared helpers.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "voxelforge/volume.hpp"

namespace oracle {

inline double mae(std::span<const float> x, std::span<const float> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::fabs(double(x[i]) - double(y[i]));
  return s / double(x.size());
}

inline double mse(std::span<const float> x, std::span<const float> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = double(x[i]) - double(y[i]);
    s += d * d;
  }
  return s / double(x.size());
}

/// Forward difference along `axis`; `strict` also zeroes the first position.
inline std::vector<double> gradient(std::span<const float> x, const std::vector<std::size_t>& ext,
                                    std::size_t axis, bool strict) {
  std::size_t inner = 1;
  for (std::size_t a = axis + 1; a < ext.size(); ++a) inner *= ext[a];
  const std::size_t n = ext[axis];
  std::vector<double> g(x.size(), 0.0);
  for (std::size_t flat = 0; flat < x.size(); ++flat) {
    const std::size_t i = (flat / inner) % n;
    const bool active = strict ? (i >= 1 && i + 2 <= n) : (i + 1 < n);
    if (active) g[flat] = double(x[flat]) - double(x[flat + inner]);
  }
  return g;
}

inline double gdl(std::span<const float> x, std::span<const float> y,
                  const std::vector<std::size_t>& ext, bool strict) {
  double total = 0.0;
  for (std::size_t a = 0; a < ext.size(); ++a) {
    const std::vector<double> gx = gradient(x, ext, a, strict);
    const std::vector<double> gy = gradient(y, ext, a, strict);
    double s = 0.0;
    for (std::size_t i = 0; i < gx.size(); ++i) s += (gx[i] - gy[i]) * (gx[i] - gy[i]);
    total += s / double(gx.size());
  }
  return total / double(ext.size());
}

inline double psnr(double mse_value, double max_value) {
  return 10.0 * std::log10(max_value * max_value / mse_value);
}

inline double adv_minmax(std::span<const float> r, std::span<const float> f) {
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    s += std::log(double(r[i])) + std::log(1.0 - double(f[i]));
  }
  return s / double(r.size());
}

inline double adv_lsq_standard(std::span<const float> r, std::span<const float> f) {
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    s += (double(r[i]) - 1.0) * (double(r[i]) - 1.0) + double(f[i]) * double(f[i]);
  }
  return s / double(r.size());
}

inline double adv_lsq_literal(std::span<const float> r, std::span<const float> f) {
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double a = double(r[i]);
    const double b = 1.0 - double(f[i]);
    s += std::log(a * a) + std::log(b * b);
  }
  return s / double(r.size());
}

/// Hole filling by repeated sweeps: a background voxel is "outside" if it is
/// on the border or touches an outside voxel; iterate to a fixed point.
inline std::vector<std::uint8_t> fill_holes(const std::vector<std::uint8_t>& mask, std::size_t d,
                                            std::size_t h, std::size_t w, bool full) {
  std::vector<std::uint8_t> outside(mask.size(), 0);
  auto id = [&](std::size_t z, std::size_t y, std::size_t x) { return (z * h + y) * w + x; };
  for (std::size_t z = 0; z < d; ++z)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        if (!mask[id(z, y, x)] &&
            (z == 0 || y == 0 || x == 0 || z + 1 == d || y + 1 == h || x + 1 == w))
          outside[id(z, y, x)] = 1;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t z = 0; z < d; ++z)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const std::size_t i = id(z, y, x);
          if (mask[i] || outside[i]) continue;
          for (int dz = -1; dz <= 1 && !outside[i]; ++dz)
            for (int dy = -1; dy <= 1 && !outside[i]; ++dy)
              for (int dx = -1; dx <= 1 && !outside[i]; ++dx) {
                const int manhattan = std::abs(dz) + std::abs(dy) + std::abs(dx);
                if (manhattan == 0 || (!full && manhattan != 1)) continue;
                const long zz = long(z) + dz, yy = long(y) + dy, xx = long(x) + dx;
                if (zz < 0 || yy < 0 || xx < 0 || zz >= long(d) || yy >= long(h) ||
                    xx >= long(w))
                  continue;
                if (outside[id(std::size_t(zz), std::size_t(yy), std::size_t(xx))]) {
                  outside[i] = 1;
                  changed = true;
                }
              }
        }
  }
  std::vector<std::uint8_t> out(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = outside[i] ? 0 : 1;
  return out;
}

/// Bit-at-a-time reflected CRC-32C.
inline std::uint32_t crc32c(std::span<const std::uint8_t> data) {
  std::uint32_t c = 0xffffffffu;
  for (std::uint8_t byte : data) {
    c ^= byte;
    for (int k = 0; k < 8; ++k) c = (c >> 1) ^ (0x82f63b78u & (0u - (c & 1u)));
  }
  return ~c;
}

inline std::vector<float> random_floats(std::mt19937_64& rng, std::size_t n, float lo, float hi) {
  std::uniform_real_distribution<float> u(lo, hi);
  std::vector<float> v(n);
  for (float& f : v) f = u(rng);
  return v;
}

inline voxelforge::Volume random_volume(std::mt19937_64& rng, voxelforge::Shape3 s,
                                        float lo = -100.0f, float hi = 100.0f) {
  return voxelforge::Volume(s, {}, random_floats(rng, s.voxel_count(), lo, hi));
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("voxelforge-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
