#pragma once

// Endian-explicit scalar packing and whole-file helpers for the format readers.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "voxelforge/error.hpp"
#include "voxelforge/volume.hpp"

namespace voxelforge::formats::detail {

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const std::streamoff size = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), size)) {
    fail(ErrorKind::Io, "cannot read " + path.string());
  }
  return bytes;
}

inline void write_file(const std::filesystem::path& path, const void* data, std::size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot create " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
}

template <typename T>
T load(const std::uint8_t* p, bool big_endian) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, p, sizeof(T));
  const bool swap = big_endian != (std::endian::native == std::endian::big);
  if (swap) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
  }
  T out;
  std::memcpy(&out, buf, sizeof(T));
  return out;
}

template <typename T>
void store(std::uint8_t* p, T value, bool big_endian) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  const bool swap = big_endian != (std::endian::native == std::endian::big);
  if (swap) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
  }
  std::memcpy(p, buf, sizeof(T));
}

inline std::size_t scalar_size(ScalarType t) noexcept {
  return t == ScalarType::Float32 ? 4 : 2;
}

/// Decodes `count` elements of type `t` into floats.
inline std::vector<float> decode_scalars(const std::uint8_t* p, std::size_t count, ScalarType t,
                                         bool big_endian) {
  std::vector<float> out(count);
  const std::size_t step = scalar_size(t);
  for (std::size_t i = 0; i < count; ++i, p += step) {
    switch (t) {
      case ScalarType::Int16: out[i] = static_cast<float>(load<std::int16_t>(p, big_endian)); break;
      case ScalarType::UInt16: out[i] = static_cast<float>(load<std::uint16_t>(p, big_endian)); break;
      case ScalarType::Float32: out[i] = load<float>(p, big_endian); break;
    }
  }
  return out;
}

template <typename I>
I saturate(float v) {
  const double r = std::nearbyint(static_cast<double>(v));
  const double lo = static_cast<double>(std::numeric_limits<I>::min());
  const double hi = static_cast<double>(std::numeric_limits<I>::max());
  return static_cast<I>(r < lo ? lo : (r > hi ? hi : r));
}

/// Encodes floats as type `t` (integer types round to nearest and saturate).
inline std::vector<std::uint8_t> encode_scalars(std::span<const float> values, ScalarType t,
                                                bool big_endian) {
  const std::size_t step = scalar_size(t);
  std::vector<std::uint8_t> out(values.size() * step);
  std::uint8_t* p = out.data();
  for (float v : values) {
    switch (t) {
      case ScalarType::Int16: store(p, saturate<std::int16_t>(v), big_endian); break;
      case ScalarType::UInt16: store(p, saturate<std::uint16_t>(v), big_endian); break;
      case ScalarType::Float32: store(p, v, big_endian); break;
    }
    p += step;
  }
  return out;
}

}  // namespace voxelforge::formats::detail
