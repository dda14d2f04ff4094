#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace voxelforge::formats::detail {

bool has_gzip_extension(const std::filesystem::path& path);
bool looks_gzipped(std::span<const std::uint8_t> bytes) noexcept;

/// Deterministic gzip member (zero mtime, default compression level).
std::vector<std::uint8_t> gzip_compress(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> gzip_decompress(std::span<const std::uint8_t> bytes);

}  // namespace voxelforge::formats::detail
