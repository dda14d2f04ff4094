#pragma once

// TFRecord framing:
//   u64 length (LE) | u32 masked crc32c(length bytes) | payload | u32 masked crc32c(payload)

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <vector>

#include "voxelforge/simd/kernels.hpp"

namespace voxelforge::rec {

using Bytes = std::vector<std::uint8_t>;

/// Castagnoli CRC-32 (reflected, init and final xor 0xffffffff).
std::uint32_t crc32c(std::span<const std::uint8_t> data,
                     const simd::Kernels& kernels = simd::active());

std::uint32_t mask_crc(std::uint32_t crc) noexcept;
std::uint32_t unmask_crc(std::uint32_t masked) noexcept;

inline constexpr std::size_t kFrameHeaderBytes = 12;
inline constexpr std::size_t kFrameFooterBytes = 4;

/// One complete frame around `payload`.
Bytes frame(std::span<const std::uint8_t> payload);

class RecordWriter {
 public:
  explicit RecordWriter(const std::filesystem::path& path);

  void write(std::span<const std::uint8_t> payload);
  void close();
  std::size_t count() const noexcept { return count_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t count_ = 0;
};

/// Sequential reader. Errors name the zero-based record index: CrcMismatch
/// for a bad length or payload checksum, TruncatedFile for a short frame. The
/// length checksum is verified before the payload buffer is sized.
class RecordReader {
 public:
  explicit RecordReader(const std::filesystem::path& path);

  std::optional<Bytes> next();
  std::size_t index() const noexcept { return index_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::uint64_t remaining_ = 0;
  std::size_t index_ = 0;
};

void write_records(const std::filesystem::path& path, std::span<const Bytes> payloads);
std::vector<Bytes> read_records(const std::filesystem::path& path);

/// In-memory frame parsing with the same checks as RecordReader.
std::vector<Bytes> parse_frames(std::span<const std::uint8_t> data);

}  // namespace voxelforge::rec
