#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

#include "voxelforge/volume.hpp"

namespace voxelforge::formats {

enum class MetElementType { Short, UShort, Float };

std::string_view to_string(MetElementType t) noexcept;
std::size_t element_size(MetElementType t) noexcept;

/// Parsed MetaImage header. Vectors are in index order (x, y, z);
/// `transform_matrix` is row-major and becomes the volume direction matrix.
struct MhdHeader {
  int ndims = 3;
  std::array<std::size_t, 3> dim_size{};
  MetElementType element_type = MetElementType::UShort;
  Vec3 element_spacing{1.0, 1.0, 1.0};
  Vec3 offset{0.0, 0.0, 0.0};
  Mat3 transform_matrix = kIdentity3;
  bool byte_order_msb = false;
  /// Raw file name relative to the header, or "LOCAL" for inline data.
  std::string element_data_file;
};

/// Parses `Key = Value` lines up to and including ElementDataFile. Keys are
/// case-sensitive. Throws MalformedHeader for unknown keys, bad arity or a
/// missing required key and UnsupportedElementType for other element types.
/// `consumed` receives the byte offset just past the ElementDataFile line.
MhdHeader parse_mhd_header(std::string_view text, std::size_t* consumed = nullptr);

std::string format_mhd_header(const MhdHeader& header);

Volume read_mhd(const std::filesystem::path& header_path);

/// Writes `<name>.mhd` plus a sibling `<name>.raw`, in the volume's native
/// element type, little-endian unless `big_endian` is set.
void write_mhd(const Volume& v, const std::filesystem::path& header_path,
               bool big_endian = false);

}  // namespace voxelforge::formats
