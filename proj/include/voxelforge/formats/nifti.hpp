#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "voxelforge/volume.hpp"

namespace voxelforge::formats {

inline constexpr std::int16_t kNiftiInt16 = 4;
inline constexpr std::int16_t kNiftiFloat32 = 16;
inline constexpr std::int16_t kNiftiUInt16 = 512;
inline constexpr std::size_t kNiftiHeaderSize = 348;
inline constexpr float kNiftiVoxOffset = 352.0f;

/// The fixed NIfTI-1 header fields this library reads and writes. Fields that
/// are not listed are written as zeros.
struct Nifti1Header {
  std::int32_t sizeof_hdr = 348;
  std::array<std::int16_t, 8> dim{};
  std::int16_t datatype = 0;
  std::int16_t bitpix = 0;
  std::array<float, 8> pixdim{};
  float vox_offset = kNiftiVoxOffset;
  float scl_slope = 1.0f;
  float scl_inter = 0.0f;
  std::uint8_t xyzt_units = 2;  // millimetres
  std::string descrip;
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 0;
  std::array<float, 3> quatern{};  // b, c, d
  std::array<float, 3> qoffset{};
  std::array<float, 4> srow_x{};
  std::array<float, 4> srow_y{};
  std::array<float, 4> srow_z{};
  std::string intent_name;
  std::array<char, 4> magic{'n', '+', '1', '\0'};
};

/// Serializes the header into its 348-byte little-endian layout.
std::array<std::uint8_t, kNiftiHeaderSize> encode_header(const Nifti1Header& h);

/// Parses a 348-byte header of either byte order; `big_endian` reports which.
/// Throws MalformedHeader or UnsupportedDatatype.
Nifti1Header decode_header(std::span<const std::uint8_t> bytes, bool* big_endian = nullptr);

/// Header describing `v`: native datatype, sform geometry (sform_code 1,
/// qform_code 0) and the intensity domain tagged in intent_name.
Nifti1Header make_header(const Volume& v);

/// Complete single-file image: header, 4 zero extension bytes, payload.
std::vector<std::uint8_t> encode_nifti(const Volume& v);
Volume decode_nifti(std::span<const std::uint8_t> bytes);

/// `.nii.gz` paths are gzip-compressed on write and inflated on read.
void write_nifti(const Volume& v, const std::filesystem::path& path);
Volume read_nifti(const std::filesystem::path& path);

/// MetaImage to NIfTI-1 in the source element type.
void convert(const std::filesystem::path& mhd_path, const std::filesystem::path& nifti_path);

}  // namespace voxelforge::formats
