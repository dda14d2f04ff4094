#include "voxelforge/formats/nifti.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string_view>

#include "byteio.hpp"
#include "gzip.hpp"
#include "voxelforge/error.hpp"
#include "voxelforge/formats/mhd.hpp"

namespace voxelforge::formats {

namespace {

// Byte offsets within the 348-byte header.
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffDescrip = 148;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffQuatern = 256;
constexpr std::size_t kOffQoffset = 268;
constexpr std::size_t kOffSrowX = 280;
constexpr std::size_t kOffSrowY = 296;
constexpr std::size_t kOffSrowZ = 312;
constexpr std::size_t kOffIntentName = 328;
constexpr std::size_t kOffMagic = 344;

constexpr std::string_view kDomainTag = "vf-domain=";

std::int16_t bitpix_for(std::int16_t datatype) {
  switch (datatype) {
    case kNiftiInt16:
    case kNiftiUInt16: return 16;
    case kNiftiFloat32: return 32;
    default: return 0;
  }
}

ScalarType scalar_type_for(std::int16_t datatype) {
  switch (datatype) {
    case kNiftiInt16: return ScalarType::Int16;
    case kNiftiUInt16: return ScalarType::UInt16;
    default: return ScalarType::Float32;
  }
}

std::int16_t datatype_for(ScalarType t) {
  switch (t) {
    case ScalarType::Int16: return kNiftiInt16;
    case ScalarType::UInt16: return kNiftiUInt16;
    case ScalarType::Float32: return kNiftiFloat32;
  }
  return kNiftiFloat32;
}

std::string_view domain_name(IntensityDomain d) {
  switch (d) {
    case IntensityDomain::Raw16: return "raw16";
    case IntensityDomain::Unit: return "unit";
    case IntensityDomain::Mask: return "mask";
    case IntensityDomain::Real: return "real";
  }
  return "real";
}

void put_string(std::uint8_t* dst, std::size_t capacity, const std::string& s) {
  std::memcpy(dst, s.data(), std::min(capacity, s.size()));
}

std::string get_string(const std::uint8_t* src, std::size_t capacity) {
  const auto* c = reinterpret_cast<const char*>(src);
  return std::string(c, strnlen(c, capacity));
}

Mat3 quaternion_matrix(const Nifti1Header& h) {
  const double b = h.quatern[0];
  const double c = h.quatern[1];
  const double d = h.quatern[2];
  const double a = std::sqrt(std::max(0.0, 1.0 - (b * b + c * c + d * d)));
  const double qfac = h.pixdim[0] < 0.0f ? -1.0 : 1.0;
  Mat3 r{a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c),
         2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b),
         2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b};
  for (int row = 0; row < 3; ++row) r[row * 3 + 2] *= qfac;
  return r;
}

Geometry geometry_from_header(const Nifti1Header& h) {
  Geometry g;
  if (h.sform_code > 0) {
    const std::array<const std::array<float, 4>*, 3> rows{&h.srow_x, &h.srow_y, &h.srow_z};
    for (int col = 0; col < 3; ++col) {
      double norm2 = 0.0;
      for (int row = 0; row < 3; ++row) norm2 += double((*rows[row])[col]) * double((*rows[row])[col]);
      const double norm = std::sqrt(norm2);
      if (!(norm > 0.0)) fail(ErrorKind::MalformedHeader, "degenerate sform column");
      // pixdim carries the exact float spacing when it agrees with the affine.
      const double pix = std::abs(double(h.pixdim[col + 1]));
      const double spacing = std::abs(pix - norm) <= 1e-5 * norm ? pix : norm;
      g.spacing[col] = spacing;
      for (int row = 0; row < 3; ++row) g.direction[row * 3 + col] = double((*rows[row])[col]) / spacing;
    }
    g.origin = {h.srow_x[3], h.srow_y[3], h.srow_z[3]};
  } else if (h.qform_code > 0) {
    for (int i = 0; i < 3; ++i) g.spacing[i] = std::abs(double(h.pixdim[i + 1]));
    g.direction = quaternion_matrix(h);
    g.origin = {h.qoffset[0], h.qoffset[1], h.qoffset[2]};
  } else {
    for (int i = 0; i < 3; ++i) g.spacing[i] = std::abs(double(h.pixdim[i + 1]));
  }
  for (double& s : g.spacing) {
    if (!(s > 0.0)) s = 1.0;
  }
  return g;
}

}  // namespace

std::array<std::uint8_t, kNiftiHeaderSize> encode_header(const Nifti1Header& h) {
  std::array<std::uint8_t, kNiftiHeaderSize> out{};
  std::uint8_t* p = out.data();
  using detail::store;
  store(p, h.sizeof_hdr, false);
  for (int i = 0; i < 8; ++i) store(p + kOffDim + 2 * i, h.dim[i], false);
  store(p + kOffDatatype, h.datatype, false);
  store(p + kOffBitpix, h.bitpix, false);
  for (int i = 0; i < 8; ++i) store(p + kOffPixdim + 4 * i, h.pixdim[i], false);
  store(p + kOffVoxOffset, h.vox_offset, false);
  store(p + kOffSclSlope, h.scl_slope, false);
  store(p + kOffSclInter, h.scl_inter, false);
  p[kOffXyztUnits] = h.xyzt_units;
  put_string(p + kOffDescrip, 80, h.descrip);
  store(p + kOffQformCode, h.qform_code, false);
  store(p + kOffSformCode, h.sform_code, false);
  for (int i = 0; i < 3; ++i) store(p + kOffQuatern + 4 * i, h.quatern[i], false);
  for (int i = 0; i < 3; ++i) store(p + kOffQoffset + 4 * i, h.qoffset[i], false);
  for (int i = 0; i < 4; ++i) {
    store(p + kOffSrowX + 4 * i, h.srow_x[i], false);
    store(p + kOffSrowY + 4 * i, h.srow_y[i], false);
    store(p + kOffSrowZ + 4 * i, h.srow_z[i], false);
  }
  put_string(p + kOffIntentName, 16, h.intent_name);
  std::memcpy(p + kOffMagic, h.magic.data(), 4);
  return out;
}

Nifti1Header decode_header(std::span<const std::uint8_t> bytes, bool* big_endian) {
  if (bytes.size() < kNiftiHeaderSize) {
    fail(ErrorKind::TruncatedFile, "NIfTI header needs 348 bytes, got " + std::to_string(bytes.size()));
  }
  const std::uint8_t* p = bytes.data();
  using detail::load;
  bool be = false;
  if (load<std::int32_t>(p, false) != 348) {
    if (load<std::int32_t>(p, true) != 348) fail(ErrorKind::MalformedHeader, "sizeof_hdr is not 348");
    be = true;
  }
  Nifti1Header h;
  h.sizeof_hdr = 348;
  for (int i = 0; i < 8; ++i) h.dim[i] = load<std::int16_t>(p + kOffDim + 2 * i, be);
  h.datatype = load<std::int16_t>(p + kOffDatatype, be);
  h.bitpix = load<std::int16_t>(p + kOffBitpix, be);
  for (int i = 0; i < 8; ++i) h.pixdim[i] = load<float>(p + kOffPixdim + 4 * i, be);
  h.vox_offset = load<float>(p + kOffVoxOffset, be);
  h.scl_slope = load<float>(p + kOffSclSlope, be);
  h.scl_inter = load<float>(p + kOffSclInter, be);
  h.xyzt_units = p[kOffXyztUnits];
  h.descrip = get_string(p + kOffDescrip, 80);
  h.qform_code = load<std::int16_t>(p + kOffQformCode, be);
  h.sform_code = load<std::int16_t>(p + kOffSformCode, be);
  for (int i = 0; i < 3; ++i) h.quatern[i] = load<float>(p + kOffQuatern + 4 * i, be);
  for (int i = 0; i < 3; ++i) h.qoffset[i] = load<float>(p + kOffQoffset + 4 * i, be);
  for (int i = 0; i < 4; ++i) {
    h.srow_x[i] = load<float>(p + kOffSrowX + 4 * i, be);
    h.srow_y[i] = load<float>(p + kOffSrowY + 4 * i, be);
    h.srow_z[i] = load<float>(p + kOffSrowZ + 4 * i, be);
  }
  h.intent_name = get_string(p + kOffIntentName, 16);
  std::memcpy(h.magic.data(), p + kOffMagic, 4);

  if (std::memcmp(h.magic.data(), "n+1\0", 4) != 0) {
    fail(ErrorKind::MalformedHeader, "magic is not \"n+1\" (single-file NIfTI-1)");
  }
  if (bitpix_for(h.datatype) == 0) {
    fail(ErrorKind::UnsupportedDatatype, "datatype code " + std::to_string(h.datatype));
  }
  if (h.bitpix != bitpix_for(h.datatype)) {
    fail(ErrorKind::MalformedHeader, "bitpix " + std::to_string(h.bitpix) +
                                         " inconsistent with datatype " + std::to_string(h.datatype));
  }
  if (h.dim[0] < 3 || h.dim[0] > 7) fail(ErrorKind::MalformedHeader, "dim[0] must be 3..7");
  for (int i = 1; i <= 3; ++i) {
    if (h.dim[i] < 1) fail(ErrorKind::MalformedHeader, "non-positive spatial dimension");
  }
  for (int i = 4; i <= h.dim[0]; ++i) {
    if (h.dim[i] != 1) fail(ErrorKind::MalformedHeader, "only single-volume images are supported");
  }
  if (!(h.vox_offset >= static_cast<float>(kNiftiHeaderSize)) ||
      h.vox_offset != std::floor(h.vox_offset)) {
    fail(ErrorKind::MalformedHeader, "invalid vox_offset");
  }
  if (big_endian != nullptr) *big_endian = be;
  return h;
}

Nifti1Header make_header(const Volume& v) {
  Nifti1Header h;
  const Shape3& s = v.shape();
  h.dim = {3, static_cast<std::int16_t>(s.width), static_cast<std::int16_t>(s.height),
           static_cast<std::int16_t>(s.depth), 1, 1, 1, 1};
  if (s.width > 32767 || s.height > 32767 || s.depth > 32767) {
    fail(ErrorKind::InvalidArgument, "NIfTI-1 dimensions are limited to 32767");
  }
  h.datatype = datatype_for(v.scalar_type());
  h.bitpix = bitpix_for(h.datatype);
  const Geometry& g = v.geometry();
  h.pixdim = {1.0f, float(g.spacing[0]), float(g.spacing[1]), float(g.spacing[2]), 0, 0, 0, 0};
  h.descrip = "voxelforge";
  h.sform_code = 1;
  h.qform_code = 0;
  std::array<float, 4>* rows[3] = {&h.srow_x, &h.srow_y, &h.srow_z};
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) {
      (*rows[row])[col] = float(g.direction[row * 3 + col] * g.spacing[col]);
    }
    (*rows[row])[3] = float(g.origin[row]);
  }
  h.intent_name = std::string(kDomainTag) + std::string(domain_name(v.domain()));
  return h;
}

std::vector<std::uint8_t> encode_nifti(const Volume& v) {
  const Nifti1Header h = make_header(v);
  const auto header = encode_header(h);
  const auto payload = detail::encode_scalars(v.voxels(), v.scalar_type(), false);
  // Header, four zero extension bytes, payload.
  const auto data_offset = static_cast<std::size_t>(kNiftiVoxOffset);
  std::vector<std::uint8_t> out(data_offset + payload.size(), 0);
  std::copy(header.begin(), header.end(), out.begin());
  std::copy(payload.begin(), payload.end(), out.begin() + static_cast<std::ptrdiff_t>(data_offset));
  return out;
}

Volume decode_nifti(std::span<const std::uint8_t> bytes) {
  bool be = false;
  const Nifti1Header h = decode_header(bytes, &be);
  const Shape3 shape{std::size_t(h.dim[3]), std::size_t(h.dim[2]), std::size_t(h.dim[1])};
  const ScalarType st = scalar_type_for(h.datatype);
  const std::size_t offset = static_cast<std::size_t>(h.vox_offset);
  const std::size_t need = shape.voxel_count() * detail::scalar_size(st);
  if (bytes.size() < offset || bytes.size() - offset < need) {
    fail(ErrorKind::TruncatedFile, "voxel payload needs " + std::to_string(need) + " bytes at offset " +
                                       std::to_string(offset) + ", file has " +
                                       std::to_string(bytes.size()));
  }
  std::vector<float> voxels = detail::decode_scalars(bytes.data() + offset, shape.voxel_count(), st, be);

  IntensityDomain domain = st == ScalarType::UInt16 ? IntensityDomain::Raw16 : IntensityDomain::Real;
  ScalarType out_type = st;
  const bool scaled = h.scl_slope != 0.0f && !(h.scl_slope == 1.0f && h.scl_inter == 0.0f);
  if (scaled) {
    for (float& x : voxels) x = x * h.scl_slope + h.scl_inter;
    domain = IntensityDomain::Real;
    out_type = ScalarType::Float32;
  } else if (h.intent_name.starts_with(kDomainTag)) {
    const std::string_view name = std::string_view(h.intent_name).substr(kDomainTag.size());
    for (IntensityDomain d : {IntensityDomain::Raw16, IntensityDomain::Unit, IntensityDomain::Mask,
                              IntensityDomain::Real}) {
      if (name == domain_name(d)) domain = d;
    }
  }
  return Volume(shape, geometry_from_header(h), std::move(voxels), domain, out_type);
}

void write_nifti(const Volume& v, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes = encode_nifti(v);
  if (detail::has_gzip_extension(path)) bytes = detail::gzip_compress(bytes);
  detail::write_file(path, bytes.data(), bytes.size());
}

Volume read_nifti(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes = detail::read_file(path);
  if (detail::looks_gzipped(bytes)) bytes = detail::gzip_decompress(bytes);
  return decode_nifti(bytes);
}

void convert(const std::filesystem::path& mhd_path, const std::filesystem::path& nifti_path) {
  write_nifti(read_mhd(mhd_path), nifti_path);
}

}  // namespace voxelforge::formats
