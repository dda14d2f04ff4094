#include "voxelforge/formats/mhd.hpp"

#include <charconv>
#include <set>
#include <sstream>
#include <vector>

#include "byteio.hpp"
#include "voxelforge/error.hpp"

namespace voxelforge::formats {

std::string_view to_string(MetElementType t) noexcept {
  switch (t) {
    case MetElementType::Short: return "MET_SHORT";
    case MetElementType::UShort: return "MET_USHORT";
    case MetElementType::Float: return "MET_FLOAT";
  }
  return "MET_UNKNOWN";
}

std::size_t element_size(MetElementType t) noexcept {
  return t == MetElementType::Float ? 4 : 2;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

[[noreturn]] void malformed(std::string_view key, const std::string& why) {
  fail(ErrorKind::MalformedHeader, std::string(key) + ": " + why);
}

template <std::size_t N>
std::array<double, N> parse_reals(std::string_view key, std::string_view value) {
  const auto toks = tokens(value);
  if (toks.size() != N) {
    malformed(key, "expected " + std::to_string(N) + " values, got " + std::to_string(toks.size()));
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    const char* end = toks[i].data() + toks[i].size();
    const auto [ptr, ec] = std::from_chars(toks[i].data(), end, out[i]);
    if (ec != std::errc{} || ptr != end) malformed(key, "not a number: " + std::string(toks[i]));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  const auto v = trim(value);
  if (v == "True" || v == "true" || v == "TRUE") return true;
  if (v == "False" || v == "false" || v == "FALSE") return false;
  malformed(key, "expected True or False");
}

std::string format_reals(std::span<const double> values) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, values[i]);
    if (i) out += ' ';
    out.append(buf, ptr);
  }
  return out;
}

ScalarType scalar_type_of(MetElementType t) {
  switch (t) {
    case MetElementType::Short: return ScalarType::Int16;
    case MetElementType::UShort: return ScalarType::UInt16;
    case MetElementType::Float: return ScalarType::Float32;
  }
  return ScalarType::Float32;
}

MetElementType element_type_of(ScalarType t) {
  switch (t) {
    case ScalarType::Int16: return MetElementType::Short;
    case ScalarType::UInt16: return MetElementType::UShort;
    case ScalarType::Float32: return MetElementType::Float;
  }
  return MetElementType::Float;
}

}  // namespace

MhdHeader parse_mhd_header(std::string_view text, std::size_t* consumed) {
  MhdHeader h;
  std::set<std::string, std::less<>> seen;
  bool have_data_file = false;
  std::size_t pos = 0;
  while (pos < text.size() && !have_data_file) {
    std::size_t eol = text.find('\n', pos);
    const std::size_t next = eol == std::string_view::npos ? text.size() : eol + 1;
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = trim(text.substr(pos, eol - pos));
    pos = next;
    if (line.empty()) continue;

    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) malformed(line, "line without '='");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (!seen.emplace(key).second) malformed(key, "duplicate key");

    if (key == "NDims") {
      const auto n = parse_reals<1>(key, value);
      if (n[0] != 3.0) malformed(key, "only 3D volumes are supported");
      h.ndims = 3;
    } else if (key == "DimSize") {
      const auto d = parse_reals<3>(key, value);
      for (std::size_t i = 0; i < 3; ++i) {
        if (!(d[i] >= 1.0) || d[i] != static_cast<double>(static_cast<std::size_t>(d[i]))) {
          malformed(key, "extents must be positive integers");
        }
        h.dim_size[i] = static_cast<std::size_t>(d[i]);
      }
    } else if (key == "ElementType") {
      if (value == "MET_SHORT") {
        h.element_type = MetElementType::Short;
      } else if (value == "MET_USHORT") {
        h.element_type = MetElementType::UShort;
      } else if (value == "MET_FLOAT") {
        h.element_type = MetElementType::Float;
      } else {
        fail(ErrorKind::UnsupportedElementType, std::string(value));
      }
    } else if (key == "ElementSpacing") {
      h.element_spacing = parse_reals<3>(key, value);
      for (double s : h.element_spacing) {
        if (!(s > 0.0)) malformed(key, "spacing must be positive");
      }
    } else if (key == "Offset") {
      h.offset = parse_reals<3>(key, value);
    } else if (key == "TransformMatrix") {
      h.transform_matrix = parse_reals<9>(key, value);
    } else if (key == "ElementByteOrderMSB" || key == "BinaryDataByteOrderMSB") {
      const bool msb = parse_bool(key, value);
      if ((seen.contains("ElementByteOrderMSB") && seen.contains("BinaryDataByteOrderMSB")) &&
          msb != h.byte_order_msb) {
        malformed(key, "conflicting byte order keys");
      }
      h.byte_order_msb = msb;
    } else if (key == "ObjectType") {
      if (value != "Image") malformed(key, "only Image objects are supported");
    } else if (key == "BinaryData") {
      if (!parse_bool(key, value)) malformed(key, "ASCII MetaImage data is not supported");
    } else if (key == "CompressedData") {
      if (parse_bool(key, value)) malformed(key, "compressed MetaImage data is not supported");
    } else if (key == "ElementNumberOfChannels") {
      if (parse_reals<1>(key, value)[0] != 1.0) malformed(key, "only scalar images are supported");
    } else if (key == "CenterOfRotation") {
      parse_reals<3>(key, value);
    } else if (key == "AnatomicalOrientation") {
      if (value.size() != 3) malformed(key, "expected a three-letter code");
    } else if (key == "ElementDataFile") {
      if (value.empty()) malformed(key, "empty file name");
      h.element_data_file = std::string(value);
      have_data_file = true;
    } else {
      malformed(key, "unknown key");
    }
  }
  for (const char* required : {"NDims", "DimSize", "ElementType", "ElementDataFile"}) {
    if (!seen.contains(required)) malformed(required, "required key missing");
  }
  if (consumed != nullptr) *consumed = pos;
  return h;
}

std::string format_mhd_header(const MhdHeader& h) {
  std::ostringstream os;
  os << "ObjectType = Image\n";
  os << "NDims = 3\n";
  os << "BinaryData = True\n";
  os << "ElementByteOrderMSB = " << (h.byte_order_msb ? "True" : "False") << '\n';
  os << "TransformMatrix = " << format_reals(h.transform_matrix) << '\n';
  os << "Offset = " << format_reals(h.offset) << '\n';
  os << "ElementSpacing = " << format_reals(h.element_spacing) << '\n';
  os << "DimSize = " << h.dim_size[0] << ' ' << h.dim_size[1] << ' ' << h.dim_size[2] << '\n';
  os << "ElementType = " << to_string(h.element_type) << '\n';
  os << "ElementDataFile = " << h.element_data_file << '\n';
  return os.str();
}

Volume read_mhd(const std::filesystem::path& header_path) {
  const std::vector<std::uint8_t> header_bytes = detail::read_file(header_path);
  const std::string_view text(reinterpret_cast<const char*>(header_bytes.data()),
                              header_bytes.size());
  std::size_t consumed = 0;
  const MhdHeader h = parse_mhd_header(text, &consumed);

  const std::size_t count = h.dim_size[0] * h.dim_size[1] * h.dim_size[2];
  const std::size_t expected = count * element_size(h.element_type);

  std::vector<std::uint8_t> external;
  const std::uint8_t* data = nullptr;
  std::size_t available = 0;
  if (h.element_data_file == "LOCAL") {
    data = header_bytes.data() + consumed;
    available = header_bytes.size() - consumed;
  } else {
    const auto raw_path = header_path.parent_path() / h.element_data_file;
    if (!std::filesystem::exists(raw_path)) {
      fail(ErrorKind::Io, "raw data file not found: " + raw_path.string());
    }
    external = detail::read_file(raw_path);
    data = external.data();
    available = external.size();
  }
  if (available != expected) {
    fail(ErrorKind::RawSizeMismatch, "expected " + std::to_string(expected) + " bytes of " +
                                         std::string(to_string(h.element_type)) + " data, found " +
                                         std::to_string(available));
  }

  const ScalarType st = scalar_type_of(h.element_type);
  std::vector<float> voxels = detail::decode_scalars(data, count, st, h.byte_order_msb);
  Geometry g;
  g.spacing = h.element_spacing;
  g.origin = h.offset;
  g.direction = h.transform_matrix;
  if (!is_orthonormal(g.direction)) malformed("TransformMatrix", "not orthonormal");
  const IntensityDomain domain =
      st == ScalarType::UInt16 ? IntensityDomain::Raw16 : IntensityDomain::Real;
  return Volume(Shape3{h.dim_size[2], h.dim_size[1], h.dim_size[0]}, g, std::move(voxels), domain,
                st);
}

void write_mhd(const Volume& v, const std::filesystem::path& header_path, bool big_endian) {
  std::filesystem::path raw_path = header_path;
  raw_path.replace_extension(".raw");

  MhdHeader h;
  h.dim_size = {v.shape().width, v.shape().height, v.shape().depth};
  h.element_type = element_type_of(v.scalar_type());
  h.element_spacing = v.geometry().spacing;
  h.offset = v.geometry().origin;
  h.transform_matrix = v.geometry().direction;
  h.byte_order_msb = big_endian;
  h.element_data_file = raw_path.filename().string();

  const std::string text = format_mhd_header(h);
  detail::write_file(header_path, text.data(), text.size());
  const auto payload = detail::encode_scalars(v.voxels(), v.scalar_type(), big_endian);
  detail::write_file(raw_path, payload.data(), payload.size());
}

}  // namespace voxelforge::formats
