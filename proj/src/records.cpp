#include "voxelforge/records.hpp"

#include <string>

#include "formats/byteio.hpp"
#include "voxelforge/error.hpp"

namespace voxelforge::rec {

using formats::detail::load;
using formats::detail::store;

namespace {

constexpr std::uint32_t kMaskDelta = 0xa282ead8u;

std::string at_record(std::size_t index) { return "record " + std::to_string(index) + ": "; }

/// Validates a frame header and returns the payload length.
std::uint64_t check_header(const std::uint8_t* header, std::size_t index) {
  const std::uint64_t length = load<std::uint64_t>(header, false);
  const std::uint32_t stored = load<std::uint32_t>(header + 8, false);
  if (mask_crc(crc32c({header, 8})) != stored) {
    fail(ErrorKind::CrcMismatch, at_record(index) + "length checksum mismatch");
  }
  return length;
}

void check_payload(std::span<const std::uint8_t> payload, const std::uint8_t* footer,
                   std::size_t index) {
  if (mask_crc(crc32c(payload)) != load<std::uint32_t>(footer, false)) {
    fail(ErrorKind::CrcMismatch, at_record(index) + "payload checksum mismatch");
  }
}

}  // namespace

std::uint32_t crc32c(std::span<const std::uint8_t> data, const simd::Kernels& kernels) {
  return ~kernels.crc32c_update(0xffffffffu, data.data(), data.size());
}

std::uint32_t mask_crc(std::uint32_t c) noexcept { return ((c >> 15) | (c << 17)) + kMaskDelta; }

std::uint32_t unmask_crc(std::uint32_t m) noexcept {
  const std::uint32_t r = m - kMaskDelta;
  return (r << 15) | (r >> 17);
}

Bytes frame(std::span<const std::uint8_t> payload) {
  Bytes out(kFrameHeaderBytes + payload.size() + kFrameFooterBytes);
  store<std::uint64_t>(out.data(), payload.size(), false);
  store<std::uint32_t>(out.data() + 8, mask_crc(crc32c({out.data(), 8})), false);
  std::copy(payload.begin(), payload.end(), out.begin() + kFrameHeaderBytes);
  store<std::uint32_t>(out.data() + kFrameHeaderBytes + payload.size(), mask_crc(crc32c(payload)),
                       false);
  return out;
}

RecordWriter::RecordWriter(const std::filesystem::path& path)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) fail(ErrorKind::Io, "cannot create " + path.string());
}

void RecordWriter::write(std::span<const std::uint8_t> payload) {
  const Bytes f = frame(payload);
  out_.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size()));
  if (!out_) fail(ErrorKind::Io, "cannot write " + path_.string());
  ++count_;
}

void RecordWriter::close() {
  if (!out_.is_open()) return;
  out_.close();
  if (!out_) fail(ErrorKind::Io, "cannot finish " + path_.string());
}

RecordReader::RecordReader(const std::filesystem::path& path)
    : path_(path), in_(path, std::ios::binary) {
  if (!in_) fail(ErrorKind::Io, "cannot open " + path.string());
  in_.seekg(0, std::ios::end);
  remaining_ = static_cast<std::uint64_t>(in_.tellg());
  in_.seekg(0, std::ios::beg);
}

std::optional<Bytes> RecordReader::next() {
  if (remaining_ == 0) return std::nullopt;
  if (remaining_ < kFrameHeaderBytes) {
    fail(ErrorKind::TruncatedFile, at_record(index_) + "incomplete frame header");
  }
  std::uint8_t header[kFrameHeaderBytes];
  in_.read(reinterpret_cast<char*>(header), kFrameHeaderBytes);
  if (!in_) fail(ErrorKind::Io, "cannot read " + path_.string());
  remaining_ -= kFrameHeaderBytes;
  const std::uint64_t length = check_header(header, index_);
  if (length > remaining_ || remaining_ - length < kFrameFooterBytes) {
    fail(ErrorKind::TruncatedFile, at_record(index_) + "payload runs past end of file");
  }
  Bytes payload(static_cast<std::size_t>(length));
  std::uint8_t footer[kFrameFooterBytes];
  in_.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(length));
  in_.read(reinterpret_cast<char*>(footer), kFrameFooterBytes);
  if (!in_) fail(ErrorKind::Io, "cannot read " + path_.string());
  remaining_ -= length + kFrameFooterBytes;
  check_payload(payload, footer, index_);
  ++index_;
  return payload;
}

void write_records(const std::filesystem::path& path, std::span<const Bytes> payloads) {
  RecordWriter w(path);
  for (const Bytes& p : payloads) w.write(p);
  w.close();
}

std::vector<Bytes> read_records(const std::filesystem::path& path) {
  RecordReader r(path);
  std::vector<Bytes> out;
  while (auto p = r.next()) out.push_back(std::move(*p));
  return out;
}

std::vector<Bytes> parse_frames(std::span<const std::uint8_t> data) {
  std::vector<Bytes> out;
  std::size_t pos = 0;
  while (pos < data.size()) {
    const std::size_t index = out.size();
    const std::size_t left = data.size() - pos;
    if (left < kFrameHeaderBytes) {
      fail(ErrorKind::TruncatedFile, at_record(index) + "incomplete frame header");
    }
    const std::uint64_t length = check_header(data.data() + pos, index);
    if (length > left - kFrameHeaderBytes || left - kFrameHeaderBytes - length < kFrameFooterBytes) {
      fail(ErrorKind::TruncatedFile, at_record(index) + "payload runs past end of buffer");
    }
    const auto payload = data.subspan(pos + kFrameHeaderBytes, static_cast<std::size_t>(length));
    check_payload(payload, payload.data() + payload.size(), index);
    out.emplace_back(payload.begin(), payload.end());
    pos += kFrameHeaderBytes + static_cast<std::size_t>(length) + kFrameFooterBytes;
  }
  return out;
}

}  // namespace voxelforge::rec
