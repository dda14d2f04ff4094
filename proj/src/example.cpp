#include "voxelforge/example.hpp"

#include <bit>
#include <cstring>
#include <functional>
#include <numeric>

#include "voxelforge/error.hpp"

namespace voxelforge::rec {

namespace {

enum WireType : std::uint32_t { kVarint = 0, kFixed64 = 1, kLengthDelimited = 2, kFixed32 = 5 };

void put_varint(Bytes& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<std::uint8_t>(v | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_tag(Bytes& out, std::uint32_t field, WireType type) {
  put_varint(out, (std::uint64_t{field} << 3) | type);
}

void put_bytes(Bytes& out, std::uint32_t field, std::span<const std::uint8_t> data) {
  put_tag(out, field, kLengthDelimited);
  put_varint(out, data.size());
  out.insert(out.end(), data.begin(), data.end());
}

void put_fixed32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

Bytes encode_feature(const Feature& f) {
  Bytes list;
  std::uint32_t kind = 0;
  if (const auto* b = std::get_if<BytesList>(&f)) {
    kind = 1;
    for (const std::string& s : *b) put_bytes(list, 1, as_bytes(s));
  } else if (const auto* fl = std::get_if<FloatList>(&f)) {
    kind = 2;
    if (!fl->empty()) {
      Bytes packed;
      packed.reserve(fl->size() * 4);
      for (float v : *fl) put_fixed32(packed, std::bit_cast<std::uint32_t>(v));
      put_bytes(list, 1, packed);
    }
  } else {
    kind = 3;
    const auto& il = std::get<Int64List>(f);
    if (!il.empty()) {
      Bytes packed;
      for (std::int64_t v : il) put_varint(packed, static_cast<std::uint64_t>(v));
      put_bytes(list, 1, packed);
    }
  }
  Bytes out;
  put_bytes(out, kind, list);
  return out;
}

/// Cursor over one length-delimited message.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  bool done() const noexcept { return pos_ >= data_.size(); }

  std::uint64_t varint() {
    std::uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      if (done()) bad("truncated varint");
      const std::uint8_t b = data_[pos_++];
      v |= std::uint64_t{b & 0x7fu} << shift;
      if (!(b & 0x80)) return v;
    }
    bad("varint too long");
  }

  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > data_.size() - pos_) bad("field runs past end of message");
    const auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::span<const std::uint8_t> delimited() { return take(static_cast<std::size_t>(varint())); }

  void skip(std::uint32_t type) {
    switch (type) {
      case kVarint: varint(); break;
      case kFixed64: take(8); break;
      case kLengthDelimited: delimited(); break;
      case kFixed32: take(4); break;
      default: bad("unsupported wire type " + std::to_string(type));
    }
  }

  [[noreturn]] static void bad(const std::string& what) {
    fail(ErrorKind::InvalidArgument, "malformed example payload: " + what);
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

float float_from(std::span<const std::uint8_t> b) {
  const std::uint32_t u = std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 |
                          std::uint32_t{b[2]} << 16 | std::uint32_t{b[3]} << 24;
  return std::bit_cast<float>(u);
}

Feature decode_feature(std::span<const std::uint8_t> data) {
  Reader r(data);
  Feature out = BytesList{};
  while (!r.done()) {
    const std::uint64_t tag = r.varint();
    const auto field = static_cast<std::uint32_t>(tag >> 3);
    const auto type = static_cast<std::uint32_t>(tag & 7);
    if (field < 1 || field > 3 || type != kLengthDelimited) {
      r.skip(type);
      continue;
    }
    Reader list(r.delimited());
    if (field == 1) {
      BytesList b;
      while (!list.done()) {
        const std::uint64_t t = list.varint();
        if (t != ((1u << 3) | kLengthDelimited)) {
          list.skip(static_cast<std::uint32_t>(t & 7));
          continue;
        }
        const auto s = list.delimited();
        b.emplace_back(reinterpret_cast<const char*>(s.data()), s.size());
      }
      out = std::move(b);
    } else if (field == 2) {
      FloatList f;
      while (!list.done()) {
        const std::uint64_t t = list.varint();
        if (t == ((1u << 3) | kLengthDelimited)) {
          const auto packed = list.delimited();
          if (packed.size() % 4 != 0) Reader::bad("packed float list length");
          for (std::size_t i = 0; i < packed.size(); i += 4) f.push_back(float_from(packed.subspan(i, 4)));
        } else if (t == ((1u << 3) | kFixed32)) {
          f.push_back(float_from(list.take(4)));
        } else {
          list.skip(static_cast<std::uint32_t>(t & 7));
        }
      }
      out = std::move(f);
    } else {
      Int64List l;
      while (!list.done()) {
        const std::uint64_t t = list.varint();
        if (t == ((1u << 3) | kLengthDelimited)) {
          Reader packed(list.delimited());
          while (!packed.done()) l.push_back(static_cast<std::int64_t>(packed.varint()));
        } else if (t == ((1u << 3) | kVarint)) {
          l.push_back(static_cast<std::int64_t>(list.varint()));
        } else {
          list.skip(static_cast<std::uint32_t>(t & 7));
        }
      }
      out = std::move(l);
    }
  }
  return out;
}

template <typename T>
const T& get_feature(const Features& f, const std::string& key) {
  const auto it = f.find(key);
  if (it == f.end()) fail(ErrorKind::InvalidArgument, "example lacks feature \"" + key + "\"");
  const T* v = std::get_if<T>(&it->second);
  if (!v) fail(ErrorKind::InvalidArgument, "feature \"" + key + "\" has the wrong list type");
  return *v;
}

std::string single_string(const Features& f, const std::string& key) {
  const auto& b = get_feature<BytesList>(f, key);
  if (b.size() != 1) fail(ErrorKind::InvalidArgument, "feature \"" + key + "\" must hold one value");
  return b.front();
}

void check_shape(const std::vector<std::int64_t>& shape, std::size_t count, const char* what) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) {
    if (d <= 0) fail(ErrorKind::ShapeMismatch, std::string(what) + " shape must be positive");
    n *= d;
  }
  if (shape.empty() || static_cast<std::size_t>(n) != count) {
    fail(ErrorKind::ShapeMismatch, std::string(what) + " shape does not match its value count");
  }
}

}  // namespace

Bytes encode_example(const Features& features) {
  Bytes map;
  for (const auto& [key, value] : features) {
    Bytes entry;
    put_bytes(entry, 1, as_bytes(key));
    put_bytes(entry, 2, encode_feature(value));
    put_bytes(map, 1, entry);
  }
  Bytes out;
  put_bytes(out, 1, map);
  return out;
}

Features decode_example(std::span<const std::uint8_t> payload) {
  Features out;
  Reader ex(payload);
  while (!ex.done()) {
    const std::uint64_t tag = ex.varint();
    if (tag != ((1u << 3) | kLengthDelimited)) {
      ex.skip(static_cast<std::uint32_t>(tag & 7));
      continue;
    }
    Reader feats(ex.delimited());
    while (!feats.done()) {
      const std::uint64_t t = feats.varint();
      if (t != ((1u << 3) | kLengthDelimited)) {
        feats.skip(static_cast<std::uint32_t>(t & 7));
        continue;
      }
      Reader entry(feats.delimited());
      std::string key;
      Feature value = BytesList{};
      while (!entry.done()) {
        const std::uint64_t et = entry.varint();
        if (et == ((1u << 3) | kLengthDelimited)) {
          const auto k = entry.delimited();
          key.assign(reinterpret_cast<const char*>(k.data()), k.size());
        } else if (et == ((2u << 3) | kLengthDelimited)) {
          value = decode_feature(entry.delimited());
        } else {
          entry.skip(static_cast<std::uint32_t>(et & 7));
        }
      }
      out[key] = std::move(value);
    }
  }
  return out;
}

const char* to_string(RecordMode m) noexcept { return m == RecordMode::Slices2D ? "2d" : "3d"; }

RecordMode parse_record_mode(const std::string& s) {
  if (s == "2d") return RecordMode::Slices2D;
  if (s == "3d") return RecordMode::Patches3D;
  fail(ErrorKind::InvalidArgument, "record mode must be \"2d\" or \"3d\", got \"" + s + "\"");
}

Features header_features(const FileHeader& h) {
  return {{"kind", BytesList{"header"}},
          {"mode", BytesList{to_string(h.mode)}},
          {"subject", BytesList{h.subject}},
          {"modality", BytesList{h.modality}}};
}

FileHeader header_from_features(const Features& f) {
  if (single_string(f, "kind") != "header") {
    fail(ErrorKind::InvalidArgument, "first record is not a file header");
  }
  FileHeader h;
  h.mode = parse_record_mode(single_string(f, "mode"));
  h.subject = single_string(f, "subject");
  h.modality = single_string(f, "modality");
  return h;
}

Features pair_features(const TrainingPair& p) {
  check_shape(p.input_shape, p.input.size(), "input");
  check_shape(p.target_shape, p.target.size(), "target");
  Features f{{"input", p.input},
             {"input_shape", p.input_shape},
             {"target", p.target},
             {"target_shape", p.target_shape}};
  if (p.anchor) f["anchor"] = *p.anchor;
  return f;
}

TrainingPair pair_from_features(const Features& f) {
  TrainingPair p;
  p.input = get_feature<FloatList>(f, "input");
  p.input_shape = get_feature<Int64List>(f, "input_shape");
  p.target = get_feature<FloatList>(f, "target");
  p.target_shape = get_feature<Int64List>(f, "target_shape");
  if (f.contains("anchor")) p.anchor = get_feature<Int64List>(f, "anchor");
  check_shape(p.input_shape, p.input.size(), "input");
  check_shape(p.target_shape, p.target.size(), "target");
  return p;
}

}  // namespace voxelforge::rec
