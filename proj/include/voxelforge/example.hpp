#pragma once

// Minimal protobuf wire encoding of the Example / Features / Feature messages
// (bytes, packed float and packed int64 lists only).

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "voxelforge/records.hpp"

namespace voxelforge::rec {

using BytesList = std::vector<std::string>;
using FloatList = std::vector<float>;
using Int64List = std::vector<std::int64_t>;
using Feature = std::variant<BytesList, FloatList, Int64List>;

/// Keys are emitted in sorted order, so encoding is deterministic.
using Features = std::map<std::string, Feature>;

Bytes encode_example(const Features& features);
/// Throws InvalidArgument on malformed wire data.
Features decode_example(std::span<const std::uint8_t> payload);

enum class RecordMode { Slices2D, Patches3D };

const char* to_string(RecordMode m) noexcept;
RecordMode parse_record_mode(const std::string& s);

struct FileHeader {
  RecordMode mode = RecordMode::Patches3D;
  std::string subject;
  std::string modality;
};

struct TrainingPair {
  std::vector<float> input;
  std::vector<std::int64_t> input_shape;
  std::vector<float> target;
  std::vector<std::int64_t> target_shape;
  std::optional<std::vector<std::int64_t>> anchor;

  bool operator==(const TrainingPair&) const = default;
};

Features header_features(const FileHeader& h);
FileHeader header_from_features(const Features& f);

/// Throws ShapeMismatch when a shape's product differs from its value count.
Features pair_features(const TrainingPair& p);
TrainingPair pair_from_features(const Features& f);

}  // namespace voxelforge::rec
