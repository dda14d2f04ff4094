#pragma once

// Layer output-shape inference and verification of declared architecture
// tables.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace voxelforge::net {

enum class LayerKind { Input, Convolution, Deconvolution, MaxPooling, Dense, Output };
enum class Padding { Same, Valid, Infer };

std::string to_string(LayerKind k);
std::string to_string(Padding p);

/// Spatial extents (2 or 3 of them) followed by a channel count.
struct TensorShape {
  std::vector<std::int64_t> spatial;
  std::int64_t channels = 0;

  /// "384x384x1" form; the last field is the channel count.
  static TensorShape parse(const std::string& text);
  std::string to_string() const;
  bool operator==(const TensorShape&) const = default;
};

struct LayerSpec {
  LayerKind kind = LayerKind::Input;
  std::vector<std::int64_t> kernel;
  std::vector<std::int64_t> strides;
  Padding padding = Padding::Infer;
  /// Output channels for convolutions, units for Dense; 0 keeps the input's.
  std::int64_t features = 0;
};

/// Output shape of one layer under a concrete padding (Infer is rejected).
/// Input and Output rows pass the shape through.
///   conv/pool same: ceil(n / s)      conv/pool valid: floor((n - k) / s) + 1
///   deconv same:    n * s            deconv valid:    (n - 1) * s + k
///   dense:          spatial unchanged, channels = units
/// Throws NonPositiveOutput for an empty result, InvalidArgument for a
/// kernel/stride rank that does not match the input.
TensorShape infer_shape(const LayerSpec& layer, const TensorShape& in,
                        Padding padding = Padding::Same);

struct TableRow {
  LayerSpec layer;
  TensorShape expected;
};

struct ShapeTable {
  std::string id;
  std::string title;
  std::vector<TableRow> rows;
};

enum class RowStatus { Match, Mismatch, Unresolvable };
std::string to_string(RowStatus s);

struct RowReport {
  std::size_t index = 0;
  LayerKind kind = LayerKind::Input;
  RowStatus status = RowStatus::Match;
  TensorShape expected;
  std::optional<TensorShape> computed;
  std::optional<Padding> padding;
  std::string note;
};

struct TableReport {
  std::string id;
  std::string title;
  std::vector<RowReport> rows;
  TensorShape final_shape;

  std::size_t flagged() const;
  bool fully_matched() const { return flagged() == 0; }
};

/// One entry per row. Infer rows try same, then valid. After a flagged row
/// the next row continues from the table's declared shape.
TableReport verify_table(const ShapeTable& table);

ShapeTable table_from_json(const nlohmann::json& j);
std::vector<ShapeTable> load_tables(const std::filesystem::path& path);
std::filesystem::path default_tables_path();

std::string format_report(const TableReport& report);
void to_json(nlohmann::json& j, const TableReport& r);

}  // namespace voxelforge::net
