#include "voxelforge/netshape.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "voxelforge/error.hpp"

namespace voxelforge::net {

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Input: return "Input";
    case LayerKind::Convolution: return "Convolution";
    case LayerKind::Deconvolution: return "Deconvolution";
    case LayerKind::MaxPooling: return "MaxPooling";
    case LayerKind::Dense: return "Dense";
    case LayerKind::Output: return "Output";
  }
  return "?";
}

std::string to_string(Padding p) {
  switch (p) {
    case Padding::Same: return "same";
    case Padding::Valid: return "valid";
    case Padding::Infer: return "infer";
  }
  return "?";
}

std::string to_string(RowStatus s) {
  switch (s) {
    case RowStatus::Match: return "match";
    case RowStatus::Mismatch: return "MISMATCH";
    case RowStatus::Unresolvable: return "UNRESOLVABLE";
  }
  return "?";
}

TensorShape TensorShape::parse(const std::string& text) {
  std::vector<std::int64_t> fields;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, 'x')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      fields.push_back(v);
    } catch (const std::exception&) {
      fail(ErrorKind::InvalidArgument, "bad shape \"" + text + "\"");
    }
  }
  if (fields.size() < 2 || fields.size() > 4) {
    fail(ErrorKind::InvalidArgument, "shape \"" + text + "\" needs 1-3 spatial extents and channels");
  }
  TensorShape s;
  s.channels = fields.back();
  fields.pop_back();
  s.spatial = std::move(fields);
  return s;
}

std::string TensorShape::to_string() const {
  std::string out;
  for (std::int64_t v : spatial) out += std::to_string(v) + "x";
  return out + std::to_string(channels);
}

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

}  // namespace

TensorShape infer_shape(const LayerSpec& layer, const TensorShape& in, Padding padding) {
  for (std::int64_t v : in.spatial) {
    if (v <= 0) fail(ErrorKind::InvalidArgument, "input shape must be positive");
  }
  switch (layer.kind) {
    case LayerKind::Input:
    case LayerKind::Output:
      return in;
    case LayerKind::Dense:
      return {in.spatial, layer.features > 0 ? layer.features : in.channels};
    default:
      break;
  }
  if (padding == Padding::Infer) {
    fail(ErrorKind::InvalidArgument, "infer_shape needs a concrete padding");
  }
  const std::size_t rank = in.spatial.size();
  if (layer.kernel.size() != rank || layer.strides.size() != rank) {
    fail(ErrorKind::InvalidArgument, to_string(layer.kind) + " kernel/stride rank does not match " +
                                         in.to_string());
  }
  TensorShape out;
  out.channels = layer.kind == LayerKind::MaxPooling || layer.features == 0 ? in.channels
                                                                             : layer.features;
  for (std::size_t a = 0; a < rank; ++a) {
    const std::int64_t n = in.spatial[a];
    const std::int64_t k = layer.kernel[a];
    const std::int64_t s = layer.strides[a];
    if (k <= 0 || s <= 0) fail(ErrorKind::InvalidArgument, "kernel and stride must be positive");
    std::int64_t o = 0;
    if (layer.kind == LayerKind::Deconvolution) {
      o = padding == Padding::Same ? n * s : (n - 1) * s + k;
    } else {
      o = padding == Padding::Same ? ceil_div(n, s) : floor_div(n - k, s) + 1;
    }
    if (o <= 0) {
      fail(ErrorKind::NonPositiveOutput, to_string(layer.kind) + " with " + to_string(padding) +
                                             " padding empties " + in.to_string());
    }
    out.spatial.push_back(o);
  }
  return out;
}

std::size_t TableReport::flagged() const {
  std::size_t n = 0;
  for (const RowReport& r : rows) n += r.status != RowStatus::Match;
  return n;
}

TableReport verify_table(const ShapeTable& table) {
  TableReport report;
  report.id = table.id;
  report.title = table.title;
  TensorShape current;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const TableRow& row = table.rows[i];
    RowReport r;
    r.index = i;
    r.kind = row.layer.kind;
    r.expected = row.expected;
    if (i == 0) {
      if (row.layer.kind != LayerKind::Input) {
        r.status = RowStatus::Unresolvable;
        r.note = "table does not start with an Input row";
      } else {
        r.computed = row.expected;
      }
    } else if (row.layer.kind == LayerKind::Dense) {
      const TensorShape out = infer_shape(row.layer, current);
      r.computed = out;
      if (out.spatial != row.expected.spatial) {
        r.status = RowStatus::Unresolvable;
        r.note = "dense layer cannot change spatial extent " + current.to_string() + " -> " +
                 row.expected.to_string();
      } else if (!(out == row.expected)) {
        r.status = RowStatus::Mismatch;
      }
    } else {
      std::vector<Padding> candidates;
      const bool padded = row.layer.kind == LayerKind::Convolution ||
                          row.layer.kind == LayerKind::Deconvolution ||
                          row.layer.kind == LayerKind::MaxPooling;
      if (!padded) {
        candidates = {Padding::Same};
      } else if (row.layer.padding == Padding::Infer) {
        candidates = {Padding::Same, Padding::Valid};
      } else {
        candidates = {row.layer.padding};
      }
      r.status = RowStatus::Mismatch;
      for (Padding p : candidates) {
        TensorShape out;
        try {
          out = infer_shape(row.layer, current, p);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::NonPositiveOutput) throw;
          continue;
        }
        if (!r.computed) r.computed = out;
        if (out == row.expected) {
          r.computed = out;
          r.status = RowStatus::Match;
          if (padded) r.padding = p;
          break;
        }
      }
      if (!r.computed) {
        r.status = RowStatus::Unresolvable;
        r.note = "no padding yields a non-empty output";
      } else if (r.status == RowStatus::Mismatch) {
        r.note = "no padding reproduces the declared shape";
      }
    }
    current = r.status == RowStatus::Match ? *r.computed : row.expected;
    report.rows.push_back(std::move(r));
  }
  report.final_shape = current;
  return report;
}

namespace {

LayerKind parse_kind(const std::string& s) {
  for (LayerKind k : {LayerKind::Input, LayerKind::Convolution, LayerKind::Deconvolution,
                      LayerKind::MaxPooling, LayerKind::Dense, LayerKind::Output}) {
    if (to_string(k) == s) return k;
  }
  fail(ErrorKind::InvalidArgument, "unknown layer type \"" + s + "\"");
}

Padding parse_padding(const std::string& s) {
  for (Padding p : {Padding::Same, Padding::Valid, Padding::Infer}) {
    if (to_string(p) == s) return p;
  }
  fail(ErrorKind::InvalidArgument, "unknown padding \"" + s + "\"");
}

}  // namespace

ShapeTable table_from_json(const nlohmann::json& j) {
  try {
    ShapeTable t;
    t.id = j.at("id").get<std::string>();
    t.title = j.value("title", t.id);
    for (const auto& row : j.at("rows")) {
      TableRow r;
      r.layer.kind = parse_kind(row.at("type").get<std::string>());
      r.expected = TensorShape::parse(row.at("output").get<std::string>());
      r.layer.padding = parse_padding(row.value("padding", std::string("infer")));
      if (row.contains("kernel")) r.layer.kernel = row["kernel"].get<std::vector<std::int64_t>>();
      if (row.contains("strides")) {
        r.layer.strides = row["strides"].get<std::vector<std::int64_t>>();
        if (r.layer.strides.size() == 1) r.layer.strides.resize(r.layer.kernel.size(), r.layer.strides[0]);
      }
      const bool windowed = r.layer.kind == LayerKind::Convolution ||
                            r.layer.kind == LayerKind::Deconvolution ||
                            r.layer.kind == LayerKind::MaxPooling;
      if (windowed) {
        const auto positive = [](std::int64_t v) { return v > 0; };
        if (r.layer.kernel.empty() || r.layer.kernel.size() != r.layer.strides.size() ||
            !std::all_of(r.layer.kernel.begin(), r.layer.kernel.end(), positive) ||
            !std::all_of(r.layer.strides.begin(), r.layer.strides.end(), positive)) {
          fail(ErrorKind::InvalidArgument,
               "table " + t.id + " row " + std::to_string(t.rows.size()) +
                   ": kernel and strides must be positive and of equal rank");
        }
      }
      if (r.layer.kind == LayerKind::Dense) {
        r.layer.features = row.at("units").get<std::int64_t>();
      } else if (r.layer.kind != LayerKind::MaxPooling) {
        r.layer.features = row.value("features", r.expected.channels);
      }
      t.rows.push_back(std::move(r));
    }
    if (t.rows.size() < 2 || t.rows.front().layer.kind != LayerKind::Input ||
        t.rows.back().layer.kind != LayerKind::Output) {
      fail(ErrorKind::InvalidArgument, "table " + t.id + " must run from Input to Output");
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("shape table: ") + e.what());
  }
}

std::vector<ShapeTable> load_tables(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidArgument, path.string() + ": " + e.what());
  }
  std::vector<ShapeTable> out;
  for (const auto& t : j.at("tables")) out.push_back(table_from_json(t));
  return out;
}

std::filesystem::path default_tables_path() {
  return std::filesystem::path(VOXELFORGE_DATA_DIR) / "network_tables.json";
}

std::string format_report(const TableReport& report) {
  std::string out = report.title + " [" + report.id + "]\n";
  char line[256];
  for (const RowReport& r : report.rows) {
    std::snprintf(line, sizeof line, "  %2zu %-14s %-7s %-18s %-18s %s%s%s\n", r.index,
                  to_string(r.kind).c_str(), r.padding ? to_string(*r.padding).c_str() : "-",
                  r.expected.to_string().c_str(),
                  r.computed ? r.computed->to_string().c_str() : "-", to_string(r.status).c_str(),
                  r.note.empty() ? "" : ": ", r.note.c_str());
    out += line;
  }
  std::snprintf(line, sizeof line, "  final %s, %zu flagged row(s)\n",
                report.final_shape.to_string().c_str(), report.flagged());
  return out + line;
}

void to_json(nlohmann::json& j, const TableReport& r) {
  j = nlohmann::json{{"id", r.id},
                     {"title", r.title},
                     {"final_shape", r.final_shape.to_string()},
                     {"flagged", r.flagged()},
                     {"rows", nlohmann::json::array()}};
  for (const RowReport& row : r.rows) {
    nlohmann::json e{{"index", row.index},
                     {"type", to_string(row.kind)},
                     {"status", to_string(row.status)},
                     {"expected", row.expected.to_string()}};
    if (row.computed) e["computed"] = row.computed->to_string();
    if (row.padding) e["padding"] = to_string(*row.padding);
    if (!row.note.empty()) e["note"] = row.note;
    j["rows"].push_back(std::move(e));
  }
}

}  // namespace voxelforge::net
