#include "voxelforge/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "voxelforge/error.hpp"

namespace voxelforge::dataset {

using nlohmann::json;

namespace {

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidArgument, path.string() + ": " + e.what());
  }
}

Shape3 shape_from(const json& j) {
  const auto v = j.get<std::vector<std::size_t>>();
  if (v.size() != 3) fail(ErrorKind::InvalidArgument, "shape must be [depth, height, width]");
  return {v[0], v[1], v[2]};
}

}  // namespace

DatasetIndex load_index(const std::filesystem::path& path) {
  const json j = read_json(path);
  try {
    DatasetIndex idx;
    idx.modalities = j.at("modalities").get<std::vector<std::string>>();
    for (const json& s : j.at("subjects")) {
      IndexSubject e{s.at("id").get<std::string>(),
                     s.at("modalities").get<std::vector<std::string>>()};
      for (const std::string& m : e.modalities) {
        if (std::find(idx.modalities.begin(), idx.modalities.end(), m) == idx.modalities.end()) {
          fail(ErrorKind::InvalidArgument,
               "subject " + e.id + " lists undeclared modality " + m);
        }
      }
      idx.subjects.push_back(std::move(e));
    }
    return idx;
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidArgument, path.string() + ": " + e.what());
  }
}

std::filesystem::path default_index_path() {
  return std::filesystem::path(VOXELFORGE_DATA_DIR) / "rire_index.json";
}

ModalityCounts count(const DatasetIndex& index) {
  ModalityCounts c;
  for (const std::string& m : index.modalities) {
    c.all[m] = 0;
    if (m != "CT") c.with_ct[m] = 0;
  }
  for (const IndexSubject& s : index.subjects) {
    const bool has_ct =
        std::find(s.modalities.begin(), s.modalities.end(), "CT") != s.modalities.end();
    std::vector<std::string> unique = s.modalities;
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    for (const std::string& m : unique) {
      ++c.all[m];
      if (has_ct && m != "CT") ++c.with_ct[m];
    }
  }
  return c;
}

const ModalityCounts& reference_counts() {
  static const ModalityCounts counts{
      {{"CT", 17}, {"PD", 14}, {"T1", 19}, {"T2", 18}, {"MP-RAGE", 9}, {"PET", 8}},
      {{"PD", 12}, {"T1", 17}, {"T2", 16}, {"MP-RAGE", 9}, {"PET", 6}}};
  return counts;
}

bool DatasetReport::ok() const {
  return !checks.empty() &&
         std::all_of(checks.begin(), checks.end(), [](const CountCheck& c) { return c.ok(); });
}

DatasetReport verify(const DatasetIndex& index) {
  const ModalityCounts actual = count(index);
  const ModalityCounts& ref = reference_counts();
  const bool has_ct =
      std::find(index.modalities.begin(), index.modalities.end(), "CT") != index.modalities.end();
  DatasetReport r;
  for (const std::string& m : index.modalities) {
    const auto it = ref.all.find(m);
    if (it == ref.all.end()) fail(ErrorKind::InvalidArgument, "no reference count for " + m);
    r.checks.push_back({"all", m, it->second, actual.all.at(m)});
  }
  if (has_ct) {
    for (const std::string& m : index.modalities) {
      if (m == "CT") continue;
      r.checks.push_back({"with CT", m, ref.with_ct.at(m), actual.with_ct.at(m)});
    }
  }
  return r;
}

std::string format_report(const DatasetReport& r) {
  std::string out;
  char line[128];
  for (const CountCheck& c : r.checks) {
    std::snprintf(line, sizeof line, "  %-8s %-8s expected %3zu  found %3zu  %s\n", c.row.c_str(),
                  c.modality.c_str(), c.expected, c.actual, c.ok() ? "PASS" : "FAIL");
    out += line;
  }
  out += r.ok() ? "dataset counts: PASS\n" : "dataset counts: FAIL\n";
  return out;
}

std::vector<TrimCase> load_trim_table(const std::filesystem::path& path) {
  const json j = read_json(path);
  try {
    std::vector<TrimCase> out;
    for (const json& s : j.at("subjects")) {
      TrimCase c;
      c.subject = s.at("subject").get<std::string>();
      c.split = s.value("split", std::string());
      c.before = shape_from(s.at("shape_before"));
      c.after = shape_from(s.at("shape_after"));
      c.trim = s.at("trim").get<std::vector<morph::SliceRange>>();
      out.push_back(std::move(c));
    }
    return out;
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidArgument, path.string() + ": " + e.what());
  }
}

std::filesystem::path default_trim_table_path() {
  return std::filesystem::path(VOXELFORGE_DATA_DIR) / "table_trims.json";
}

std::vector<TrimCheck> verify_trims(const std::vector<TrimCase>& cases, bool full_planes) {
  std::vector<TrimCheck> out;
  for (const TrimCase& c : cases) {
    const Shape3 grid = full_planes ? c.before : Shape3{c.before.depth, 1, 1};
    const Volume v = Volume::zeros(grid);
    const Volume t = morph::trim_slices(v, c.trim);
    out.push_back({c.subject, c.after, {t.shape().depth, c.before.height, c.before.width}});
  }
  return out;
}

}  // namespace voxelforge::dataset
