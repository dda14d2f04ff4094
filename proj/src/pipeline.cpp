#include "voxelforge/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include "formats/byteio.hpp"
#include "voxelforge/error.hpp"
#include "voxelforge/formats/mhd.hpp"
#include "voxelforge/formats/nifti.hpp"
#include "voxelforge/patchkit.hpp"
#include "voxelforge/records.hpp"

namespace voxelforge::pipeline {

using nlohmann::json;

// ---------------------------------------------------------------- manifest

void Manifest::validate() const {
  std::set<std::string> ids;
  std::set<fs::path> paths;
  if (subjects.empty()) fail(ErrorKind::InvalidArgument, "manifest lists no subjects");
  for (const SubjectEntry& s : subjects) {
    if (s.id.empty() || s.id.find_first_of("/\\") != std::string::npos || s.id == "." ||
        s.id == "..") {
      fail(ErrorKind::InvalidArgument, "invalid subject id \"" + s.id + "\"");
    }
    if (!ids.insert(s.id).second) fail(ErrorKind::InvalidArgument, "duplicate subject " + s.id);
    for (const fs::path& p : {s.mri, s.ct}) {
      if (!paths.insert(p.lexically_normal()).second) {
        fail(ErrorKind::InvalidArgument, "path " + p.string() + " is listed twice");
      }
    }
  }
  registration.validate();
  loss_weights.validate();
  if (!(lambda_boost >= 0.0)) fail(ErrorKind::InvalidArgument, "lambda_boost must be >= 0");
  if (patch.stride == 0) fail(ErrorKind::InvalidArgument, "patch stride must be positive");
  if (!(patch.min_foreground_fraction >= 0.0 && patch.min_foreground_fraction <= 1.0)) {
    fail(ErrorKind::InvalidArgument, "min_foreground_fraction must lie in [0, 1]");
  }
  if (patch.target_height == 0 || patch.target_width == 0) {
    fail(ErrorKind::InvalidArgument, "target_hw must be positive");
  }
}

Manifest manifest_from_json(const json& j, const fs::path& base_dir) {
  auto resolve = [&](const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : (base_dir / path).lexically_normal();
  };
  Manifest m;
  try {
    for (const json& s : j.at("subjects")) {
      SubjectEntry e;
      e.id = s.at("id").get<std::string>();
      e.mri = resolve(s.at("mri").get<std::string>());
      e.ct = resolve(s.at("ct").get<std::string>());
      e.modality = s.value("modality", e.modality);
      e.trim = s.value("trim", std::vector<morph::SliceRange>{});
      if (s.contains("prediction")) e.prediction = resolve(s["prediction"].get<std::string>());
      m.subjects.push_back(std::move(e));
    }
    if (j.contains("registration")) m.registration = j["registration"].get<reg::RegistrationConfig>();
    if (j.contains("clean")) {
      const json& c = j["clean"];
      if (c.contains("threshold") && !c["threshold"].is_null()) {
        m.clean.threshold = c["threshold"].get<double>();
      }
      const std::string conn = c.value("connectivity", std::string("face"));
      if (conn == "face") {
        m.clean.connectivity = morph::Connectivity::Face;
      } else if (conn == "full") {
        m.clean.connectivity = morph::Connectivity::Full;
      } else {
        fail(ErrorKind::InvalidArgument, "connectivity must be \"face\" or \"full\"");
      }
    }
    if (j.contains("patch")) {
      const json& p = j["patch"];
      m.patch.mode = rec::parse_record_mode(p.value("mode", std::string("3d")));
      m.patch.stride = p.value("stride", m.patch.stride);
      m.patch.min_foreground_fraction =
          p.value("min_foreground_fraction", m.patch.min_foreground_fraction);
      if (p.contains("target_hw")) {
        const auto hw = p["target_hw"].get<std::vector<std::size_t>>();
        if (hw.size() != 2) fail(ErrorKind::InvalidArgument, "target_hw must be [height, width]");
        m.patch.target_height = hw[0];
        m.patch.target_width = hw[1];
      }
    }
    if (j.contains("loss_weights")) m.loss_weights = j["loss_weights"].get<loss::LossWeights>();
    m.lambda_boost = j.value("lambda_boost", 0.0);
    m.output = resolve(j.value("output", std::string("out")));
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("manifest: ") + e.what());
  }
  m.validate();
  return m;
}

json manifest_to_json(const Manifest& m) {
  json subjects = json::array();
  for (const SubjectEntry& s : m.subjects) {
    json e{{"id", s.id},
           {"mri", s.mri.string()},
           {"ct", s.ct.string()},
           {"modality", s.modality},
           {"trim", s.trim}};
    if (s.prediction) e["prediction"] = s.prediction->string();
    subjects.push_back(std::move(e));
  }
  json clean{{"connectivity",
              m.clean.connectivity == morph::Connectivity::Face ? "face" : "full"}};
  clean["threshold"] = m.clean.threshold ? json(*m.clean.threshold) : json(nullptr);
  return json{{"subjects", subjects},
              {"registration", m.registration},
              {"clean", clean},
              {"patch",
               {{"mode", rec::to_string(m.patch.mode)},
                {"stride", m.patch.stride},
                {"min_foreground_fraction", m.patch.min_foreground_fraction},
                {"target_hw", {m.patch.target_height, m.patch.target_width}}}},
              {"loss_weights", m.loss_weights},
              {"lambda_boost", m.lambda_boost},
              {"output", m.output.string()}};
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidArgument, path.string() + ": " + e.what());
  }
  return manifest_from_json(j, fs::absolute(path).parent_path());
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages{Stage::Convert, Stage::Register, Stage::Clean,
                                         Stage::Patch,   Stage::Export,   Stage::Evaluate};
  return stages;
}

std::string to_string(Stage s) {
  switch (s) {
    case Stage::Convert: return "convert";
    case Stage::Register: return "register";
    case Stage::Clean: return "clean";
    case Stage::Patch: return "patch";
    case Stage::Export: return "export";
    case Stage::Evaluate: return "evaluate";
  }
  return "?";
}

Stage parse_stage(const std::string& s) {
  for (Stage st : all_stages()) {
    if (to_string(st) == s) return st;
  }
  fail(ErrorKind::InvalidArgument, "unknown stage \"" + s + "\"");
}

// ----------------------------------------------------------------- helpers

std::string file_sha256(const fs::path& path) {
  const auto bytes = formats::detail::read_file(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorKind::InvariantBreach, "SHA-256 failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

namespace {

std::string sha256_text(const std::string& text) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

/// The files whose bytes define a volume input (a .mhd header names its raw).
std::vector<fs::path> volume_files(const fs::path& p) {
  std::vector<fs::path> out{p};
  if (p.extension() == ".mhd") {
    const auto bytes = formats::detail::read_file(p);
    const std::string text(bytes.begin(), bytes.end());
    const formats::MhdHeader h = formats::parse_mhd_header(text);
    if (h.element_data_file != "LOCAL") out.push_back(p.parent_path() / h.element_data_file);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  formats::detail::write_file(path, text.data(), text.size());
}

json read_json(const fs::path& path) {
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

/// Inputs, configuration and outputs of one stage invocation.
struct StagePlan {
  std::string stage;
  std::vector<fs::path> inputs;
  json config;
  std::vector<fs::path> outputs;
  fs::path stamp;
};

std::string fingerprint(const StagePlan& plan) {
  std::string text = plan.stage + "\n" + plan.config.dump() + "\n";
  for (const fs::path& in : plan.inputs) {
    for (const fs::path& f : volume_files(in)) {
      if (!fs::exists(f)) fail(ErrorKind::Io, "missing input " + f.string());
      text += f.filename().string() + " " + file_sha256(f) + "\n";
    }
  }
  return sha256_text(text);
}

bool up_to_date(const StagePlan& plan, const std::string& print) {
  if (!fs::exists(plan.stamp)) return false;
  json stamp;
  try {
    stamp = read_json(plan.stamp);
  } catch (const Error&) {
    return false;
  }
  if (stamp.value("fingerprint", std::string()) != print) return false;
  const json outputs = stamp.value("outputs", json::object());
  if (outputs.size() != plan.outputs.size()) return false;
  for (const fs::path& out : plan.outputs) {
    const std::string key = out.filename().string();
    if (!outputs.contains(key) || !fs::exists(out)) return false;
    if (outputs[key].get<std::string>() != file_sha256(out)) return false;
  }
  return true;
}

void write_stamp(const StagePlan& plan, const std::string& print) {
  json outputs = json::object();
  for (const fs::path& out : plan.outputs) outputs[out.filename().string()] = file_sha256(out);
  write_text(plan.stamp, json{{"fingerprint", print}, {"outputs", outputs}}.dump(2) + "\n");
}

template <typename Body>
StageOutcome run_planned(const StagePlan& plan, const std::string& subject, Stage stage,
                         bool force, Body body) {
  StageOutcome outcome{subject, stage, false, plan.outputs};
  const std::string print = fingerprint(plan);
  if (!force && up_to_date(plan, print)) {
    spdlog::info("{} {}: up to date", subject.empty() ? "all" : subject, plan.stage);
    outcome.skipped = true;
    return outcome;
  }
  spdlog::info("{} {}: running", subject.empty() ? "all" : subject, plan.stage);
  body();
  write_stamp(plan, print);
  return outcome;
}

json range_json(IntensityRange r) { return json{{"min", r.min}, {"max", r.max}}; }

// ------------------------------------------------------------------ stages

StageOutcome stage_convert(const Manifest& m, const SubjectEntry& s, bool force) {
  const fs::path d = subject_dir(m, s.id);
  StagePlan plan{"convert", {s.mri, s.ct}, json::object(), {d / "mri.nii.gz", d / "ct.nii.gz"},
                 d / "convert.stamp"};
  return run_planned(plan, s.id, Stage::Convert, force, [&] {
    formats::write_nifti(read_volume(s.mri), plan.outputs[0]);
    formats::write_nifti(read_volume(s.ct), plan.outputs[1]);
  });
}

StageOutcome stage_register(const Manifest& m, const SubjectEntry& s, bool force) {
  const fs::path d = subject_dir(m, s.id);
  StagePlan plan{"register",
                 {d / "ct.nii.gz", d / "mri.nii.gz"},
                 json(m.registration),
                 {d / "transform.json", d / "registration.json", d / "mri_registered.nii.gz"},
                 d / "register.stamp"};
  return run_planned(plan, s.id, Stage::Register, force, [&] {
    const Volume ct = formats::read_nifti(plan.inputs[0]);
    const Volume mri = formats::read_nifti(plan.inputs[1]);
    const reg::RegistrationResult r = reg::coregister(ct, mri, m.registration);
    if (r.did_not_improve) spdlog::warn("{} register: no improvement, identity kept", s.id);
    write_text(plan.outputs[0], json(r.transform).dump(2) + "\n");
    json report{{"did_not_improve", r.did_not_improve},
                {"evaluations", r.evaluations},
                {"accepted_steps", r.trace.size()},
                {"final_mutual_information", r.trace.empty() ? 0.0 : r.trace.back().mutual_information}};
    write_text(plan.outputs[1], report.dump(2) + "\n");
    formats::write_nifti(reg::resample(mri, r.transform, ct), plan.outputs[2]);
  });
}

StageOutcome stage_clean(const Manifest& m, const SubjectEntry& s, bool force) {
  const fs::path d = subject_dir(m, s.id);
  json config{{"threshold", m.clean.threshold ? json(*m.clean.threshold) : json(nullptr)},
              {"connectivity", m.clean.connectivity == morph::Connectivity::Face ? "face" : "full"},
              {"trim", s.trim}};
  StagePlan plan{"clean",
                 {d / "ct.nii.gz", d / "mri_registered.nii.gz"},
                 config,
                 {d / "ct_clean.nii.gz", d / "mask.nii.gz", d / "mri_clean.nii.gz"},
                 d / "clean.stamp"};
  return run_planned(plan, s.id, Stage::Clean, force, [&] {
    const Volume ct = formats::read_nifti(plan.inputs[0]);
    const Volume mri = formats::read_nifti(plan.inputs[1]);
    const morph::CleanResult c = morph::clean_ct(ct, {m.clean.threshold, m.clean.connectivity});
    formats::write_nifti(morph::trim_slices(c.volume, s.trim), plan.outputs[0]);
    formats::write_nifti(morph::trim_slices(c.mask, s.trim), plan.outputs[1]);
    formats::write_nifti(morph::trim_slices(mri, s.trim), plan.outputs[2]);
  });
}

StageOutcome stage_patch(const Manifest& m, const SubjectEntry& s, bool force) {
  const fs::path d = subject_dir(m, s.id);
  json config{{"mode", rec::to_string(m.patch.mode)},
              {"stride", m.patch.stride},
              {"min_foreground_fraction", m.patch.min_foreground_fraction},
              {"target_hw", {m.patch.target_height, m.patch.target_width}},
              {"lambda_boost", m.lambda_boost}};
  StagePlan plan{"patch",
                 {d / "mri_clean.nii.gz", d / "ct_clean.nii.gz", d / "mask.nii.gz"},
                 config,
                 {d / "mri_input.nii.gz", d / "ct_target.nii.gz", d / "boost.nii.gz",
                  d / "patches.json"},
                 d / "patch.stamp"};
  return run_planned(plan, s.id, Stage::Patch, force, [&] {
    const NormalizedVolume mri = minmax_normalize(formats::read_nifti(plan.inputs[0]));
    const NormalizedVolume ct = minmax_normalize(formats::read_nifti(plan.inputs[1]));
    const Volume mask = formats::read_nifti(plan.inputs[2]);
    const std::size_t th = m.patch.target_height;
    const std::size_t tw = m.patch.target_width;
    const Volume mri_in = pad_or_crop(mri.volume, th, tw);
    const Volume ct_out = pad_or_crop(ct.volume, th, tw);
    const Volume boost = patch::make_boost_weights(pad_or_crop(mask, th, tw), m.lambda_boost);
    json index{{"mode", rec::to_string(m.patch.mode)},
               {"ranges", {{"mri", range_json(mri.range)}, {"ct", range_json(ct.range)}}},
               {"shape", {ct_out.shape().depth, ct_out.shape().height, ct_out.shape().width}}};
    if (m.patch.mode == rec::RecordMode::Patches3D) {
      const auto pairs = patch::extract_pairs(
          mri_in, ct_out, {m.patch.stride, m.patch.min_foreground_fraction});
      json anchors = json::array();
      for (const patch::PatchPair& p : pairs) anchors.push_back({p.anchor.z, p.anchor.y, p.anchor.x});
      index["stride"] = m.patch.stride;
      index["anchors"] = std::move(anchors);
    } else {
      index["slices"] = ct_out.shape().depth;
    }
    formats::write_nifti(mri_in, plan.outputs[0]);
    formats::write_nifti(ct_out, plan.outputs[1]);
    formats::write_nifti(boost, plan.outputs[2]);
    write_text(plan.outputs[3], index.dump(2) + "\n");
  });
}

StageOutcome stage_export(const Manifest& m, const SubjectEntry& s, bool force) {
  const fs::path d = subject_dir(m, s.id);
  StagePlan plan{"export",
                 {d / "mri_input.nii.gz", d / "ct_target.nii.gz", d / "patches.json"},
                 json{{"modality", s.modality}},
                 {records_path(m, s)},
                 d / "export.stamp"};
  return run_planned(plan, s.id, Stage::Export, force, [&] {
    const Volume mri = formats::read_nifti(plan.inputs[0]);
    const Volume ct = formats::read_nifti(plan.inputs[1]);
    const json index = read_json(plan.inputs[2]);
    const rec::RecordMode mode = rec::parse_record_mode(index.at("mode").get<std::string>());
    fs::create_directories(plan.outputs[0].parent_path());
    rec::RecordWriter w(plan.outputs[0]);
    w.write(rec::encode_example(rec::header_features({mode, s.id, s.modality})));
    const Shape3& sh = ct.shape();
    if (mode == rec::RecordMode::Slices2D) {
      const std::size_t plane = sh.height * sh.width;
      const std::vector<std::int64_t> slice_shape{std::int64_t(sh.height), std::int64_t(sh.width)};
      for (std::size_t z = 0; z < sh.depth; ++z) {
        rec::TrainingPair p;
        p.input.assign(mri.voxels().begin() + std::ptrdiff_t(z * plane),
                       mri.voxels().begin() + std::ptrdiff_t((z + 1) * plane));
        p.target.assign(ct.voxels().begin() + std::ptrdiff_t(z * plane),
                        ct.voxels().begin() + std::ptrdiff_t((z + 1) * plane));
        p.input_shape = slice_shape;
        p.target_shape = slice_shape;
        p.anchor = std::vector<std::int64_t>{std::int64_t(z)};
        w.write(rec::encode_example(rec::pair_features(p)));
      }
    } else {
      const std::int64_t in_edge = patch::kInputEdge;
      const std::int64_t out_edge = patch::kTargetEdge;
      for (const json& a : index.at("anchors")) {
        const patch::Index3 anchor{a.at(0).get<std::size_t>(), a.at(1).get<std::size_t>(),
                                   a.at(2).get<std::size_t>()};
        rec::TrainingPair p;
        p.input.resize(patch::kInputVoxels);
        p.target.resize(patch::kTargetVoxels);
        patch::copy_block(mri,
                          {anchor.z - patch::kMargin, anchor.y - patch::kMargin,
                           anchor.x - patch::kMargin},
                          patch::kInputEdge, p.input.data());
        patch::copy_block(ct, anchor, patch::kTargetEdge, p.target.data());
        p.input_shape = {in_edge, in_edge, in_edge};
        p.target_shape = {out_edge, out_edge, out_edge};
        p.anchor = std::vector<std::int64_t>{std::int64_t(anchor.z), std::int64_t(anchor.y),
                                             std::int64_t(anchor.x)};
        w.write(rec::encode_example(rec::pair_features(p)));
      }
    }
    w.close();
  });
}

StageOutcome stage_evaluate(const Manifest& m, bool force) {
  std::vector<const SubjectEntry*> scored;
  for (const SubjectEntry& s : m.subjects) {
    if (s.prediction) scored.push_back(&s);
  }
  if (scored.empty()) {
    spdlog::info("evaluate: no subject lists a prediction, nothing to do");
    return {"", Stage::Evaluate, true, {}};
  }
  StagePlan plan{"evaluate", {}, json::object(),
                 {m.output / "evaluation.json", m.output / "evaluation.txt"},
                 m.output / "evaluate.stamp"};
  for (const SubjectEntry* s : scored) {
    plan.inputs.push_back(*s->prediction);
    plan.inputs.push_back(subject_dir(m, s->id) / "ct_clean.nii.gz");
  }
  return run_planned(plan, "", Stage::Evaluate, force, [&] {
    std::vector<loss::VolumeMetrics> metrics;
    for (const SubjectEntry* s : scored) {
      const Volume pred = read_volume(*s->prediction);
      const Volume truth = formats::read_nifti(subject_dir(m, s->id) / "ct_clean.nii.gz");
      metrics.push_back(loss::measure(pred, truth, s->id));
    }
    const loss::EvalReport report = loss::summarize(std::move(metrics));
    write_text(plan.outputs[0], json(report).dump(2) + "\n");
    write_text(plan.outputs[1], loss::format_table(report));
  });
}

StageOutcome run_subject_stage(const Manifest& m, const SubjectEntry& s, Stage stage, bool force) {
  fs::create_directories(subject_dir(m, s.id));
  switch (stage) {
    case Stage::Convert: return stage_convert(m, s, force);
    case Stage::Register: return stage_register(m, s, force);
    case Stage::Clean: return stage_clean(m, s, force);
    case Stage::Patch: return stage_patch(m, s, force);
    case Stage::Export: return stage_export(m, s, force);
    case Stage::Evaluate: break;
  }
  fail(ErrorKind::InvariantBreach, "evaluate is not a per-subject stage");
}

[[noreturn]] void rethrow_with_context(const std::string& subject, Stage stage) {
  const std::string where = (subject.empty() ? std::string() : "subject " + subject + ", ") +
                            "stage " + to_string(stage) + ": ";
  try {
    throw;
  } catch (const Error& e) {
    fail(e.kind(), where + e.what());
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidArgument, where + e.what());
  } catch (const fs::filesystem_error& e) {
    fail(ErrorKind::Io, where + e.what());
  } catch (const std::bad_alloc&) {
    fail(ErrorKind::InvariantBreach, where + "out of memory");
  }
}

/// Runs `body(subject_index)` for every subject on up to `jobs` threads and
/// rethrows the failure of the lowest-numbered failing subject.
template <typename Body>
void for_each_subject(std::size_t count, std::size_t jobs, Body body) {
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(count, 1));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

fs::path subject_dir(const Manifest& m, const std::string& id) { return m.output / id; }

fs::path records_path(const Manifest& m, const SubjectEntry& s) {
  return m.output / "records" / (s.id + "-" + s.modality + ".tfrecord");
}

Volume read_volume(const fs::path& path) {
  const std::string name = path.filename().string();
  if (ends_with(name, ".mhd")) return formats::read_mhd(path);
  if (ends_with(name, ".nii") || ends_with(name, ".nii.gz")) return formats::read_nifti(path);
  fail(ErrorKind::InvalidArgument, "unrecognized volume extension: " + path.string());
}

std::vector<StageOutcome> run_stage(const Manifest& m, Stage stage, const RunOptions& options) {
  m.validate();
  fs::create_directories(m.output);
  if (stage == Stage::Evaluate) {
    try {
      return {stage_evaluate(m, options.force)};
    } catch (...) {
      rethrow_with_context("", stage);
    }
  }
  std::vector<StageOutcome> outcomes(m.subjects.size());
  for_each_subject(m.subjects.size(), options.jobs, [&](std::size_t i) {
    try {
      outcomes[i] = run_subject_stage(m, m.subjects[i], stage, options.force);
    } catch (...) {
      rethrow_with_context(m.subjects[i].id, stage);
    }
  });
  return outcomes;
}

std::vector<StageOutcome> run_all(const Manifest& m, const RunOptions& options) {
  m.validate();
  fs::create_directories(m.output);
  std::vector<std::vector<StageOutcome>> per_subject(m.subjects.size());
  for_each_subject(m.subjects.size(), options.jobs, [&](std::size_t i) {
    for (Stage stage : all_stages()) {
      if (stage == Stage::Evaluate) continue;
      try {
        per_subject[i].push_back(run_subject_stage(m, m.subjects[i], stage, options.force));
      } catch (...) {
        rethrow_with_context(m.subjects[i].id, stage);
      }
    }
  });
  std::vector<StageOutcome> out;
  for (auto& v : per_subject) out.insert(out.end(), v.begin(), v.end());
  try {
    out.push_back(stage_evaluate(m, options.force));
  } catch (...) {
    rethrow_with_context("", Stage::Evaluate);
  }
  return out;
}

}  // namespace voxelforge::pipeline
