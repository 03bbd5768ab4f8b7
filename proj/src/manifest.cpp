#include "metricforge/manifest.hpp"

#include <fstream>
#include <set>
#include <string>

#include "json.hpp"

#include "metricforge/errors.hpp"

namespace metricforge {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& why) {
  raise(ErrorCode::ManifestParse, path.string() + ": " + why);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& rel,
                              const std::filesystem::path& manifest, const std::string& field) {
  std::filesystem::path p(rel);
  if (p.is_relative()) p = base / p;
  if (!std::filesystem::exists(p)) {
    fail(manifest, field + " path does not resolve: " + p.string());
  }
  return p;
}

CameraIntrinsics parse_intrinsics(const json& j, const std::filesystem::path& manifest,
                                  const std::string& id) {
  if (!j.is_object()) fail(manifest, "sample '" + id + "': intrinsics must be an object");
  CameraIntrinsics cam;
  try {
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
  } catch (const json::exception& e) {
    fail(manifest, "sample '" + id + "': " + e.what());
  }
  try {
    cam.validate();
  } catch (const Error& e) {
    fail(manifest, "sample '" + id + "': " + e.what());
  }
  return cam;
}

RigidTransform parse_pose(const json& j, const std::filesystem::path& manifest,
                          const std::string& id) {
  RigidTransform pose;
  try {
    const auto& r = j.at("rotation");
    const auto& t = j.at("translation");
    if (!r.is_array() || r.size() != 9 || !t.is_array() || t.size() != 3) {
      fail(manifest, "sample '" + id + "': pose needs rotation[9] and translation[3]");
    }
    for (int i = 0; i < 9; ++i) pose.rotation.m[i] = r[i].get<double>();
    pose.translation = {t[0].get<double>(), t[1].get<double>(), t[2].get<double>()};
  } catch (const json::exception& e) {
    fail(manifest, "sample '" + id + "': " + e.what());
  }
  try {
    pose.validate();
  } catch (const Error& e) {
    fail(manifest, "sample '" + id + "': " + e.what());
  }
  return pose;
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(path, e.what());
  }
  if (!j.is_object()) fail(path, "top level must be an object");

  Manifest m;
  m.schema_version = j.value("schema_version", 1);
  if (m.schema_version != 1) {
    fail(path, "unsupported schema_version " + std::to_string(m.schema_version));
  }
  if (!j.contains("samples") || !j["samples"].is_array()) {
    fail(path, "missing samples array");
  }

  const std::filesystem::path base = path.has_parent_path() ? path.parent_path() : ".";
  std::set<std::string> ids;
  std::size_t index = 0;
  for (const json& js : j["samples"]) {
    if (!js.is_object()) fail(path, "sample " + std::to_string(index) + " must be an object");
    SampleRecord s;
    s.id = js.value("id", "sample" + std::to_string(index));
    if (!ids.insert(s.id).second) {
      fail(path, "duplicate sample id '" + s.id + "'");
    }
    if (!js.contains("intrinsics")) {
      fail(path, "sample '" + s.id + "': intrinsics are required");
    }
    s.intrinsics = parse_intrinsics(js["intrinsics"], path, s.id);
    if (js.contains("pose")) s.pose = parse_pose(js["pose"], path, s.id);

    const auto opt_path = [&](const char* key) -> std::filesystem::path {
      if (!js.contains(key) || js[key].is_null()) return {};
      return resolve(base, js[key].get<std::string>(), path, std::string(key));
    };
    s.image = opt_path("image");
    s.gt_depth = opt_path("gt_depth");
    s.pred_depth = opt_path("pred_depth");
    s.prior_depth = opt_path("prior_depth");
    s.prompt = opt_path("prompt");
    s.cloud = opt_path("cloud");

    m.samples.push_back(std::move(s));
    ++index;
  }
  return m;
}

}  // namespace metricforge
