#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "metricforge/depth_io.hpp"
#include "metricforge/errors.hpp"
#include "metricforge/runner.hpp"

#include "test_util.hpp"

using namespace metricforge;
using nlohmann::json;
using test::centered_camera;
using test::random_grid;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "metricforge_cli_test" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_text(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

json intrinsics_json(const CameraIntrinsics& cam) {
  return {{"fx", cam.fx}, {"fy", cam.fy}, {"cx", cam.cx},
          {"cy", cam.cy}, {"width", cam.width}, {"height", cam.height}};
}

// A small dataset with pred == gt for identity-style checks.
std::filesystem::path make_identity_manifest(const std::filesystem::path& dir, int samples) {
  json m;
  m["schema_version"] = 1;
  m["samples"] = json::array();
  for (int i = 0; i < samples; ++i) {
    const CameraIntrinsics cam = centered_camera(32, 24, 40.0);
    const DepthGrid g = random_grid(32, 24, 50 + i);
    const std::string name = "s" + std::to_string(i);
    write_depth(dir / (name + "_gt.pfm"), g);
    m["samples"].push_back({{"id", name},
                            {"gt_depth", name + "_gt.pfm"},
                            {"pred_depth", name + "_gt.pfm"},
                            {"prior_depth", name + "_gt.pfm"},
                            {"intrinsics", intrinsics_json(cam)}});
  }
  const auto path = dir / "manifest.json";
  write_text(path, m.dump(2));
  return path;
}

}  // namespace

TEST_CASE("load_manifest rejects malformed input") {
  const auto dir = fresh_dir("manifest_errors");
  const auto bad = dir / "bad.json";
  write_text(bad, "{ not json");
  CHECK_THROWS_WITH_AS(load_manifest(bad), doctest::Contains("ManifestParse"), Error);

  write_text(bad, R"({"schema_version": 1, "samples": [{"id": "a"}]})");
  CHECK_THROWS_AS(load_manifest(bad), Error);  // missing intrinsics

  write_text(bad, R"({"schema_version": 1, "samples": [
    {"id": "a", "gt_depth": "nope.pfm",
     "intrinsics": {"fx": 10, "fy": 10, "cx": 5, "cy": 5, "width": 10, "height": 10}}]})");
  CHECK_THROWS_WITH_AS(load_manifest(bad), doctest::Contains("does not resolve"), Error);

  write_text(bad, R"({"schema_version": 1, "samples": [
    {"id": "a",
     "intrinsics": {"fx": -1, "fy": 10, "cx": 5, "cy": 5, "width": 10, "height": 10}}]})");
  CHECK_THROWS_AS(load_manifest(bad), Error);

  CHECK_THROWS_AS(load_manifest(dir / "missing.json"), Error);
}

TEST_CASE("evaluate on identity predictions reports perfect aggregates") {
  const auto dir = fresh_dir("evaluate_identity");
  RunOptions opt;
  opt.command = "evaluate";
  opt.manifest_path = make_identity_manifest(dir, 3);
  opt.out_dir = dir / "out";
  opt.fixed_clock = true;
  const RunResult res = run_manifest(opt);
  CHECK(res.exit_code == kExitOk);
  const json report = json::parse(res.report_json);
  CHECK(report["failed_count"] == 0);
  CHECK(report["aggregate"]["abs_rel"] == 0.0);
  CHECK(report["aggregate"]["delta1"] == 100.0);
  CHECK(std::filesystem::exists(dir / "out" / "report.json"));
}

TEST_CASE("per-sample failures yield partial exit code and strict aborts") {
  const auto dir = fresh_dir("partial");
  json m;
  m["schema_version"] = 1;
  const CameraIntrinsics cam = centered_camera(16, 12, 20.0);
  const DepthGrid g = random_grid(16, 12, 3);
  write_depth(dir / "gt.pfm", g);
  m["samples"] = json::array();
  m["samples"].push_back({{"id", "ok"},
                          {"gt_depth", "gt.pfm"},
                          {"pred_depth", "gt.pfm"},
                          {"intrinsics", intrinsics_json(cam)}});
  m["samples"].push_back({{"id", "broken"},
                          {"gt_depth", "gt.pfm"},
                          {"intrinsics", intrinsics_json(cam)}});  // no pred_depth
  const auto path = dir / "manifest.json";
  write_text(path, m.dump(2));

  RunOptions opt;
  opt.command = "evaluate";
  opt.manifest_path = path;
  opt.out_dir = dir / "out";
  const RunResult res = run_manifest(opt);
  CHECK(res.exit_code == kExitPartial);
  const json report = json::parse(res.report_json);
  CHECK(report["failed_count"] == 1);
  CHECK(report["samples"][0]["status"] == "ok");
  CHECK(report["samples"][1]["status"] == "error");
  CHECK(report["samples"][1]["error"].get<std::string>().find("MissingInput") !=
        std::string::npos);

  opt.strict = true;
  opt.out_dir = dir / "out_strict";
  CHECK(run_manifest(opt).exit_code == kExitFatal);
}

TEST_CASE("reports are byte-identical across runs and job counts") {
  const auto dir = fresh_dir("determinism");
  const auto manifest = make_identity_manifest(dir, 4);

  RunOptions opt;
  opt.command = "evaluate";
  opt.manifest_path = manifest;
  opt.fixed_clock = true;
  opt.seed = 7;

  opt.out_dir = dir / "a";
  const std::string a = run_manifest(opt).report_json;
  opt.out_dir = dir / "b";
  const std::string b = run_manifest(opt).report_json;
  opt.out_dir = dir / "c";
  opt.jobs = 3;
  const std::string c = run_manifest(opt).report_json;
  CHECK(a == b);
  CHECK(a == c);
}

TEST_CASE("parallel workers do not perturb a many-sample report") {
  const auto dir = fresh_dir("parallel_stress");
  const auto manifest = make_identity_manifest(dir, 40);
  RunOptions opt;
  opt.command = "evaluate";
  opt.manifest_path = manifest;
  opt.fixed_clock = true;
  opt.seed = 3;
  opt.out_dir = dir / "serial";
  const std::string serial = run_manifest(opt).report_json;
  opt.jobs = 8;
  opt.out_dir = dir / "parallel";
  CHECK(run_manifest(opt).report_json == serial);
}

TEST_CASE("sample-prompt replays exactly for a fixed seed") {
  const auto dir = fresh_dir("prompt_replay");
  const auto manifest = make_identity_manifest(dir, 2);

  RunOptions opt;
  opt.command = "sample-prompt";
  opt.manifest_path = manifest;
  opt.fixed_clock = true;
  opt.seed = 99;
  opt.config.prompt_count = 37;

  opt.out_dir = dir / "a";
  REQUIRE(run_manifest(opt).exit_code == kExitOk);
  opt.out_dir = dir / "b";
  REQUIRE(run_manifest(opt).exit_code == kExitOk);

  for (const char* name : {"s0_prompt.txt", "s1_prompt.txt"}) {
    std::ifstream fa(dir / "a" / name), fb(dir / "b" / name);
    const std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    const std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    REQUIRE_FALSE(ca.empty());
    CHECK(ca == cb);
  }
  const SparsePrompt p = read_prompt(dir / "a" / "s0_prompt.txt");
  CHECK(p.size() == 37);
}

TEST_CASE("prepare with prior == gt reproduces the prior byte-for-byte") {
  const auto dir = fresh_dir("prepare_golden");
  const auto manifest = make_identity_manifest(dir, 1);

  RunOptions opt;
  opt.command = "prepare";
  opt.manifest_path = manifest;
  opt.out_dir = dir / "out";
  opt.seed = 5;
  opt.config.prompt_count = 50;
  REQUIRE(run_manifest(opt).exit_code == kExitOk);

  const auto read_bytes = [](const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  };
  const std::string prior = read_bytes(dir / "s0_gt.pfm");
  REQUIRE_FALSE(prior.empty());
  CHECK(read_bytes(dir / "out" / "s0_pdsa.pfm") == prior);
  CHECK(read_bytes(dir / "out" / "s0_gmdr.pfm") == prior);

  int mw = 0, mh = 0;
  const auto mask = read_mask_png16(dir / "out" / "s0_promptmask.png", mw, mh);
  std::size_t ones = 0;
  for (auto v : mask) ones += v;
  CHECK(ones == 50);
}

TEST_CASE("project and calib run end to end on a synthetic scene") {
  const auto dir = fresh_dir("project_calib");
  SceneSpec spec;
  spec.kind = SceneKind::BoxRoom;
  spec.cam = centered_camera(48, 36, 500.0);
  const SyntheticScene scene = make_synthetic_scene(1234, spec);

  write_cloud_xyz(dir / "cloud.xyz", scene.cloud);
  write_depth(dir / "gt.pfm", scene.analytic);
  json m;
  m["schema_version"] = 1;
  json pose;
  pose["rotation"] = json::array();
  for (int i = 0; i < 9; ++i) pose["rotation"].push_back(scene.pose.rotation.m[i]);
  pose["translation"] = {scene.pose.translation.x, scene.pose.translation.y,
                         scene.pose.translation.z};
  m["samples"] = json::array({{{"id", "scene"},
                               {"cloud", "cloud.xyz"},
                               {"gt_depth", "gt.pfm"},
                               {"intrinsics", intrinsics_json(scene.cam)},
                               {"pose", pose}}});
  write_text(dir / "manifest.json", m.dump(2));

  RunOptions opt;
  opt.command = "project";
  opt.manifest_path = dir / "manifest.json";
  opt.out_dir = dir / "out";
  const RunResult res = run_manifest(opt);
  REQUIRE(res.exit_code == kExitOk);
  const json report = json::parse(res.report_json);
  CHECK(report["aggregate"]["max_abs_diff_vs_gt"].get<double>() < 1e-6);

  RunOptions copt;
  copt.command = "calib";
  copt.manifest_path = dir / "manifest.json";
  copt.out_dir = dir / "out_calib";
  const json creport = json::parse(run_manifest(copt).report_json);
  REQUIRE(creport["failed_count"] == 0);
  CHECK(std::abs(creport["samples"][0]["focal"].get<double>() - 500.0) / 500.0 < 1e-6);
  CHECK(creport["aggregate"]["fov_error_deg_mean"].get<double>() < 1e-6);
}

TEST_CASE("loss and boundary commands report per-sample and aggregate values") {
  const auto dir = fresh_dir("loss_boundary");
  const auto manifest = make_identity_manifest(dir, 2);

  RunOptions opt;
  opt.command = "loss";
  opt.manifest_path = manifest;
  opt.out_dir = dir / "loss_out";
  const json lr = json::parse(run_manifest(opt).report_json);
  REQUIRE(lr["failed_count"] == 0);
  CHECK(lr["samples"][0]["teacher"]["value"] == 0.0);
  CHECK(lr["samples"][0]["student"]["value"] == 0.0);
  CHECK(lr["aggregate"]["teacher_value"] == 0.0);
  CHECK(lr["aggregate"]["student_value"] == 0.0);

  opt.command = "boundary";
  opt.out_dir = dir / "bnd_out";
  const json br = json::parse(run_manifest(opt).report_json);
  REQUIRE(br["failed_count"] == 0);
  REQUIRE(br["aggregate"]["thresholds"].size() == 5);  // default sweep 5..25
  for (const auto& rec : br["samples"][0]["thresholds"]) {
    // pred == gt: precision equals recall at every threshold.
    CHECK(rec["precision"] == rec["recall"]);
  }
}

TEST_CASE("gradcheck command runs without a manifest") {
  const auto dir = fresh_dir("gradcheck_cmd");
  RunOptions opt;
  opt.command = "gradcheck";
  opt.out_dir = dir;
  opt.config.gradcheck_width = 12;
  opt.config.gradcheck_height = 12;
  opt.config.gradcheck_seeds = 1;
  const RunResult res = run_manifest(opt);
  CHECK(res.exit_code == kExitOk);
  const json report = json::parse(res.report_json);
  CHECK(report["gradcheck"]["max_rel_err"].get<double>() < 1e-4);
}

TEST_CASE("load_config reads values on top of defaults") {
  const auto dir = fresh_dir("config_file");
  write_text(dir / "c.json",
             R"({"loss": {"gamma": 4.5}, "gmdr_floor": 0.01, "loss_synthetic": false})");
  const Config c = load_config(dir / "c.json");
  CHECK(c.loss.gamma == 4.5);
  CHECK(c.loss.alpha == 15.0);
  CHECK(c.gmdr_floor == 0.01);
  CHECK_FALSE(c.loss_synthetic);
  CHECK_THROWS_AS(load_config(dir / "missing.json"), Error);
}

TEST_CASE("config parsing enforces known keys and valid values") {
  CHECK_THROWS_WITH_AS(config_from_json(json{{"typo", 1}}),
                       doctest::Contains("unknown config key"), Error);
  CHECK_THROWS_AS(config_from_json(json{{"loss", {{"drop_fraction", 1.5}}}}), Error);
  CHECK_THROWS_AS(config_from_json(json{{"depth_format", "exr"}}), Error);

  const Config c = config_from_json(json{{"loss", {{"alpha", 2.0}}},
                                         {"prompt", {{"count", 123}}},
                                         {"boundary_thresholds", {7.5, 15.0}}});
  CHECK(c.loss.alpha == 2.0);
  CHECK(c.loss.beta == 5.0);  // default retained
  REQUIRE(c.prompt_count.has_value());
  CHECK(*c.prompt_count == 123);
  CHECK(c.boundary_thresholds == std::vector<double>{7.5, 15.0});

  // The echo matches what was resolved.
  const auto echo = config_to_json(c);
  CHECK(echo["loss"]["alpha"] == 2.0);
  CHECK(echo["prompt"]["count"] == 123);
}

TEST_CASE("project defaults to the identity pose when none is given") {
  const auto dir = fresh_dir("identity_pose");
  SceneSpec spec;
  spec.cam = centered_camera(24, 18, 30.0);
  spec.random_pose = false;  // cloud already in the camera frame
  const SyntheticScene scene = make_synthetic_scene(8, spec);
  write_cloud_xyz(dir / "cloud.xyz", scene.cloud);
  write_depth(dir / "gt.pfm", scene.analytic);
  json m;
  m["schema_version"] = 1;
  m["samples"] = json::array({{{"id", "s"},
                               {"cloud", "cloud.xyz"},
                               {"gt_depth", "gt.pfm"},
                               {"intrinsics", intrinsics_json(scene.cam)}}});
  write_text(dir / "manifest.json", m.dump(2));

  RunOptions opt;
  opt.command = "project";
  opt.manifest_path = dir / "manifest.json";
  opt.out_dir = dir / "out";
  const json report = json::parse(run_manifest(opt).report_json);
  REQUIRE(report["failed_count"] == 0);
  CHECK(report["aggregate"]["max_abs_diff_vs_gt"].get<double>() < 1e-9);
}

TEST_CASE("manifests with duplicate sample ids are rejected") {
  const auto dir = fresh_dir("dup_ids");
  json m;
  m["schema_version"] = 1;
  const CameraIntrinsics cam = centered_camera(8, 8, 10.0);
  m["samples"] = json::array({{{"id", "a"}, {"intrinsics", intrinsics_json(cam)}},
                              {{"id", "a"}, {"intrinsics", intrinsics_json(cam)}}});
  write_text(dir / "m.json", m.dump(2));
  CHECK_THROWS_WITH_AS(load_manifest(dir / "m.json"), doctest::Contains("duplicate sample id"),
                       Error);
}

TEST_CASE("unknown command is fatal") {
  RunOptions opt;
  opt.command = "frobnicate";
  CHECK_THROWS_AS(run_manifest(opt), Error);
}
