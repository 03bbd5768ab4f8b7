#include "metricforge/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "metricforge/alignment.hpp"
#include "metricforge/calibration.hpp"
#include "metricforge/depth_io.hpp"
#include "metricforge/errors.hpp"
#include "metricforge/losses.hpp"
#include "metricforge/metrics.hpp"
#include "metricforge/prompting.hpp"
#include "metricforge/rng.hpp"

namespace metricforge {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// logging, controlled by METRICFORGE_LOG (off|error|info|debug)

enum class LogLevel { Off = 0, Error = 1, Info = 2, Debug = 3 };

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("METRICFORGE_LOG");
    if (!env) return LogLevel::Error;
    const std::string v(env);
    if (v == "off") return LogLevel::Off;
    if (v == "error") return LogLevel::Error;
    if (v == "info") return LogLevel::Info;
    if (v == "debug") return LogLevel::Debug;
    return LogLevel::Error;
  }();
  return level;
}

std::mutex log_mutex;

void log_at(LogLevel lvl, const std::string& msg) {
  if (log_level() < lvl) return;
  std::lock_guard<std::mutex> lock(log_mutex);
  std::cerr << "[metricforge] " << msg << "\n";
}

// ---------------------------------------------------------------------------
// config

const std::set<std::string>& known_commands() {
  static const std::set<std::string> cmds{"project", "sample-prompt", "prepare", "loss",
                                          "evaluate", "boundary", "calib", "gradcheck"};
  return cmds;
}

}  // namespace

Config config_from_json(const json& j) {
  Config c;
  if (!j.is_object()) {
    raise(ErrorCode::InvalidArgument, "config must be a JSON object");
  }
  static const std::set<std::string> known{
      "loss",        "boundary_thresholds", "prompt",        "pdsa_k",
      "gmdr_floor",  "calib",               "loss_synthetic", "gradcheck",
      "depth_format"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) {
      raise(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
    }
  }
  try {
    if (j.contains("loss")) {
      const json& l = j["loss"];
      static const std::set<std::string> loss_keys{"alpha",         "beta",        "gamma",
                                                   "delta",         "drop_fraction", "scale_count",
                                                   "balance_c",     "mad_epsilon"};
      for (const auto& [key, value] : l.items()) {
        if (!loss_keys.count(key)) {
          raise(ErrorCode::InvalidArgument, "unknown config key 'loss." + key + "'");
        }
      }
      c.loss.alpha = l.value("alpha", c.loss.alpha);
      c.loss.beta = l.value("beta", c.loss.beta);
      c.loss.gamma = l.value("gamma", c.loss.gamma);
      c.loss.delta = l.value("delta", c.loss.delta);
      c.loss.drop_fraction = l.value("drop_fraction", c.loss.drop_fraction);
      c.loss.scale_count = l.value("scale_count", c.loss.scale_count);
      c.loss.balance_c = l.value("balance_c", c.loss.balance_c);
      c.loss.mad_epsilon = l.value("mad_epsilon", c.loss.mad_epsilon);
    }
    if (j.contains("boundary_thresholds")) {
      c.boundary_thresholds = j["boundary_thresholds"].get<std::vector<double>>();
    }
    if (j.contains("prompt")) {
      const json& p = j["prompt"];
      if (p.contains("count") && !p["count"].is_null()) {
        c.prompt_count = p["count"].get<std::size_t>();
      }
      c.prompt_band_min = p.value("band_min", c.prompt_band_min);
      c.prompt_band_max = p.value("band_max", c.prompt_band_max);
    }
    c.pdsa_k = j.value("pdsa_k", c.pdsa_k);
    c.gmdr_floor = j.value("gmdr_floor", c.gmdr_floor);
    if (j.contains("calib")) {
      c.calib_max_iters = j["calib"].value("max_iters", c.calib_max_iters);
      c.calib_tol = j["calib"].value("tol", c.calib_tol);
    }
    c.loss_synthetic = j.value("loss_synthetic", c.loss_synthetic);
    if (j.contains("gradcheck")) {
      c.gradcheck_width = j["gradcheck"].value("width", c.gradcheck_width);
      c.gradcheck_height = j["gradcheck"].value("height", c.gradcheck_height);
      c.gradcheck_seeds = j["gradcheck"].value("seeds", c.gradcheck_seeds);
    }
    c.depth_format = j.value("depth_format", c.depth_format);
  } catch (const json::exception& e) {
    raise(ErrorCode::InvalidArgument, std::string("bad config value: ") + e.what());
  }

  c.loss.validate();
  if (c.boundary_thresholds.empty()) {
    raise(ErrorCode::InvalidArgument, "boundary_thresholds must be nonempty");
  }
  if (c.prompt_band_min < 1 || c.prompt_band_max < c.prompt_band_min) {
    raise(ErrorCode::InvalidArgument, "prompt band must satisfy 1 <= band_min <= band_max");
  }
  if (c.pdsa_k < 1) {
    raise(ErrorCode::InvalidArgument, "pdsa_k must be >= 1");
  }
  if (!(c.gmdr_floor > 0.0)) {
    raise(ErrorCode::InvalidArgument, "gmdr_floor must be > 0");
  }
  if (c.gradcheck_width < 1 || c.gradcheck_height < 1 || c.gradcheck_seeds < 1) {
    raise(ErrorCode::InvalidArgument, "gradcheck shape/seeds must be positive");
  }
  if (c.depth_format != "pfm" && c.depth_format != "png" && c.depth_format != "raw") {
    raise(ErrorCode::InvalidArgument, "depth_format must be pfm, png or raw");
  }
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    raise(ErrorCode::InvalidArgument, "cannot open config " + path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    raise(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

ordered_json config_to_json(const Config& c) {
  ordered_json j;
  j["loss"] = {{"alpha", c.loss.alpha},
               {"beta", c.loss.beta},
               {"gamma", c.loss.gamma},
               {"delta", c.loss.delta},
               {"drop_fraction", c.loss.drop_fraction},
               {"scale_count", c.loss.scale_count},
               {"balance_c", c.loss.balance_c},
               {"mad_epsilon", c.loss.mad_epsilon}};
  j["boundary_thresholds"] = c.boundary_thresholds;
  j["prompt"] = ordered_json::object();
  if (c.prompt_count) {
    j["prompt"]["count"] = *c.prompt_count;
  } else {
    j["prompt"]["count"] = nullptr;
  }
  j["prompt"]["band_min"] = c.prompt_band_min;
  j["prompt"]["band_max"] = c.prompt_band_max;
  j["pdsa_k"] = c.pdsa_k;
  j["gmdr_floor"] = c.gmdr_floor;
  j["calib"] = {{"max_iters", c.calib_max_iters}, {"tol", c.calib_tol}};
  j["loss_synthetic"] = c.loss_synthetic;
  j["gradcheck"] = {{"width", c.gradcheck_width},
                    {"height", c.gradcheck_height},
                    {"seeds", c.gradcheck_seeds}};
  j["depth_format"] = c.depth_format;
  return j;
}

namespace {

// ---------------------------------------------------------------------------
// per-sample work

struct SampleOutcome {
  bool ok = false;
  std::string error;
  ordered_json payload;
  // Typed hooks for aggregate assembly.
  std::optional<MetricsReport> metrics;
  std::optional<BoundaryReport> boundary;
  std::optional<double> fov_error;
  double teacher_value = 0.0;
  double student_value = 0.0;
  std::int64_t pixels = 0;
  std::int64_t prompt_count = 0;
  double project_max_diff = -1.0;
};

void require_input(const SampleRecord& s, const std::filesystem::path& p, const char* what) {
  if (p.empty()) {
    raise(ErrorCode::MissingInput, "sample '" + s.id + "' is missing " + std::string(what));
  }
}

double grad_l2(const ValueMap& g) {
  double s = 0.0;
  for (double v : g.values) s += v * v;
  return std::sqrt(s);
}

SampleOutcome run_project(const SampleRecord& s, const RunOptions& opt) {
  require_input(s, s.cloud, "cloud");
  const PointCloud cloud = read_cloud_xyz(s.cloud);
  const RigidTransform pose = s.pose.value_or(RigidTransform::identity());
  const DepthGrid projected = project_points(cloud, pose, s.intrinsics);

  const std::string out_name = s.id + "_projected." + opt.config.depth_format;
  write_depth(opt.out_dir / out_name, projected);

  SampleOutcome out;
  out.ok = true;
  out.pixels = static_cast<std::int64_t>(projected.valid_count());
  out.payload["output"] = out_name;
  out.payload["points"] = cloud.points.size();
  out.payload["valid_pixels"] = out.pixels;
  if (!s.gt_depth.empty()) {
    const DepthGrid gt = read_depth(s.gt_depth);
    if (gt.width == projected.width && gt.height == projected.height) {
      double max_diff = 0.0;
      std::int64_t both = 0;
      for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt.mask[i] & projected.mask[i]) {
          max_diff = std::max(max_diff, std::abs(gt.depth[i] - projected.depth[i]));
          ++both;
        }
      }
      out.project_max_diff = max_diff;
      out.payload["gt_overlap_pixels"] = both;
      out.payload["max_abs_diff_vs_gt"] = max_diff;
    }
  }
  return out;
}

SampleOutcome run_sample_prompt(const SampleRecord& s, const RunOptions& opt,
                                std::uint64_t sample_seed) {
  require_input(s, s.gt_depth, "gt_depth");
  const DepthGrid gt = read_depth(s.gt_depth);

  Rng rng(derive_seed(sample_seed, 0x70726f6d70ULL));
  std::size_t n;
  if (opt.config.prompt_count) {
    n = *opt.config.prompt_count;
  } else {
    n = opt.config.prompt_band_min +
        static_cast<std::size_t>(rng.uniform_index(
            opt.config.prompt_band_max - opt.config.prompt_band_min + 1));
  }
  const SparsePrompt prompt = sample_prompt(gt, n, sample_seed);

  const std::string out_name = s.id + "_prompt.txt";
  write_prompt(opt.out_dir / out_name, prompt);

  SampleOutcome out;
  out.ok = true;
  out.prompt_count = static_cast<std::int64_t>(prompt.size());
  out.payload["output"] = out_name;
  out.payload["requested"] = n;
  out.payload["count"] = prompt.size();
  return out;
}

SampleOutcome run_prepare(const SampleRecord& s, const RunOptions& opt,
                          std::uint64_t sample_seed) {
  require_input(s, s.prior_depth, "prior_depth");
  const DepthGrid prior = read_depth(s.prior_depth);

  SparsePrompt prompt;
  if (!s.prompt.empty()) {
    prompt = read_prompt(s.prompt);
  } else if (!s.gt_depth.empty()) {
    const DepthGrid gt = read_depth(s.gt_depth);
    Rng rng(derive_seed(sample_seed, 0x70726f6d70ULL));
    const std::size_t n =
        opt.config.prompt_count
            ? *opt.config.prompt_count
            : opt.config.prompt_band_min +
                  static_cast<std::size_t>(rng.uniform_index(
                      opt.config.prompt_band_max - opt.config.prompt_band_min + 1));
    prompt = sample_prompt(gt, n, sample_seed);
  } else {
    raise(ErrorCode::MissingInput, "sample '" + s.id + "' needs a prompt file or gt_depth");
  }

  const AffineFit fit = lsq_scale_shift(prior, prompt);
  const PreparedPrompt prepared =
      prepare_prompt(prompt, prior, opt.config.pdsa_k, opt.config.gmdr_floor);

  const std::string pdsa_name = s.id + "_pdsa." + opt.config.depth_format;
  const std::string gmdr_name = s.id + "_gmdr." + opt.config.depth_format;
  const std::string mask_name = s.id + "_promptmask.png";
  DepthGrid chan(prepared.width, prepared.height);
  chan.mask = prior.mask;
  chan.depth = prepared.pdsa_channel;
  write_depth(opt.out_dir / pdsa_name, chan);
  chan.depth = prepared.gmdr_channel;
  write_depth(opt.out_dir / gmdr_name, chan);
  write_mask_png16(opt.out_dir / mask_name, prepared.width, prepared.height,
                   prepared.mask_channel);

  SampleOutcome out;
  out.ok = true;
  out.prompt_count = static_cast<std::int64_t>(prompt.size());
  out.pixels = static_cast<std::int64_t>(prior.valid_count());
  out.payload["outputs"] = {{"pdsa", pdsa_name}, {"gmdr", gmdr_name}, {"mask", mask_name}};
  out.payload["prompt_count"] = prompt.size();
  out.payload["gmdr_scale"] = fit.scale;
  out.payload["gmdr_shift"] = fit.shift;
  out.payload["gmdr_residual_rms"] = fit.residual_rms;
  return out;
}

SampleOutcome run_loss(const SampleRecord& s, const RunOptions& opt) {
  require_input(s, s.pred_depth, "pred_depth");
  require_input(s, s.gt_depth, "gt_depth");
  const DepthGrid pred = read_depth(s.pred_depth);
  const DepthGrid gt = read_depth(s.gt_depth);

  const LossReport teacher = teacher_loss(pred, gt, opt.config.loss, opt.config.loss_synthetic);
  const LossReport student = student_loss(pred, gt, opt.config.loss);

  std::int64_t joint = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) joint += pred.mask[i] & gt.mask[i];

  SampleOutcome out;
  out.ok = true;
  out.pixels = joint;
  out.teacher_value = teacher.value;
  out.student_value = student.value;
  out.payload["pixels"] = joint;
  out.payload["teacher"] = {{"value", teacher.value},
                            {"synthetic", opt.config.loss_synthetic},
                            {"gradient_l2", grad_l2(teacher.gradient)}};
  out.payload["student"] = {{"value", student.value},
                            {"gradient_l2", grad_l2(student.gradient)}};
  return out;
}

SampleOutcome run_evaluate(const SampleRecord& s, const RunOptions&) {
  require_input(s, s.pred_depth, "pred_depth");
  require_input(s, s.gt_depth, "gt_depth");
  const DepthGrid pred = read_depth(s.pred_depth);
  const DepthGrid gt = read_depth(s.gt_depth);
  const MetricsReport m = depth_metrics(pred, gt);

  SampleOutcome out;
  out.ok = true;
  out.metrics = m;
  out.pixels = m.pixel_count;
  out.payload["abs_rel"] = m.abs_rel;
  out.payload["rmse"] = m.rmse;
  out.payload["mae"] = m.mae;
  out.payload["log10"] = m.log10;
  out.payload["delta1"] = m.delta1;
  out.payload["delta2"] = m.delta2;
  out.payload["delta3"] = m.delta3;
  out.payload["pixels"] = m.pixel_count;
  return out;
}

ordered_json boundary_to_json(const BoundaryReport& b) {
  ordered_json records = ordered_json::array();
  for (const BoundaryRecord& r : b.records) {
    records.push_back({{"t", r.threshold_percent},
                       {"precision", r.precision},
                       {"recall", r.recall},
                       {"f1", r.f1},
                       {"gt_contours", r.gt_contours},
                       {"pred_contours", r.pred_contours},
                       {"matched", r.matched}});
  }
  return {{"thresholds", records}, {"mean_f1", b.mean_f1}};
}

SampleOutcome run_boundary(const SampleRecord& s, const RunOptions& opt) {
  require_input(s, s.pred_depth, "pred_depth");
  require_input(s, s.gt_depth, "gt_depth");
  const DepthGrid pred = read_depth(s.pred_depth);
  const DepthGrid gt = read_depth(s.gt_depth);
  const BoundaryReport b = boundary_f1(pred, gt, opt.config.boundary_thresholds);

  SampleOutcome out;
  out.ok = true;
  out.boundary = b;
  out.payload = boundary_to_json(b);
  return out;
}

SampleOutcome run_calib(const SampleRecord& s, const RunOptions& opt) {
  // Calibrates the prediction when present, otherwise the ground truth.
  const std::filesystem::path& depth_path = !s.pred_depth.empty() ? s.pred_depth : s.gt_depth;
  if (depth_path.empty()) {
    raise(ErrorCode::MissingInput, "sample '" + s.id + "' needs pred_depth or gt_depth");
  }
  const DepthGrid depth = read_depth(depth_path);
  const PointMap pmap = unproject_depth(depth, s.intrinsics);
  const FocalEstimate est =
      estimate_focal(pmap, opt.config.calib_max_iters, opt.config.calib_tol);
  const double fov_err = fov_error_deg(est.focal, s.intrinsics.fx, s.intrinsics.width);

  SampleOutcome out;
  out.ok = true;
  out.fov_error = fov_err;
  out.pixels = static_cast<std::int64_t>(pmap.valid_count());
  out.payload["focal"] = est.focal;
  out.payload["iterations"] = est.iterations;
  out.payload["converged"] = est.converged;
  out.payload["final_objective"] = est.final_objective;
  out.payload["gt_focal"] = s.intrinsics.fx;
  out.payload["fov_error_deg"] = fov_err;
  return out;
}

SampleOutcome run_one(const SampleRecord& s, const RunOptions& opt, std::uint64_t sample_seed) {
  if (opt.command == "project") return run_project(s, opt);
  if (opt.command == "sample-prompt") return run_sample_prompt(s, opt, sample_seed);
  if (opt.command == "prepare") return run_prepare(s, opt, sample_seed);
  if (opt.command == "loss") return run_loss(s, opt);
  if (opt.command == "evaluate") return run_evaluate(s, opt);
  if (opt.command == "boundary") return run_boundary(s, opt);
  if (opt.command == "calib") return run_calib(s, opt);
  raise(ErrorCode::InvalidArgument, "unknown command '" + opt.command + "'");
}

ordered_json gradcheck_report(const RunOptions& opt) {
  ordered_json per_loss = ordered_json::array();
  double overall = 0.0;
  for (const std::string& name : gradcheck_loss_names()) {
    double worst = 0.0;
    int checked = 0, skipped = 0;
    for (int i = 0; i < opt.config.gradcheck_seeds; ++i) {
      const GradcheckResult r =
          gradcheck(name, opt.config.gradcheck_width, opt.config.gradcheck_height,
                    derive_seed(opt.seed, static_cast<std::uint64_t>(i)), opt.config.loss);
      worst = std::max(worst, r.max_rel_err);
      checked += r.checked;
      skipped += r.skipped;
    }
    overall = std::max(overall, worst);
    per_loss.push_back({{"loss", name},
                        {"max_rel_err", worst},
                        {"checked", checked},
                        {"skipped", skipped},
                        {"seeds", opt.config.gradcheck_seeds}});
    log_at(LogLevel::Info, "gradcheck " + name + ": max_rel_err " + std::to_string(worst));
  }
  return {{"losses", per_loss}, {"max_rel_err", overall}};
}

// Aggregation is an ordered merge over sample indices; parallel workers only
// fill their own slots.
ordered_json build_aggregate(const RunOptions& opt, const std::vector<SampleOutcome>& outcomes) {
  ordered_json agg;
  std::vector<MetricsReport> metrics;
  std::vector<BoundaryReport> boundaries;
  std::vector<double> fov_errors;
  double teacher_w = 0.0, student_w = 0.0, wsum = 0.0;
  std::int64_t prompts = 0, pixels = 0;
  double project_max = -1.0;
  std::int64_t ok_count = 0;

  for (const SampleOutcome& o : outcomes) {
    if (!o.ok) continue;
    ++ok_count;
    if (o.metrics) metrics.push_back(*o.metrics);
    if (o.boundary) boundaries.push_back(*o.boundary);
    if (o.fov_error) fov_errors.push_back(*o.fov_error);
    const double w = static_cast<double>(o.pixels);
    teacher_w += w * o.teacher_value;
    student_w += w * o.student_value;
    wsum += w;
    prompts += o.prompt_count;
    pixels += o.pixels;
    project_max = std::max(project_max, o.project_max_diff);
  }
  agg["samples_ok"] = ok_count;

  if (opt.command == "evaluate" && !metrics.empty()) {
    const MetricsReport m = merge_metrics(metrics);
    agg["abs_rel"] = m.abs_rel;
    agg["rmse"] = m.rmse;
    agg["mae"] = m.mae;
    agg["log10"] = m.log10;
    agg["delta1"] = m.delta1;
    agg["delta2"] = m.delta2;
    agg["delta3"] = m.delta3;
    agg["pixels"] = m.pixel_count;
  } else if (opt.command == "boundary" && !boundaries.empty()) {
    agg.update(boundary_to_json(merge_boundary(boundaries)));
  } else if (opt.command == "calib" && !fov_errors.empty()) {
    std::vector<double> sorted = fov_errors;
    std::sort(sorted.begin(), sorted.end());
    double mean = 0.0;
    for (double v : sorted) mean += v;
    mean /= static_cast<double>(sorted.size());
    const std::size_t mid = sorted.size() / 2;
    const double median = sorted.size() % 2 == 1
                              ? sorted[mid]
                              : 0.5 * (sorted[mid - 1] + sorted[mid]);
    agg["fov_error_deg_mean"] = mean;
    agg["fov_error_deg_median"] = median;
  } else if (opt.command == "loss" && wsum > 0.0) {
    agg["teacher_value"] = teacher_w / wsum;
    agg["student_value"] = student_w / wsum;
    agg["pixels"] = pixels;
  } else if (opt.command == "sample-prompt" || opt.command == "prepare") {
    agg["prompt_points"] = prompts;
  } else if (opt.command == "project") {
    agg["valid_pixels"] = pixels;
    if (project_max >= 0.0) agg["max_abs_diff_vs_gt"] = project_max;
  }
  return agg;
}

}  // namespace

RunResult run_manifest(const RunOptions& opt) {
  const auto t_start = std::chrono::steady_clock::now();
  RunResult result;

  ordered_json report;
  report["schema_version"] = kReportSchemaVersion;
  report["tool"] = kToolName;
  report["version"] = kToolVersion;
  report["command"] = opt.command;
  report["seed"] = opt.seed;
  report["strict"] = opt.strict;
  report["config"] = config_to_json(opt.config);

  const auto finalize = [&](int exit_code) {
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    report["duration_seconds"] = opt.fixed_clock ? 0.0 : elapsed;
    report["exit_code"] = exit_code;
    result.exit_code = exit_code;
    result.report_json = report.dump(2) + "\n";

    std::error_code ec;
    std::filesystem::create_directories(opt.out_dir, ec);
    const std::filesystem::path report_path = opt.out_dir / "report.json";
    std::ofstream out(report_path);
    if (!out) {
      raise(ErrorCode::WriteFailure, "cannot write " + report_path.string());
    }
    out << result.report_json;
    return result;
  };

  if (!known_commands().count(opt.command)) {
    raise(ErrorCode::InvalidArgument, "unknown command '" + opt.command + "'");
  }
  opt.config.loss.validate();

  if (opt.command == "gradcheck") {
    report["gradcheck"] = gradcheck_report(opt);
    report["samples"] = ordered_json::array();
    report["failed_count"] = 0;
    return finalize(kExitOk);
  }

  if (opt.manifest_path.empty()) {
    raise(ErrorCode::MissingInput, "command '" + opt.command + "' requires --manifest");
  }
  const Manifest manifest = load_manifest(opt.manifest_path);
  report["manifest"] = opt.manifest_path.string();
  report["sample_count"] = manifest.samples.size();

  std::error_code ec;
  std::filesystem::create_directories(opt.out_dir, ec);

  std::vector<SampleOutcome> outcomes(manifest.samples.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};

  const int jobs = std::max(1, opt.jobs);
  const auto worker = [&]() {
    while (!stop.load(std::memory_order_relaxed)) {
      const std::size_t i = next.fetch_add(1);
      if (i >= manifest.samples.size()) break;
      const SampleRecord& s = manifest.samples[i];
      SampleOutcome& slot = outcomes[i];
      try {
        slot = run_one(s, opt, derive_seed(opt.seed, i));
        log_at(LogLevel::Debug, "sample '" + s.id + "' ok");
      } catch (const Error& e) {
        slot.ok = false;
        slot.error = e.what();
        log_at(LogLevel::Error, "sample '" + s.id + "' failed: " + e.what());
        if (opt.strict) stop.store(true, std::memory_order_relaxed);
      } catch (const std::exception& e) {
        slot.ok = false;
        slot.error = e.what();
        log_at(LogLevel::Error, "sample '" + s.id + "' failed: " + e.what());
        if (opt.strict) stop.store(true, std::memory_order_relaxed);
      }
    }
  };

  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  std::size_t failed = 0;
  ordered_json samples = ordered_json::array();
  for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
    ordered_json js;
    js["id"] = manifest.samples[i].id;
    if (outcomes[i].ok) {
      js["status"] = "ok";
      js.update(outcomes[i].payload);
    } else {
      js["status"] = "error";
      js["error"] = outcomes[i].error.empty() ? std::string("not processed (strict abort)")
                                              : outcomes[i].error;
      ++failed;
    }
    samples.push_back(std::move(js));
  }
  report["samples"] = std::move(samples);
  report["failed_count"] = failed;
  report["aggregate"] = build_aggregate(opt, outcomes);

  if (failed > 0 && opt.strict) return finalize(kExitFatal);
  return finalize(failed > 0 ? kExitPartial : kExitOk);
}

}  // namespace metricforge
