#include <cstdint>
#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "metricforge/errors.hpp"
#include "metricforge/runner.hpp"

namespace {

using metricforge::Config;
using metricforge::RunOptions;

void print_summary(const nlohmann::json& report) {
  const std::string command = report.value("command", "");
  std::printf("%s %s: command '%s'\n", metricforge::kToolName, metricforge::kToolVersion,
              command.c_str());
  if (report.contains("sample_count")) {
    std::printf("  samples: %zu  failed: %zu\n",
                report["sample_count"].get<std::size_t>(),
                report["failed_count"].get<std::size_t>());
  }
  if (report.contains("aggregate")) {
    const auto& agg = report["aggregate"];
    if (agg.contains("abs_rel")) {
      std::printf("  abs_rel %.6f  rmse %.4f m  mae %.4f m  log10 %.6f\n",
                  agg["abs_rel"].get<double>(), agg["rmse"].get<double>(),
                  agg["mae"].get<double>(), agg["log10"].get<double>());
      std::printf("  delta1 %.2f%%  delta2 %.2f%%  delta3 %.2f%%  (%lld px)\n",
                  agg["delta1"].get<double>(), agg["delta2"].get<double>(),
                  agg["delta3"].get<double>(),
                  static_cast<long long>(agg["pixels"].get<std::int64_t>()));
    }
    if (agg.contains("mean_f1")) {
      std::printf("  boundary mean F1 %.4f\n", agg["mean_f1"].get<double>());
    }
    if (agg.contains("fov_error_deg_mean")) {
      std::printf("  FOV error: mean %.4f deg, median %.4f deg\n",
                  agg["fov_error_deg_mean"].get<double>(),
                  agg["fov_error_deg_median"].get<double>());
    }
    if (agg.contains("teacher_value")) {
      std::printf("  teacher %.6f  student %.6f\n", agg["teacher_value"].get<double>(),
                  agg["student_value"].get<double>());
    }
  }
  if (report.contains("gradcheck")) {
    for (const auto& entry : report["gradcheck"]["losses"]) {
      std::printf("  gradcheck %-18s max_rel_err %.3e  (checked %d, skipped %d)\n",
                  entry["loss"].get<std::string>().c_str(),
                  entry["max_rel_err"].get<double>(), entry["checked"].get<int>(),
                  entry["skipped"].get<int>());
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metric depth toolkit: projection, prompts, losses, evaluation, calibration"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string manifest;
  std::string config_path;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool strict = false;
  bool fixed_clock = false;
  std::string out_dir = ".";

  app.add_option("--manifest", manifest, "dataset manifest (JSON)");
  app.add_option("--config", config_path, "configuration file (JSON)");
  app.add_option("--seed", seed, "random seed")->default_val(0);
  app.add_option("--jobs", jobs, "parallel sample workers")->default_val(1);
  app.add_flag("--strict", strict, "abort the batch on the first sample failure");
  app.add_flag("--fixed-clock", fixed_clock, "zero wall-clock fields for byte-stable reports");
  app.add_option("--out", out_dir, "output directory")->default_val(".");

  // Command-specific overrides (flags beat the config file).
  std::size_t prompt_count = 0;
  std::vector<double> thresholds;
  bool synthetic = false;
  bool real = false;
  int gc_width = 0, gc_height = 0, gc_seeds = 0;

  app.add_subcommand("project", "project point clouds to depth maps");
  CLI::App* cmd_sample = app.add_subcommand("sample-prompt", "sample sparse metric prompts");
  CLI::App* cmd_prepare = app.add_subcommand("prepare", "build three-channel prompt inputs");
  CLI::App* cmd_loss = app.add_subcommand("loss", "teacher/student training objectives");
  app.add_subcommand("evaluate", "depth accuracy metrics");
  CLI::App* cmd_boundary = app.add_subcommand("boundary", "occluding-contour F1");
  app.add_subcommand("calib", "focal recovery from point maps");
  CLI::App* cmd_gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");

  auto* opt_count_s = cmd_sample->add_option("--prompt-count", prompt_count,
                                             "fixed prompt size instead of the random band");
  auto* opt_count_p = cmd_prepare->add_option("--prompt-count", prompt_count,
                                              "fixed prompt size instead of the random band");
  auto* opt_thresh = cmd_boundary->add_option("--thresholds", thresholds,
                                              "boundary threshold sweep, percent");
  auto* opt_synth = cmd_loss->add_flag("--synthetic", synthetic, "apply the SSI-MAGE term");
  auto* opt_real = cmd_loss->add_flag("--real", real, "robust MAE only");
  auto* opt_gc_w = cmd_gradcheck->add_option("--width", gc_width, "instance width");
  auto* opt_gc_h = cmd_gradcheck->add_option("--height", gc_height, "instance height");
  auto* opt_gc_n = cmd_gradcheck->add_option("--seeds", gc_seeds, "instances per loss");

  CLI11_PARSE(app, argc, argv);

  try {
    RunOptions options;
    options.command = app.get_subcommands().front()->get_name();
    options.manifest_path = manifest;
    options.seed = seed;
    options.jobs = jobs;
    options.strict = strict;
    options.fixed_clock = fixed_clock;
    options.out_dir = out_dir;

    options.config = config_path.empty() ? Config{} : metricforge::load_config(config_path);
    if (opt_count_s->count() > 0 || opt_count_p->count() > 0) {
      options.config.prompt_count = prompt_count;
    }
    if (opt_thresh->count() > 0) options.config.boundary_thresholds = thresholds;
    if (opt_synth->count() > 0) options.config.loss_synthetic = true;
    if (opt_real->count() > 0) options.config.loss_synthetic = false;
    if (opt_gc_w->count() > 0) options.config.gradcheck_width = gc_width;
    if (opt_gc_h->count() > 0) options.config.gradcheck_height = gc_height;
    if (opt_gc_n->count() > 0) options.config.gradcheck_seeds = gc_seeds;

    const metricforge::RunResult result = metricforge::run_manifest(options);
    print_summary(nlohmann::json::parse(result.report_json));
    return result.exit_code;
  } catch (const metricforge::Error& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return metricforge::kExitFatal;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return metricforge::kExitFatal;
  }
}
