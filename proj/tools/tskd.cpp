#include <CLI11.hpp>
#include <iostream>

#include "tskd/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Temporal supervised knowledge distillation experiments"};
  app.require_subcommand(1);

  std::string config;
  auto* teacher = app.add_subcommand("train-teacher", "Pre-train the teacher network");
  teacher->add_option("--config", config, "Experiment config (JSON)")->required();

  tskd::DistillOverrides overrides;
  std::string variant;
  std::uint64_t seed = 0;
  auto* distill = app.add_subcommand("distill", "Train a student under a distillation variant");
  distill->add_option("--config", config, "Experiment config (JSON)")->required();
  auto* variant_opt = distill->add_option("--variant", variant, "vanilla | kd | at | tskd | tskd_fm");
  auto* seed_opt = distill->add_option("--seed", seed, "Override the config seed");
  distill->add_flag("--resume", overrides.resume, "Continue from the run's saved state");

  auto* probe = app.add_subcommand("probe-arima", "Record a probe trace and forecast it with ARIMA");
  probe->add_option("--config", config, "Experiment config (JSON)")->required();

  std::vector<std::filesystem::path> dirs;
  tskd::ReportOptions report_opts;
  auto* report = app.add_subcommand("report", "Compare finished runs");
  report->add_option("dirs", dirs, "Run directories")->required();
  report->add_option("--baseline", report_opts.baseline, "Run used for the delta column (default: first)");
  report->add_option("--csv", report_opts.csv, "Also write the comparison as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : tskd::kExitConfig;
  }

  if (*teacher) return tskd::cmd_train_teacher(config, std::cout, std::cerr);
  if (*distill) {
    if (*variant_opt) overrides.variant = variant;
    if (*seed_opt) overrides.seed = seed;
    return tskd::cmd_distill(config, overrides, std::cout, std::cerr);
  }
  if (*probe) return tskd::cmd_probe_arima(config, std::cout, std::cerr);
  return tskd::cmd_report(dirs, report_opts, std::cout, std::cerr);
}
