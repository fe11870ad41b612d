#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tskd/convlstm.hpp"
#include "tskd/dataset.hpp"
#include "tskd/distill.hpp"
#include "tskd/models.hpp"
#include "tskd/optim.hpp"
#include "tskd/trainer.hpp"

namespace tskd {

struct DatasetConfig {
  std::string kind = "synthetic";  // "synthetic" | "idx"
  // synthetic
  std::uint64_t seed = 1;
  std::size_t train_per_class = 60;
  std::size_t test_per_class = 20;
  std::size_t classes = 10;
  std::size_t size = 28;
  double noise = 0.5;
  double jitter = 5.0;
  // idx
  std::filesystem::path train_images, train_labels, test_images, test_labels;
  std::size_t train_limit = 0;  // 0 keeps everything
  std::size_t test_limit = 0;
};

struct ModelConfig {
  std::string arch;  // "default_teacher" | "default_student"
  std::optional<std::vector<std::size_t>> widths;
  std::optional<std::size_t> blocks_per_stage;
};

struct OptimizerConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::vector<LrMilestone> milestones;
};

struct ProbeConfig {
  std::size_t hidden = 16;
  std::size_t samples = 64;
  std::size_t batch_size = 8;
  double learning_rate = 0.005;
  double momentum = 0.0;
  int epochs = 40;
  int trace_epochs = 30;
  int horizon = 10;
  std::string tap = "fc1";
  std::size_t unit = 0;
  double probe_input = 0.5;
  std::array<int, 3> order{2, 1, 1};
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  /// May contain {variant} and {seed}; relative paths resolve against the
  /// output root.
  std::string output_dir = "runs/{variant}-s{seed}";
  DatasetConfig dataset;
  ModelConfig teacher{"default_teacher", std::nullopt, std::nullopt};
  int teacher_epochs = 20;
  std::string teacher_checkpoint = "runs/teacher/teacher.tskd";
  ModelConfig student{"default_student", std::nullopt, std::nullopt};
  Variant variant = Variant::Tskd;
  DistillConfig distill;
  ConvLstmConfig lstm;
  double lstm_learning_rate = 1e-3;
  OptimizerConfig optimizer;
  int epochs = 32;
  int warmup_epochs = 0;
  bool record_timing = true;
  ProbeConfig probe;

  /// Directory of the config file; relative dataset paths resolve here.
  std::filesystem::path base_dir;
};

enum class Command { TrainTeacher, Distill, ProbeArima };

/// Parses and fills defaults. Every problem found is reported in a single
/// ConfigError. Keys that do not apply to the selected variant are collected
/// into `warnings`.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                              std::vector<std::string>* warnings = nullptr);
ExperimentConfig load_config(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);

/// Cross-field and file-system checks for `command`; throws ConfigError
/// listing all problems.
void validate_config(const ExperimentConfig& cfg, Command command);

/// Fully defaulted JSON with resolved paths; parse_config of this text gives
/// back an equivalent config.
std::string effective_config_json(const ExperimentConfig& cfg);

/// Output root: $TSKD_OUTPUT_ROOT when set, otherwise the working directory.
std::filesystem::path output_root();
std::filesystem::path resolve_output(const std::string& path_template, const ExperimentConfig& cfg);
std::filesystem::path run_dir(const ExperimentConfig& cfg);
std::filesystem::path teacher_checkpoint_path(const ExperimentConfig& cfg);

CnnSpec teacher_spec(const ExperimentConfig& cfg, const Dataset& shape_source);
CnnSpec student_spec(const ExperimentConfig& cfg, const Dataset& shape_source);
/// Spec as implied by the dataset config alone (no data loaded).
CnnSpec teacher_spec(const ExperimentConfig& cfg);
CnnSpec student_spec(const ExperimentConfig& cfg);

struct DataSplit {
  Dataset train;
  Dataset test;
};
DataSplit load_data(const ExperimentConfig& cfg);

RunOptions run_options(const ExperimentConfig& cfg, Variant variant, int epochs);

}  // namespace tskd
