#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tskd/convlstm.hpp"
#include "tskd/dataset.hpp"
#include "tskd/distill.hpp"
#include "tskd/metrics.hpp"
#include "tskd/models.hpp"
#include "tskd/optim.hpp"
#include "tskd/schedule.hpp"

namespace tskd {

enum class Variant { Vanilla, Kd, At, Tskd, TskdFm };

std::string variant_name(Variant v);
/// Throws ConfigError on an unknown name.
Variant parse_variant(const std::string& name);
bool uses_teacher(Variant v);
bool is_temporal(Variant v);

// Independent seed streams, so variants sharing a seed also share the
// student initialisation and the data order.
std::uint64_t student_init_seed(std::uint64_t seed);
std::uint64_t lstm_init_seed(std::uint64_t seed);
std::uint64_t data_order_seed(std::uint64_t seed);

/// One Conv-LSTM per layer pair.
template <typename S>
struct TemporalExtractor {
  std::vector<ConvLstmParams<S>> per_pair;

  static TemporalExtractor init(const ConvLstmConfig& config, std::size_t pairs, std::uint64_t seed);
  /// Names are prefixed "lstm<l>." so the sets of all pairs can be stacked.
  ParamSet<S> parameters() const;
  std::uint64_t fingerprint() const;
};

template <typename S>
struct StepStats {
  double loss_task = 0;
  double loss_aux = 0;
  std::size_t correct = 0;
};

std::size_t count_correct(const Tensor<float>& logits, std::span<const int> labels);
std::size_t count_correct(const Tensor<double>& logits, std::span<const int> labels);

/// Plain cross-entropy step on the student.
template <typename S>
StepStats<S> general_step(Cnn<S>& student, const Batch<S>& batch, SgdState<S>& sgd, int epoch);

template <typename S>
struct ReviewGraph {
  Tensor<S> logits;
  Tensor<S> task;      // cross-entropy
  Tensor<S> temporal;  // sum over layer pairs
  std::vector<Tensor<S>> per_pair;
  /// task + temporal, where the student side of the temporal branch carries
  /// its adjoint scaled by lambda. Differentiating this root gives the
  /// Conv-LSTM dL_temporal and the student dL_task + lambda dL_temporal.
  Tensor<S> root;
  double lambda = 1.0;
  double student_loss() const;
};

/// Forward part of a review step: snapshots, live student and teacher taps,
/// attention maps, knowledge sequences, predicted and absolute increments.
template <typename S>
ReviewGraph<S> review_graph(const Cnn<S>& student, const Cnn<S>& teacher, const MemoryBank<S>& bank,
                            const TemporalExtractor<S>& extractor, const Batch<S>& batch, const DistillConfig& cfg,
                            int epoch);

template <typename S>
struct ReviewOutcome {
  double loss_task = 0;
  double loss_temporal = 0;
  double loss_student = 0;
  std::vector<double> per_pair;
  std::size_t correct = 0;
};

/// Full review: graph, one backward, SGD on the student and Adam on the
/// Conv-LSTMs. Throws NumericError (listing per-pair losses) on a
/// non-finite loss.
template <typename S>
ReviewOutcome<S> review_step(Cnn<S>& student, const Cnn<S>& teacher, const MemoryBank<S>& bank,
                             TemporalExtractor<S>& extractor, const Batch<S>& batch, const DistillConfig& cfg,
                             SgdState<S>& sgd, AdamState<S>& adam, int epoch);

template <typename S>
StepStats<S> kd_step(Cnn<S>& student, const Cnn<S>& teacher, const Batch<S>& batch, const DistillConfig& cfg,
                     SgdState<S>& sgd, int epoch);

template <typename S>
StepStats<S> at_step(Cnn<S>& student, const Cnn<S>& teacher, const Batch<S>& batch, const DistillConfig& cfg,
                     double beta, SgdState<S>& sgd, int epoch);

/// beta such that the AT term matches the cross-entropy on `batch`.
template <typename S>
double calibrate_at_beta(const Cnn<S>& student, const Cnn<S>& teacher, const Batch<S>& batch,
                         const DistillConfig& cfg);

/// Top-1 accuracy in [0,1].
template <typename S>
double evaluate(const Cnn<S>& model, const Dataset& data, std::size_t batch_size);

struct RunOptions {
  Variant variant = Variant::Vanilla;
  std::uint64_t seed = 0;
  int epochs = 10;
  int warmup_epochs = 0;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::vector<LrMilestone> milestones;
  DistillConfig distill;
  ConvLstmConfig lstm;
  double lstm_learning_rate = 1e-3;
  bool record_timing = true;
  /// Per-epoch resumable state lives here when non-empty.
  std::filesystem::path state_dir;
  bool resume = false;
};

struct RunResult {
  std::vector<EpochMetrics> metrics;
  double best_test_acc = 0;
  double final_test_acc = 0;
  int start_epoch = 0;
  std::string schedule_warning;
  std::optional<double> at_beta;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Trains `student` (in place) for options.epochs epochs under the selected
/// variant. `teacher` may be null for Vanilla.
RunResult run_training(const Cnn<float>* teacher, Cnn<float>& student, const Dataset& train, const Dataset& test,
                       const RunOptions& options, MetricsWriter* writer = nullptr,
                       const EpochCallback& on_epoch = {});

TrainingSchedule schedule_for(const RunOptions& options);

}  // namespace tskd
