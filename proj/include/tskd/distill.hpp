#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tskd/models.hpp"
#include "tskd/tensor.hpp"

namespace tskd {

/// Channel-wise sum of squared activations, [N,H,W], nonnegative.
template <typename S>
struct AttentionMap {
  Tensor<S> values;
  bool normalized = false;
  int epoch = -1;  // student epoch the map was taken at; -1 when not applicable
};

/// Epoch interval an increment covers; `absolute` marks a teacher-student gap.
struct EpochSpan {
  int from = -1;
  int to = -1;
  bool absolute = false;

  bool operator==(const EpochSpan&) const = default;
};

template <typename S>
struct KnowledgeIncrement {
  Tensor<S> values;  // [N,H,W], nonnegative
  EpochSpan span;
};

enum class SequenceMode { Increments, FeatureMaps };

template <typename S>
struct KnowledgeSequence {
  std::vector<Tensor<S>> entries;  // oldest first
  std::vector<EpochSpan> spans;
  SequenceMode mode = SequenceMode::Increments;

  std::size_t length() const { return entries.size(); }
};

struct LayerPair {
  std::string student_tap;
  std::string teacher_tap;

  bool operator==(const LayerPair&) const = default;
};

struct DistillConfig {
  double lambda = 1.0;
  int k = 3;
  int delta = 5;
  std::vector<LayerPair> layer_pairs{{"stage1", "stage1"}, {"stage2", "stage2"}, {"stage3", "stage3"}};
  SequenceMode sequence_mode = SequenceMode::Increments;
  bool normalize_maps = true;
  bool detach_target = false;
  double kd_temperature = 4.0;
  double kd_alpha = 0.9;
  std::optional<double> at_beta;  // unset: calibrated on the first batch

  std::vector<std::string> problems() const;
};

template <typename S>
AttentionMap<S> attention_map(const Tensor<S>& features, bool normalize, int epoch = -1);

/// |b - a|, span (a.epoch, b.epoch).
template <typename S>
KnowledgeIncrement<S> knowledge_increment(const AttentionMap<S>& earlier, const AttentionMap<S>& later);

/// Increments mode: k+1 maps in epoch order give k consecutive increments.
/// Feature-map mode: k maps are used as they are.
template <typename S>
KnowledgeSequence<S> build_knowledge_sequence(std::span<const AttentionMap<S>> maps, SequenceMode mode, int k);

/// Average-pools the larger map down to the extent of the smaller one.
template <typename S>
std::pair<Tensor<S>, Tensor<S>> match_extent(const Tensor<S>& a, const Tensor<S>& b);

/// |teacher - student| after extent matching; the student side is detached
/// when `detach_target` is set.
template <typename S>
KnowledgeIncrement<S> absolute_increment(const AttentionMap<S>& teacher_map, const AttentionMap<S>& student_map,
                                         bool detach_target = false);

/// Mean squared difference over batch and spatial elements.
template <typename S>
Tensor<S> temporal_loss(const Tensor<S>& predicted, const KnowledgeIncrement<S>& target);

/// Sum of per-pair temporal losses.
template <typename S>
Tensor<S> temporal_loss(std::span<const Tensor<S>> predicted, std::span<const KnowledgeIncrement<S>> targets);

/// Attention-transfer distance: mean squared difference of normalized maps,
/// summed over layer pairs.
template <typename S>
Tensor<S> spatial_loss(const TapSet<S>& student_taps, const TapSet<S>& teacher_taps,
                       std::span<const LayerPair> layer_pairs);

/// (1 - alpha) CE(student, labels) + alpha T^2 KL(softmax(t/T) || softmax(s/T)).
template <typename S>
Tensor<S> kd_logits_loss(const Tensor<S>& student_logits, const Tensor<S>& teacher_logits, double temperature,
                         double alpha, std::span<const int> labels);

template <typename S>
Tensor<S> student_loss(const Tensor<S>& task, const Tensor<S>& aux, double lambda);

}  // namespace tskd
