#include "tskd/distill.hpp"

#include <cmath>

#include "tskd/ops.hpp"

namespace tskd {

std::vector<std::string> DistillConfig::problems() const {
  std::vector<std::string> out;
  if (!(lambda >= 0.0)) out.push_back("lambda must be >= 0");
  if (k < 1) out.push_back("k must be >= 1");
  if (delta < 1) out.push_back("delta must be >= 1");
  if (layer_pairs.empty()) out.push_back("layer_pairs must not be empty");
  if (!(kd_temperature > 0.0)) out.push_back("kd_temperature must be > 0");
  if (kd_alpha < 0.0 || kd_alpha > 1.0) out.push_back("kd_alpha must lie in [0, 1]");
  if (at_beta && *at_beta < 0.0) out.push_back("at_beta must be >= 0");
  return out;
}

template <typename S>
AttentionMap<S> attention_map(const Tensor<S>& features, bool normalize, int epoch) {
  if (features.rank() != 4) {
    throw DimensionError("attention_map: expected [N,C,H,W], got " + shape_str(features.shape()));
  }
  auto map = sum_channels(square(features));
  if (normalize) map = l2_normalize_samples(map);
  return {map, normalize, epoch};
}

template <typename S>
KnowledgeIncrement<S> knowledge_increment(const AttentionMap<S>& earlier, const AttentionMap<S>& later) {
  if (earlier.values.shape() != later.values.shape()) {
    throw ContractError("knowledge_increment: map shapes differ " + shape_str(earlier.values.shape()) + " vs " +
                        shape_str(later.values.shape()));
  }
  if (earlier.normalized != later.normalized) {
    throw ContractError("knowledge_increment: cannot mix normalized and raw attention maps");
  }
  return {abs(sub(later.values, earlier.values)), EpochSpan{earlier.epoch, later.epoch, false}};
}

template <typename S>
KnowledgeSequence<S> build_knowledge_sequence(std::span<const AttentionMap<S>> maps, SequenceMode mode, int k) {
  if (k < 1) throw ContractError("build_knowledge_sequence: k must be >= 1");
  const std::size_t expected = mode == SequenceMode::Increments ? static_cast<std::size_t>(k) + 1
                                                                 : static_cast<std::size_t>(k);
  if (maps.size() != expected) {
    throw ContractError("build_knowledge_sequence: expected " + std::to_string(expected) + " attention maps, got " +
                        std::to_string(maps.size()));
  }
  for (const auto& m : maps) {
    if (m.values.shape() != maps.front().values.shape()) {
      throw ContractError("build_knowledge_sequence: ragged maps " + shape_str(maps.front().values.shape()) +
                          " vs " + shape_str(m.values.shape()));
    }
  }
  KnowledgeSequence<S> seq;
  seq.mode = mode;
  if (mode == SequenceMode::Increments) {
    for (std::size_t i = 0; i + 1 < maps.size(); ++i) {
      auto inc = knowledge_increment(maps[i], maps[i + 1]);
      seq.entries.push_back(inc.values);
      seq.spans.push_back(inc.span);
    }
  } else {
    for (const auto& m : maps) {
      seq.entries.push_back(m.values);
      seq.spans.push_back({m.epoch, m.epoch, false});
    }
  }
  return seq;
}

template <typename S>
std::pair<Tensor<S>, Tensor<S>> match_extent(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0)) {
    throw ContractError("match_extent: irreconcilable maps " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::size_t h = std::min(a.dim(1), b.dim(1)), w = std::min(a.dim(2), b.dim(2));
  const bool a_fits = a.dim(1) == h && a.dim(2) == w;
  const bool b_fits = b.dim(1) == h && b.dim(2) == w;
  return {a_fits ? a : adaptive_avg_pool(a, h, w), b_fits ? b : adaptive_avg_pool(b, h, w)};
}

template <typename S>
KnowledgeIncrement<S> absolute_increment(const AttentionMap<S>& teacher_map, const AttentionMap<S>& student_map,
                                         bool detach_target) {
  if (teacher_map.normalized != student_map.normalized) {
    throw ContractError("absolute_increment: cannot mix normalized and raw attention maps");
  }
  const Tensor<S> student = detach_target ? student_map.values.detach() : student_map.values;
  auto [t, s] = match_extent(teacher_map.values, student);
  return {abs(sub(t, s)), EpochSpan{student_map.epoch, student_map.epoch, true}};
}

template <typename S>
Tensor<S> temporal_loss(const Tensor<S>& predicted, const KnowledgeIncrement<S>& target) {
  if (predicted.shape() != target.values.shape()) {
    throw ContractError("temporal_loss: prediction " + shape_str(predicted.shape()) + " vs target " +
                        shape_str(target.values.shape()));
  }
  return mse(predicted, target.values);
}

template <typename S>
Tensor<S> temporal_loss(std::span<const Tensor<S>> predicted, std::span<const KnowledgeIncrement<S>> targets) {
  if (predicted.size() != targets.size() || predicted.empty()) {
    throw ContractError("temporal_loss: need one prediction per target and at least one layer pair");
  }
  Tensor<S> total = temporal_loss(predicted[0], targets[0]);
  for (std::size_t i = 1; i < predicted.size(); ++i) total = add(total, temporal_loss(predicted[i], targets[i]));
  return total;
}

template <typename S>
Tensor<S> spatial_loss(const TapSet<S>& student_taps, const TapSet<S>& teacher_taps,
                       std::span<const LayerPair> layer_pairs) {
  if (layer_pairs.empty()) throw ContractError("spatial_loss: no layer pairs");
  Tensor<S> total;
  for (const auto& pair : layer_pairs) {
    auto s = attention_map(find_tap(student_taps, pair.student_tap), true);
    auto t = attention_map(find_tap(teacher_taps, pair.teacher_tap), true);
    auto [tv, sv] = match_extent(t.values, s.values);
    auto term = mse(sv, tv);
    total = total.defined() ? add(total, term) : term;
  }
  return total;
}

template <typename S>
Tensor<S> kd_logits_loss(const Tensor<S>& student_logits, const Tensor<S>& teacher_logits, double temperature,
                         double alpha, std::span<const int> labels) {
  if (student_logits.shape() != teacher_logits.shape() || student_logits.rank() != 2) {
    throw DimensionError("kd_logits_loss: logits " + shape_str(student_logits.shape()) + " vs " +
                         shape_str(teacher_logits.shape()));
  }
  if (!(temperature > 0.0)) throw ContractError("kd_logits_loss: temperature must be positive");
  const std::size_t n = student_logits.dim(0);
  const S inv_t = static_cast<S>(1.0 / temperature);

  // Teacher distribution is a constant target.
  std::vector<S> p_teacher;
  S entropy_term = S(0);  // sum p log p
  {
    NoGradGuard no_grad;
    auto log_pt = log_softmax(scale(teacher_logits.detach(), inv_t));
    for (S lp : log_pt.data()) {
      const S p = std::exp(lp);
      p_teacher.push_back(p);
      entropy_term += p * lp;
    }
  }
  Tensor<S> pt(student_logits.shape(), std::move(p_teacher));
  auto cross = sum_all(mul(pt, log_softmax(scale(student_logits, inv_t))));
  // KL = (sum p log p - sum p log q) / N
  auto kl = scale(sub(Tensor<S>::scalar(entropy_term), cross), S(1) / static_cast<S>(n));
  auto ce = softmax_cross_entropy(student_logits, labels);
  const S t2 = static_cast<S>(temperature * temperature);
  return add(scale(ce, static_cast<S>(1.0 - alpha)), scale(kl, static_cast<S>(alpha) * t2));
}

template <typename S>
Tensor<S> student_loss(const Tensor<S>& task, const Tensor<S>& aux, double lambda) {
  if (task.numel() != 1 || aux.numel() != 1) throw ContractError("student_loss: both terms must be scalars");
  return add(task, scale(aux, static_cast<S>(lambda)));
}

#define TSKD_INSTANTIATE_DISTILL(S)                                                                           \
  template AttentionMap<S> attention_map(const Tensor<S>&, bool, int);                                       \
  template KnowledgeIncrement<S> knowledge_increment(const AttentionMap<S>&, const AttentionMap<S>&);        \
  template KnowledgeSequence<S> build_knowledge_sequence(std::span<const AttentionMap<S>>, SequenceMode, int); \
  template std::pair<Tensor<S>, Tensor<S>> match_extent(const Tensor<S>&, const Tensor<S>&);                 \
  template KnowledgeIncrement<S> absolute_increment(const AttentionMap<S>&, const AttentionMap<S>&, bool);   \
  template Tensor<S> temporal_loss(const Tensor<S>&, const KnowledgeIncrement<S>&);                          \
  template Tensor<S> temporal_loss(std::span<const Tensor<S>>, std::span<const KnowledgeIncrement<S>>);      \
  template Tensor<S> spatial_loss(const TapSet<S>&, const TapSet<S>&, std::span<const LayerPair>);           \
  template Tensor<S> kd_logits_loss(const Tensor<S>&, const Tensor<S>&, double, double, std::span<const int>); \
  template Tensor<S> student_loss(const Tensor<S>&, const Tensor<S>&, double);

TSKD_INSTANTIATE_DISTILL(float)
TSKD_INSTANTIATE_DISTILL(double)

}  // namespace tskd
