#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tskd/models.hpp"

namespace tskd {

enum class NodeKind { Memory, General, Review };

char node_kind_code(NodeKind kind);  // 'M', 'G', 'R'
NodeKind node_kind_from_code(char code);

/// Per-epoch node assignment. After `warmup` general epochs the run repeats
/// cycles of k*delta + 1 epochs: offsets 0, delta, ..., (k-1)*delta are
/// Memory, offset k*delta is Review, the rest General. A trailing partial
/// cycle is all General.
class TrainingSchedule {
 public:
  static TrainingSchedule build(int total_epochs, int delta, int k, int warmup_epochs);
  static TrainingSchedule all_general(int total_epochs);

  int total_epochs() const { return static_cast<int>(kinds_.size()); }
  int delta() const { return delta_; }
  int k() const { return k_; }
  int warmup_epochs() const { return warmup_; }
  int cycle_length() const { return k_ * delta_ + 1; }

  NodeKind kind(int epoch) const;
  std::vector<int> epochs_of(NodeKind kind) const;
  bool has_review() const;

  /// First Memory node of a cycle; the memory bank is reset there.
  bool is_cycle_start(int epoch) const;
  /// Memory epochs feeding the review at `review_epoch`: t-k*delta, ..., t-delta.
  std::vector<int> memory_epochs_for(int review_epoch) const;

  /// Non-empty when the run is too short for any review.
  const std::string& warning() const { return warning_; }

 private:
  std::vector<NodeKind> kinds_;
  int delta_ = 1;
  int k_ = 1;
  int warmup_ = 0;
  std::string warning_;
};

inline TrainingSchedule build_schedule(int total_epochs, int delta, int k, int warmup_epochs) {
  return TrainingSchedule::build(total_epochs, delta, k, warmup_epochs);
}

/// Bounded FIFO of frozen student snapshots, strictly increasing in epoch.
template <typename S>
class MemoryBank {
 public:
  struct Entry {
    int epoch;
    Cnn<S> model;
    std::uint64_t fingerprint;
  };

  explicit MemoryBank(std::size_t capacity);

  /// Memorize action: snapshot `student` at a Memory node of `schedule`,
  /// clearing the bank first at the start of a cycle.
  void memorize(int epoch, const Cnn<S>& student, const TrainingSchedule& schedule);
  /// Raw FIFO append (oldest evicted past capacity).
  void push(int epoch, const Cnn<S>& student);
  void clear() { entries_.clear(); }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool full() const { return entries_.size() == capacity_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<int> epochs() const;

 private:
  std::size_t capacity_;
  std::vector<Entry> entries_;
};

extern template class MemoryBank<float>;
extern template class MemoryBank<double>;

}  // namespace tskd
