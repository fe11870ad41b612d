#include "tskd/schedule.hpp"

namespace tskd {

char node_kind_code(NodeKind kind) {
  switch (kind) {
    case NodeKind::Memory:
      return 'M';
    case NodeKind::General:
      return 'G';
    case NodeKind::Review:
      return 'R';
  }
  return '?';
}

NodeKind node_kind_from_code(char code) {
  switch (code) {
    case 'M':
      return NodeKind::Memory;
    case 'G':
      return NodeKind::General;
    case 'R':
      return NodeKind::Review;
    default:
      throw FormatError(std::string("unknown node kind code '") + code + "'");
  }
}

TrainingSchedule TrainingSchedule::build(int total_epochs, int delta, int k, int warmup_epochs) {
  std::vector<std::string> problems;
  if (delta < 1) problems.push_back("memory interval delta must be >= 1");
  if (k < 1) problems.push_back("memory count k must be >= 1");
  if (total_epochs < 0) problems.push_back("total_epochs must be >= 0");
  if (warmup_epochs < 0) problems.push_back("warmup_epochs must be >= 0");
  if (!problems.empty()) throw ConfigError(problems);

  TrainingSchedule s;
  s.delta_ = delta;
  s.k_ = k;
  s.warmup_ = warmup_epochs;
  s.kinds_.assign(static_cast<std::size_t>(total_epochs), NodeKind::General);
  const int cycle = k * delta + 1;
  for (int start = warmup_epochs; start + cycle <= total_epochs; start += cycle) {
    for (int j = 0; j < k; ++j) s.kinds_[static_cast<std::size_t>(start + j * delta)] = NodeKind::Memory;
    s.kinds_[static_cast<std::size_t>(start + k * delta)] = NodeKind::Review;
  }
  if (!s.has_review()) {
    s.warning_ = "schedule of " + std::to_string(total_epochs) + " epochs is shorter than warmup + k*delta + 1 = " +
                 std::to_string(warmup_epochs + cycle) + "; every epoch is General";
  }
  return s;
}

TrainingSchedule TrainingSchedule::all_general(int total_epochs) {
  TrainingSchedule s;
  s.kinds_.assign(static_cast<std::size_t>(std::max(total_epochs, 0)), NodeKind::General);
  return s;
}

NodeKind TrainingSchedule::kind(int epoch) const {
  if (epoch < 0 || epoch >= total_epochs()) {
    throw IndexError("epoch " + std::to_string(epoch) + " outside schedule of " + std::to_string(total_epochs()));
  }
  return kinds_[static_cast<std::size_t>(epoch)];
}

std::vector<int> TrainingSchedule::epochs_of(NodeKind kind) const {
  std::vector<int> out;
  for (int e = 0; e < total_epochs(); ++e) {
    if (kinds_[static_cast<std::size_t>(e)] == kind) out.push_back(e);
  }
  return out;
}

bool TrainingSchedule::has_review() const {
  for (auto k : kinds_) {
    if (k == NodeKind::Review) return true;
  }
  return false;
}

bool TrainingSchedule::is_cycle_start(int epoch) const {
  return kind(epoch) == NodeKind::Memory && (epoch - warmup_) % cycle_length() == 0;
}

std::vector<int> TrainingSchedule::memory_epochs_for(int review_epoch) const {
  if (kind(review_epoch) != NodeKind::Review) {
    throw ContractError("epoch " + std::to_string(review_epoch) + " is not a Review node");
  }
  std::vector<int> out;
  for (int j = k_; j >= 1; --j) out.push_back(review_epoch - j * delta_);
  return out;
}

template <typename S>
MemoryBank<S>::MemoryBank(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ContractError("memory bank capacity must be positive");
}

template <typename S>
void MemoryBank<S>::memorize(int epoch, const Cnn<S>& student, const TrainingSchedule& schedule) {
  if (schedule.kind(epoch) != NodeKind::Memory) {
    throw ContractError("memorize called at epoch " + std::to_string(epoch) + ", which is not a Memory node");
  }
  if (schedule.is_cycle_start(epoch)) clear();
  push(epoch, student);
}

template <typename S>
void MemoryBank<S>::push(int epoch, const Cnn<S>& student) {
  if (!entries_.empty() && entries_.back().epoch >= epoch) {
    throw ContractError("memory bank epochs must increase: " + std::to_string(entries_.back().epoch) + " then " +
                        std::to_string(epoch));
  }
  auto snap = student.snapshot();
  const auto fp = snap.fingerprint();
  entries_.push_back({epoch, std::move(snap), fp});
  if (entries_.size() > capacity_) entries_.erase(entries_.begin());
}

template <typename S>
std::vector<int> MemoryBank<S>::epochs() const {
  std::vector<int> out;
  for (const auto& e : entries_) out.push_back(e.epoch);
  return out;
}

template class MemoryBank<float>;
template class MemoryBank<double>;

}  // namespace tskd
