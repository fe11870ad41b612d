#pragma once

#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "tskd/schedule.hpp"

namespace tskd {

inline constexpr const char* kMetricsHeader =
    "epoch,node_kind,loss_task,loss_temporal,train_acc,test_acc,lr,ms_per_batch";

/// One row per epoch. Real-valued fields are single precision so the
/// 9-significant-digit CSV text round-trips them exactly.
struct EpochMetrics {
  int epoch = 0;
  NodeKind node_kind = NodeKind::General;
  float loss_task = 0;
  float loss_temporal = 0;
  float train_acc = 0;
  float test_acc = 0;
  float lr = 0;
  float ms_per_batch = 0;

  bool operator==(const EpochMetrics&) const = default;
};

std::string format_metrics_row(const EpochMetrics& m);
EpochMetrics parse_metrics_row(const std::string& line);

/// Appends rows and flushes after each so a crash loses at most the row in
/// flight.
class MetricsWriter {
 public:
  /// `append` keeps existing rows (resume); otherwise the file is recreated.
  explicit MetricsWriter(const std::filesystem::path& path, bool append = false);
  void write(const EpochMetrics& m);

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

void write_metrics(std::span<const EpochMetrics> records, const std::filesystem::path& path);
std::vector<EpochMetrics> read_metrics(const std::filesystem::path& path);

}  // namespace tskd
