#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tskd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

struct DistillOverrides {
  std::optional<std::string> variant;
  std::optional<std::uint64_t> seed;
  bool resume = false;
};

// Each command returns a process exit code: 0 success, 2 configuration
// error, 3 runtime failure. Diagnostics go to `err`.
int cmd_train_teacher(const std::filesystem::path& config, std::ostream& out, std::ostream& err);
int cmd_distill(const std::filesystem::path& config, const DistillOverrides& overrides, std::ostream& out,
                std::ostream& err);
int cmd_probe_arima(const std::filesystem::path& config, std::ostream& out, std::ostream& err);

struct ReportOptions {
  /// Run whose best accuracy the delta column is measured against; the first
  /// directory when empty.
  std::filesystem::path baseline;
  /// Comparison CSV destination; skipped when empty.
  std::filesystem::path csv;
};
int cmd_report(const std::vector<std::filesystem::path>& run_dirs, const ReportOptions& options, std::ostream& out,
               std::ostream& err);

}  // namespace tskd
