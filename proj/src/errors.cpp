#include "tskd/errors.hpp"

namespace tskd {

namespace {
std::string join_problems(const std::vector<std::string>& problems) {
  std::string msg = "invalid configuration";
  for (const auto& p : problems) msg += "\n  - " + p;
  return msg;
}
}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : Error(join_problems(problems)), problems_(std::move(problems)) {}

}  // namespace tskd
