#include "tskd/metrics.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

namespace tskd {

namespace {

std::string fmt9(float v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
  return buf;
}

float parse_float(const std::string& field, const char* column) {
  float v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw FormatError(std::string("metrics: bad ") + column + " value '" + field + "'");
  }
  return v;
}

}  // namespace

std::string format_metrics_row(const EpochMetrics& m) {
  std::string row = std::to_string(m.epoch);
  row += ',';
  row += node_kind_code(m.node_kind);
  for (float v : {m.loss_task, m.loss_temporal, m.train_acc, m.test_acc, m.lr, m.ms_per_batch}) {
    row += ',';
    row += fmt9(v);
  }
  return row;
}

EpochMetrics parse_metrics_row(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(f);
  if (fields.size() != 8) {
    throw FormatError("metrics: expected 8 columns, got " + std::to_string(fields.size()) + " in '" + line + "'");
  }
  EpochMetrics m;
  auto [ptr, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), m.epoch);
  if (ec != std::errc() || ptr != fields[0].data() + fields[0].size()) {
    throw FormatError("metrics: bad epoch '" + fields[0] + "'");
  }
  if (fields[1].size() != 1) throw FormatError("metrics: bad node_kind '" + fields[1] + "'");
  m.node_kind = node_kind_from_code(fields[1][0]);
  m.loss_task = parse_float(fields[2], "loss_task");
  m.loss_temporal = parse_float(fields[3], "loss_temporal");
  m.train_acc = parse_float(fields[4], "train_acc");
  m.test_acc = parse_float(fields[5], "test_acc");
  m.lr = parse_float(fields[6], "lr");
  m.ms_per_batch = parse_float(fields[7], "ms_per_batch");
  return m;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path, bool append) : path_(path) {
  const bool fresh = !append || !std::filesystem::exists(path);
  out_.open(path, fresh ? std::ios::trunc : std::ios::app);
  if (!out_) throw IoError("cannot open metrics file " + path.string());
  if (fresh) {
    out_ << kMetricsHeader << '\n';
    out_.flush();
  }
}

void MetricsWriter::write(const EpochMetrics& m) {
  out_ << format_metrics_row(m) << '\n';
  out_.flush();
  if (!out_) throw IoError("write failed for " + path_.string());
}

void write_metrics(std::span<const EpochMetrics> records, const std::filesystem::path& path) {
  MetricsWriter w(path);
  for (const auto& r : records) w.write(r);
}

std::vector<EpochMetrics> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw FormatError("metrics file " + path.string() + " lacks the expected header");
  }
  std::vector<EpochMetrics> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(parse_metrics_row(line));
  }
  return out;
}

}  // namespace tskd
