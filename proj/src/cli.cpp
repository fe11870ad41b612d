#include "tskd/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "tskd/arima.hpp"
#include "tskd/checkpoint.hpp"
#include "tskd/config.hpp"
#include "tskd/metrics.hpp"
#include "tskd/probe.hpp"
#include "tskd/trainer.hpp"

namespace tskd {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

int report_config_error(const ConfigError& e, std::ostream& err) {
  err << "configuration error (" << e.problems().size() << " problem" << (e.problems().size() == 1 ? "" : "s")
      << "):\n";
  for (const auto& p : e.problems()) err << "  - " << p << "\n";
  return kExitConfig;
}

// Runs `body`, mapping exceptions onto exit codes.
template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    return report_config_error(e, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << "\n";
}

Cnn<float> load_teacher(const ExperimentConfig& cfg, const Dataset& shape_source) {
  Cnn<float> teacher(teacher_spec(cfg, shape_source), 0);
  teacher.load_parameters(load_checkpoint(teacher_checkpoint_path(cfg)));
  teacher.freeze();
  return teacher;
}

}  // namespace

int cmd_train_teacher(const fs::path& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::vector<std::string> warnings;
    auto cfg = load_config(config, &warnings);
    validate_config(cfg, Command::TrainTeacher);
    print_warnings(warnings, err);

    const auto ckpt = teacher_checkpoint_path(cfg);
    const auto dir = ckpt.parent_path();
    fs::create_directories(dir);
    write_text(dir / "config.json", effective_config_json(cfg));

    auto data = load_data(cfg);
    Cnn<float> teacher(teacher_spec(cfg, data.train), student_init_seed(cfg.seed));
    auto opts = run_options(cfg, Variant::Vanilla, cfg.teacher_epochs);
    MetricsWriter writer(dir / "metrics.csv");
    auto result = run_training(nullptr, teacher, data.train, data.test, opts, &writer, [&](const EpochMetrics& m) {
      out << "teacher epoch " << m.epoch << " loss " << fixed(m.loss_task, 4) << " train " << fixed(m.train_acc, 4)
          << " test " << fixed(m.test_acc, 4) << "\n";
    });
    save_checkpoint(teacher.parameters(), ckpt);
    out << "teacher test_acc=" << fixed(result.final_test_acc, 4) << " best_test_acc=" << fixed(result.best_test_acc, 4)
        << " checkpoint=" << ckpt.string() << "\n";
    return kExitOk;
  });
}

int cmd_distill(const fs::path& config, const DistillOverrides& overrides, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::vector<std::string> warnings;
    auto cfg = load_config(config, &warnings);
    if (overrides.variant) cfg.variant = parse_variant(*overrides.variant);
    if (overrides.seed) cfg.seed = *overrides.seed;
    validate_config(cfg, Command::Distill);
    print_warnings(warnings, err);

    const auto dir = run_dir(cfg);
    fs::create_directories(dir);
    write_text(dir / "config.json", effective_config_json(cfg));

    auto data = load_data(cfg);
    std::optional<Cnn<float>> teacher;
    if (uses_teacher(cfg.variant)) teacher = load_teacher(cfg, data.train);
    Cnn<float> student(student_spec(cfg, data.train), student_init_seed(cfg.seed));

    auto opts = run_options(cfg, cfg.variant, cfg.epochs);
    opts.state_dir = dir / "state";
    opts.resume = overrides.resume;
    const auto metrics_path = dir / "metrics.csv";
    if (overrides.resume) {
      // Keep only rows the saved state already covers.
      std::ifstream manifest(opts.state_dir / "manifest.json");
      if (!manifest) throw IoError("nothing to resume in " + opts.state_dir.string());
      const int next = json::parse(manifest).at("next_epoch").get<int>();
      std::vector<EpochMetrics> kept;
      if (fs::exists(metrics_path)) {
        for (const auto& m : read_metrics(metrics_path)) {
          if (m.epoch < next) kept.push_back(m);
        }
      }
      write_metrics(kept, metrics_path);
    }
    MetricsWriter writer(metrics_path, overrides.resume);
    auto result = run_training(teacher ? &*teacher : nullptr, student, data.train, data.test, opts, &writer,
                               [&](const EpochMetrics& m) {
                                 out << variant_name(cfg.variant) << " epoch " << m.epoch << " ["
                                     << node_kind_code(m.node_kind) << "] loss " << fixed(m.loss_task, 4)
                                     << " temporal " << fixed(m.loss_temporal, 5) << " test " << fixed(m.test_acc, 4)
                                     << "\n";
                               });
    if (!result.schedule_warning.empty()) err << "warning: " << result.schedule_warning << "\n";
    save_checkpoint(student.parameters(), dir / "student.tskd");

    json summary = {{"variant", variant_name(cfg.variant)},
                    {"seed", cfg.seed},
                    {"epochs", cfg.epochs},
                    {"best_test_acc", result.best_test_acc},
                    {"final_test_acc", result.final_test_acc},
                    {"resumed_from_epoch", result.start_epoch}};
    if (result.at_beta) summary["at_beta"] = *result.at_beta;
    if (!result.schedule_warning.empty()) summary["schedule_warning"] = result.schedule_warning;
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    out << "variant=" << variant_name(cfg.variant) << " seed=" << cfg.seed
        << " best_test_acc=" << fixed(result.best_test_acc, 4) << "\n";
    return kExitOk;
  });
}

int cmd_probe_arima(const fs::path& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::vector<std::string> warnings;
    auto cfg = load_config(config, &warnings);
    validate_config(cfg, Command::ProbeArima);
    const auto dir = run_dir(cfg);
    fs::create_directories(dir);
    write_text(dir / "config.json", effective_config_json(cfg));

    const auto& pc = cfg.probe;
    ProbeOptions po;
    po.seed = cfg.seed;
    po.hidden = pc.hidden;
    po.samples = pc.samples;
    po.batch_size = pc.batch_size;
    po.learning_rate = pc.learning_rate;
    po.momentum = pc.momentum;
    po.epochs = pc.epochs;
    po.tap = pc.tap;
    po.unit = pc.unit;
    po.probe_input = pc.probe_input;
    const auto run = train_probe(po);
    const auto& values = run.trace.values;
    const std::vector<double> history(values.begin(), values.begin() + pc.trace_epochs);

    {
      std::ofstream trace(dir / "trace.csv");
      trace << "epoch,value\n";
      for (int e = 0; e < pc.trace_epochs; ++e) trace << e << "," << g17(history[static_cast<std::size_t>(e)]) << "\n";
      if (!trace) throw IoError("cannot write trace.csv");
    }

    ArimaModel model;
    std::string fallback;
    try {
      model = fit_arima(history, pc.order[0], pc.order[1], pc.order[2]);
    } catch (const DegenerateFitError& e) {
      fallback = "probe " + run.trace.probe_id + ": " + e.what() + "; falling back to a random-walk forecast";
      err << "warning: " << fallback << "\n";
      model = random_walk_model(history);
    }
    if (!model.stationary) err << "warning: probe " << run.trace.probe_id << ": fitted AR part is not stationary\n";
    const auto predicted = forecast(model, history, pc.horizon);

    double mse_model = 0, mse_naive = 0;
    int scored = 0;
    {
      std::ofstream fc(dir / "forecast.csv");
      fc << "epoch,predicted,actual\n";
      for (int h = 0; h < pc.horizon; ++h) {
        const auto e = static_cast<std::size_t>(pc.trace_epochs + h);
        fc << e << "," << g17(predicted[static_cast<std::size_t>(h)]) << ",";
        if (e < values.size()) {
          fc << g17(values[e]);
          const double a = values[e];
          mse_model += (predicted[static_cast<std::size_t>(h)] - a) * (predicted[static_cast<std::size_t>(h)] - a);
          mse_naive += (history.back() - a) * (history.back() - a);
          ++scored;
        }
        fc << "\n";
      }
      if (!fc) throw IoError("cannot write forecast.csv");
    }

    // Residual diagnostics on the conditional residuals past the AR warm-up.
    std::vector<double> resid(model.residuals.begin() + std::min<std::ptrdiff_t>(model.p, static_cast<std::ptrdiff_t>(model.residuals.size())),
                              model.residuals.end());
    double mean = 0, var = 0, ac1 = 0;
    for (double r : resid) mean += r;
    if (!resid.empty()) mean /= static_cast<double>(resid.size());
    for (double r : resid) var += (r - mean) * (r - mean);
    for (std::size_t i = 1; i < resid.size(); ++i) ac1 += (resid[i] - mean) * (resid[i - 1] - mean);
    json fit = {{"probe_id", run.trace.probe_id},
                {"order", {model.p, model.d, model.q}},
                {"requested_order", pc.order},
                {"phi", model.phi},
                {"theta", model.theta},
                {"intercept", model.intercept},
                {"sigma2", model.sigma2},
                {"stationary", model.stationary},
                {"iterations", model.iterations},
                {"fallback", fallback.empty() ? json(nullptr) : json("random_walk")},
                {"warning", fallback.empty() ? json(nullptr) : json(fallback)},
                {"trace_epochs", pc.trace_epochs},
                {"horizon", pc.horizon},
                {"residuals",
                 {{"count", resid.size()},
                  {"mean", mean},
                  {"variance", resid.empty() ? 0.0 : var / static_cast<double>(resid.size())},
                  {"lag1_autocorrelation", var > 0 ? ac1 / var : 0.0}}}};
    if (scored > 0) {
      fit["forecast_mse"] = mse_model / scored;
      fit["naive_mse"] = mse_naive / scored;
    }
    write_text(dir / "fit.json", fit.dump(2) + "\n");
    out << "probe " << run.trace.probe_id << " ARIMA(" << model.p << "," << model.d << "," << model.q << ")";
    if (scored > 0) {
      out << " forecast_mse=" << g17(mse_model / scored) << " naive_mse=" << g17(mse_naive / scored);
    }
    out << " dir=" << dir.string() << "\n";
    return kExitOk;
  });
}

namespace {

struct RunRow {
  std::string name;
  std::string variant = "?";
  std::string seed = "?";
  std::string error;
  int epochs = 0;
  double best = 0, final_acc = 0;
  std::map<char, std::pair<double, int>> ms;  // node kind -> (sum, count)
  double ms_sum = 0;
  int review_epochs = 0;

  double ms_of(char kind) const {
    auto it = ms.find(kind);
    return it == ms.end() || it->second.second == 0 ? NAN : it->second.first / it->second.second;
  }
  double ms_mean() const { return epochs ? ms_sum / epochs : NAN; }
};

RunRow summarize(const fs::path& dir) {
  RunRow row;
  row.name = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
  try {
    if (fs::exists(dir / "config.json")) {
      std::ifstream in(dir / "config.json");
      auto j = json::parse(in);
      if (j.contains("variant")) row.variant = j["variant"].get<std::string>();
      if (j.contains("seed")) row.seed = std::to_string(j["seed"].get<std::uint64_t>());
    }
    const auto metrics = read_metrics(dir / "metrics.csv");
    if (metrics.empty()) throw FormatError("metrics.csv holds no epochs");
    for (const auto& m : metrics) {
      row.best = std::max(row.best, static_cast<double>(m.test_acc));
      auto& slot = row.ms[node_kind_code(m.node_kind)];
      slot.first += m.ms_per_batch;
      slot.second += 1;
      row.ms_sum += m.ms_per_batch;
      row.review_epochs += m.node_kind == NodeKind::Review;
    }
    row.final_acc = metrics.back().test_acc;
    row.epochs = static_cast<int>(metrics.size());
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

std::string cell(double v, int digits) { return std::isnan(v) ? "" : fixed(v, digits); }

void print_table(std::ostream& out, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    if (width.size() < r.size()) width.resize(r.size(), 0);
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      out << (i ? "  " : "") << std::left << std::setw(static_cast<int>(width[i])) << r[i];
    }
    out << "\n";
  }
}

std::string csv_join(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
  return s;
}

}  // namespace

int cmd_report(const std::vector<fs::path>& run_dirs, const ReportOptions& options, std::ostream& out,
               std::ostream& err) {
  return guarded(err, [&] {
    if (run_dirs.empty()) throw ConfigError({"report: at least one run directory is required"});
    std::vector<RunRow> rows;
    for (const auto& d : run_dirs) rows.push_back(summarize(d));

    std::size_t base = 0;
    if (!options.baseline.empty()) {
      base = run_dirs.size();
      for (std::size_t i = 0; i < run_dirs.size(); ++i) {
        if (fs::weakly_canonical(run_dirs[i]) == fs::weakly_canonical(options.baseline)) base = i;
      }
      if (base == run_dirs.size()) throw ConfigError({"report: baseline " + options.baseline.string() + " is not among the runs"});
    }
    const bool with_delta = rows.size() > 1 && rows[base].error.empty();

    std::vector<std::string> header{"run",        "variant",   "seed",      "epochs",    "best_acc_pct", "final_acc_pct",
                                    "ms_general", "ms_memory", "ms_review", "ms_mean"};
    if (with_delta) header.push_back("delta_best_pp");
    std::vector<std::vector<std::string>> table{header};
    int failures = 0;
    for (const auto& r : rows) {
      if (!r.error.empty()) {
        ++failures;
        err << "report: " << r.name << ": " << r.error << "\n";
        continue;
      }
      std::vector<std::string> line{r.name,
                                    r.variant,
                                    r.seed,
                                    std::to_string(r.epochs),
                                    fixed(100.0 * r.best, 2),
                                    fixed(100.0 * r.final_acc, 2),
                                    cell(r.ms_of('G'), 3),
                                    cell(r.ms_of('M'), 3),
                                    cell(r.ms_of('R'), 3),
                                    cell(r.ms_mean(), 3)};
      if (with_delta) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%+.2f", 100.0 * (r.best - rows[base].best));
        line.push_back(buf);
      }
      table.push_back(line);
    }
    print_table(out, table);

    // Time against accuracy, one pair per variant.
    std::map<std::string, std::tuple<double, double, int>> by_variant;
    for (const auto& r : rows) {
      if (!r.error.empty()) continue;
      auto& [acc, ms, n] = by_variant[r.variant];
      acc += r.best;
      ms += r.ms_mean();
      n += 1;
    }
    std::vector<std::vector<std::string>> pairs{{"variant", "runs", "mean_best_acc_pct", "mean_ms_per_batch"}};
    for (const auto& [v, t] : by_variant) {
      const auto& [acc, ms, n] = t;
      pairs.push_back({v, std::to_string(n), fixed(100.0 * acc / n, 2), cell(ms / n, 3)});
    }
    out << "\n";
    print_table(out, pairs);

    if (!options.csv.empty()) {
      std::ofstream csv(options.csv);
      for (const auto& r : table) csv << csv_join(r) << "\n";
      auto variants_path = options.csv;
      variants_path.replace_filename(options.csv.stem().string() + "_variants.csv");
      std::ofstream vcsv(variants_path);
      for (const auto& r : pairs) vcsv << csv_join(r) << "\n";
      if (!csv || !vcsv) throw IoError("cannot write report CSV " + options.csv.string());
    }
    return failures == 0 ? kExitOk : kExitRuntime;
  });
}

}  // namespace tskd
