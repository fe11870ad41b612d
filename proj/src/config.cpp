#include "tskd/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tskd/rng.hpp"

namespace tskd {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Reads typed fields from one JSON object, collecting problems instead of
// throwing, and remembers which keys were consumed.
class Section {
 public:
  Section(const json* obj, std::string path, std::vector<std::string>& problems)
      : obj_(obj), path_(std::move(path)), problems_(problems) {
    if (obj_ && !obj_->is_object()) {
      problems_.push_back(path_ + ": expected an object");
      obj_ = nullptr;
    }
  }

  bool has(const std::string& key) const { return obj_ && obj_->contains(key); }
  const json* raw(const std::string& key) {
    seen_.insert(key);
    return has(key) ? &obj_->at(key) : nullptr;
  }
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename T>
  void get(const std::string& key, T& out) {
    const json* v = raw(key);
    if (!v || v->is_null()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw std::invalid_argument("expected true or false");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v->is_number_integer()) throw std::invalid_argument("expected an integer");
        if (std::is_unsigned_v<T> && v->get<long long>() < 0) throw std::invalid_argument("must be >= 0");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v->is_number()) throw std::invalid_argument("expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) throw std::invalid_argument("expected a string");
      }
      out = v->get<T>();
    } catch (const std::exception& e) {
      problems_.push_back(where(key) + ": " + e.what());
    }
  }

  void reject_unknown() const {
    if (!obj_) return;
    for (const auto& [k, _] : obj_->items()) {
      if (!seen_.count(k)) problems_.push_back(where(k) + ": unknown key");
    }
  }

 private:
  const json* obj_;
  std::string path_;
  std::vector<std::string>& problems_;
  std::set<std::string> seen_;
};

fs::path resolve_input(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute()) return p;
  return (base / p).lexically_normal();
}

void parse_model(Section s, ModelConfig& m, std::vector<std::string>& problems) {
  s.get("arch", m.arch);
  if (const json* w = s.raw("widths"); w && !w->is_null()) {
    std::vector<std::size_t> widths;
    bool ok = w->is_array() && !w->empty();
    if (ok) {
      for (const auto& x : *w) {
        if (!x.is_number_integer() || x.get<long long>() <= 0) ok = false;
        else widths.push_back(x.get<std::size_t>());
      }
    }
    if (ok) m.widths = widths;
    else problems.push_back(s.where("widths") + ": expected a non-empty list of positive integers");
  }
  if (const json* b = s.raw("blocks_per_stage"); b && !b->is_null()) {
    if (b->is_number_integer() && b->get<long long>() > 0) m.blocks_per_stage = b->get<std::size_t>();
    else problems.push_back(s.where("blocks_per_stage") + ": expected a positive integer");
  }
  s.reject_unknown();
}

json model_json(const ModelConfig& m) {
  json j = {{"arch", m.arch}};
  j["widths"] = m.widths ? json(*m.widths) : json(nullptr);
  j["blocks_per_stage"] = m.blocks_per_stage ? json(*m.blocks_per_stage) : json(nullptr);
  return j;
}

std::string seq_mode_name(SequenceMode m) { return m == SequenceMode::Increments ? "increments" : "feature_maps"; }

std::array<std::size_t, 3> idx_image_dims(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::uint8_t head[16] = {};
  in.read(reinterpret_cast<char*>(head), 16);
  if (in.gcount() < 16) throw FormatError("IDX images " + path.string() + ": header truncated");
  auto be = [&](int o) {
    return static_cast<std::size_t>((std::uint32_t{head[o]} << 24) | (std::uint32_t{head[o + 1]} << 16) |
                                    (std::uint32_t{head[o + 2]} << 8) | std::uint32_t{head[o + 3]});
  };
  return {be(4), be(8), be(12)};
}

CnnSpec build_spec(const ModelConfig& m, ModelRole role, std::size_t classes, std::size_t c, std::size_t h,
                   std::size_t w) {
  CnnSpec spec;
  if (m.arch == "default_teacher") {
    spec = CnnSpec::default_teacher(classes, c, h, w);
  } else if (m.arch == "default_student") {
    spec = CnnSpec::default_student(classes, c, h, w);
  } else {
    throw ConfigError({"unknown architecture '" + m.arch + "' (expected default_teacher or default_student)"});
  }
  spec.role = role;
  if (m.widths) spec.widths = *m.widths;
  if (m.blocks_per_stage) spec.blocks_per_stage = *m.blocks_per_stage;
  return spec;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir, std::vector<std::string>* warnings) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("config is not valid JSON: ") + e.what()});
  }
  std::vector<std::string> problems;
  if (!root.is_object()) throw ConfigError({"config root must be a JSON object"});

  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  Section top(&root, "", problems);
  top.get("seed", cfg.seed);
  top.get("output_dir", cfg.output_dir);
  top.get("epochs", cfg.epochs);
  top.get("warmup_epochs", cfg.warmup_epochs);
  top.get("record_timing", cfg.record_timing);
  std::string variant = variant_name(cfg.variant);
  top.get("variant", variant);
  try {
    cfg.variant = parse_variant(variant);
  } catch (const ConfigError& e) {
    problems.push_back("variant: " + e.problems().front());
  }

  {
    Section s(top.raw("dataset"), "dataset", problems);
    auto& d = cfg.dataset;
    s.get("kind", d.kind);
    s.get("seed", d.seed);
    s.get("train_per_class", d.train_per_class);
    s.get("test_per_class", d.test_per_class);
    s.get("classes", d.classes);
    s.get("size", d.size);
    s.get("noise", d.noise);
    s.get("jitter", d.jitter);
    std::string ti, tl, vi, vl;
    s.get("train_images", ti);
    s.get("train_labels", tl);
    s.get("test_images", vi);
    s.get("test_labels", vl);
    d.train_images = resolve_input(ti, base_dir);
    d.train_labels = resolve_input(tl, base_dir);
    d.test_images = resolve_input(vi, base_dir);
    d.test_labels = resolve_input(vl, base_dir);
    s.get("train_limit", d.train_limit);
    s.get("test_limit", d.test_limit);
    s.reject_unknown();
  }
  {
    Section s(top.raw("teacher"), "teacher", problems);
    std::string arch = cfg.teacher.arch;
    s.get("arch", arch);
    s.get("epochs", cfg.teacher_epochs);
    s.get("checkpoint", cfg.teacher_checkpoint);
    cfg.teacher.arch = arch;
    // Shape overrides share the model parser; it re-reads "arch".
    const json* t = root.contains("teacher") ? &root["teacher"] : nullptr;
    if (t && t->is_object()) {
      json model = json::object();
      for (const char* k : {"arch", "widths", "blocks_per_stage"}) {
        if (t->contains(k)) model[k] = (*t)[k];
      }
      parse_model(Section(&model, "teacher", problems), cfg.teacher, problems);
      s.raw("widths");
      s.raw("blocks_per_stage");
    }
    s.reject_unknown();
  }
  parse_model(Section(top.raw("student"), "student", problems), cfg.student, problems);
  {
    Section s(top.raw("distill"), "distill", problems);
    auto& d = cfg.distill;
    s.get("lambda", d.lambda);
    s.get("k", d.k);
    s.get("delta", d.delta);
    s.get("normalize_maps", d.normalize_maps);
    s.get("detach_target", d.detach_target);
    s.get("kd_temperature", d.kd_temperature);
    s.get("kd_alpha", d.kd_alpha);
    if (const json* b = s.raw("at_beta"); b && !b->is_null()) {
      if (b->is_number()) d.at_beta = b->get<double>();
      else problems.push_back("distill.at_beta: expected a number or null");
    }
    std::string mode = seq_mode_name(d.sequence_mode);
    s.get("sequence_mode", mode);
    if (mode == "increments") d.sequence_mode = SequenceMode::Increments;
    else if (mode == "feature_maps") d.sequence_mode = SequenceMode::FeatureMaps;
    else problems.push_back("distill.sequence_mode: expected increments or feature_maps, got '" + mode + "'");
    if (const json* lp = s.raw("layer_pairs"); lp && !lp->is_null()) {
      std::vector<LayerPair> pairs;
      bool ok = lp->is_array();
      if (ok) {
        for (const auto& p : *lp) {
          if (p.is_array() && p.size() == 2 && p[0].is_string() && p[1].is_string()) {
            pairs.push_back({p[0].get<std::string>(), p[1].get<std::string>()});
          } else {
            ok = false;
          }
        }
      }
      if (ok) d.layer_pairs = pairs;
      else problems.push_back("distill.layer_pairs: expected a list of [student_tap, teacher_tap] pairs");
    }
    s.reject_unknown();
  }
  {
    Section s(top.raw("lstm"), "lstm", problems);
    s.get("hidden_channels", cfg.lstm.hidden_channels);
    s.get("kernel_size", cfg.lstm.kernel_size);
    s.get("learning_rate", cfg.lstm_learning_rate);
    s.reject_unknown();
  }
  {
    Section s(top.raw("optimizer"), "optimizer", problems);
    auto& o = cfg.optimizer;
    s.get("learning_rate", o.learning_rate);
    s.get("momentum", o.momentum);
    s.get("batch_size", o.batch_size);
    if (const json* ms = s.raw("milestones"); ms && !ms->is_null()) {
      bool ok = ms->is_array();
      std::vector<LrMilestone> out;
      if (ok) {
        for (const auto& m : *ms) {
          if (m.is_array() && m.size() == 2 && m[0].is_number_integer() && m[1].is_number()) {
            out.push_back({m[0].get<int>(), m[1].get<double>()});
          } else {
            ok = false;
          }
        }
      }
      if (ok) o.milestones = out;
      else problems.push_back("optimizer.milestones: expected a list of [epoch, multiplier] pairs");
    }
    s.reject_unknown();
  }
  {
    Section s(top.raw("probe"), "probe", problems);
    auto& p = cfg.probe;
    s.get("hidden", p.hidden);
    s.get("samples", p.samples);
    s.get("batch_size", p.batch_size);
    s.get("learning_rate", p.learning_rate);
    s.get("momentum", p.momentum);
    s.get("epochs", p.epochs);
    s.get("trace_epochs", p.trace_epochs);
    s.get("horizon", p.horizon);
    s.get("tap", p.tap);
    s.get("unit", p.unit);
    s.get("probe_input", p.probe_input);
    if (const json* o = s.raw("order"); o && !o->is_null()) {
      if (o->is_array() && o->size() == 3 && std::all_of(o->begin(), o->end(), [](const json& x) {
            return x.is_number_integer() && x.get<long long>() >= 0;
          })) {
        p.order = {(*o)[0].get<int>(), (*o)[1].get<int>(), (*o)[2].get<int>()};
      } else {
        problems.push_back("probe.order: expected [p, d, q] with nonnegative integers");
      }
    }
    s.reject_unknown();
  }
  top.reject_unknown();

  if (warnings) {
    const bool temporal = is_temporal(cfg.variant);
    const auto& d = root.contains("distill") && root["distill"].is_object() ? root["distill"] : json::object();
    auto note = [&](const char* key, bool relevant) {
      if (d.contains(key) && !relevant) {
        warnings->push_back("distill." + std::string(key) + " is ignored for variant " + variant_name(cfg.variant));
      }
    };
    for (const char* k : {"lambda", "k", "delta", "sequence_mode", "detach_target"}) note(k, temporal);
    note("normalize_maps", temporal);
    note("kd_temperature", cfg.variant == Variant::Kd);
    note("kd_alpha", cfg.variant == Variant::Kd);
    note("at_beta", cfg.variant == Variant::At);
    note("layer_pairs", temporal || cfg.variant == Variant::At);
    if (root.contains("lstm") && !temporal) {
      warnings->push_back("lstm settings are ignored for variant " + variant_name(cfg.variant));
    }
    if (d.contains("sequence_mode") && cfg.variant == Variant::TskdFm) {
      warnings->push_back("distill.sequence_mode is ignored: variant tskd_fm always uses feature maps");
    }
  }
  if (!problems.empty()) throw ConfigError(problems);
  return cfg;
}

ExperimentConfig load_config(const fs::path& path, std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read config file " + path.string()});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), fs::absolute(path).parent_path(), warnings);
}

fs::path output_root() {
  if (const char* env = std::getenv("TSKD_OUTPUT_ROOT"); env && *env) return fs::path(env);
  return fs::current_path();
}

fs::path resolve_output(const std::string& path_template, const ExperimentConfig& cfg) {
  std::string s = path_template;
  auto replace = [&s](const std::string& key, const std::string& value) {
    for (std::size_t pos; (pos = s.find(key)) != std::string::npos;) s.replace(pos, key.size(), value);
  };
  replace("{variant}", variant_name(cfg.variant));
  replace("{seed}", std::to_string(cfg.seed));
  fs::path p(s);
  if (p.is_absolute()) return p;
  return (output_root() / p).lexically_normal();
}

fs::path run_dir(const ExperimentConfig& cfg) { return resolve_output(cfg.output_dir, cfg); }
fs::path teacher_checkpoint_path(const ExperimentConfig& cfg) { return resolve_output(cfg.teacher_checkpoint, cfg); }

namespace {

std::array<std::size_t, 4> data_shape(const ExperimentConfig& cfg) {
  if (cfg.dataset.kind == "idx") {
    auto dims = idx_image_dims(cfg.dataset.train_images);
    return {1, dims[1], dims[2], 10};
  }
  return {1, cfg.dataset.size, cfg.dataset.size, cfg.dataset.classes};
}

}  // namespace

CnnSpec teacher_spec(const ExperimentConfig& cfg, const Dataset& d) {
  return build_spec(cfg.teacher, ModelRole::Teacher, d.classes, d.channels, d.height, d.width);
}
CnnSpec student_spec(const ExperimentConfig& cfg, const Dataset& d) {
  return build_spec(cfg.student, ModelRole::Student, d.classes, d.channels, d.height, d.width);
}
CnnSpec teacher_spec(const ExperimentConfig& cfg) {
  auto s = data_shape(cfg);
  return build_spec(cfg.teacher, ModelRole::Teacher, s[3], s[0], s[1], s[2]);
}
CnnSpec student_spec(const ExperimentConfig& cfg) {
  auto s = data_shape(cfg);
  return build_spec(cfg.student, ModelRole::Student, s[3], s[0], s[1], s[2]);
}

void validate_config(const ExperimentConfig& cfg, Command command) {
  std::vector<std::string> problems;
  const auto& d = cfg.dataset;
  if (cfg.epochs < 1) problems.push_back("epochs: must be >= 1");
  if (cfg.teacher_epochs < 1) problems.push_back("teacher.epochs: must be >= 1");
  if (cfg.warmup_epochs < 0) problems.push_back("warmup_epochs: must be >= 0");
  if (cfg.optimizer.learning_rate < 0) problems.push_back("optimizer.learning_rate: must be >= 0");
  if (cfg.optimizer.momentum < 0 || cfg.optimizer.momentum >= 1) problems.push_back("optimizer.momentum: must lie in [0, 1)");
  if (cfg.optimizer.batch_size == 0) problems.push_back("optimizer.batch_size: must be positive");
  if (cfg.lstm_learning_rate <= 0) problems.push_back("lstm.learning_rate: must be positive");
  if (cfg.lstm.hidden_channels == 0) problems.push_back("lstm.hidden_channels: must be positive");
  if (cfg.lstm.kernel_size % 2 == 0) problems.push_back("lstm.kernel_size: must be odd");
  if (cfg.output_dir.empty()) problems.push_back("output_dir: must not be empty");

  bool data_ok = true;
  if (command != Command::ProbeArima) {
    if (d.kind == "synthetic") {
      if (d.classes < 2) problems.push_back("dataset.classes: must be >= 2");
      if (d.size < 8) problems.push_back("dataset.size: must be >= 8");
      if (d.train_per_class == 0) problems.push_back("dataset.train_per_class: must be positive");
      if (d.test_per_class == 0) problems.push_back("dataset.test_per_class: must be positive");
      if (d.noise < 0) problems.push_back("dataset.noise: must be >= 0");
    } else if (d.kind == "idx") {
      for (const auto& [key, p] : {std::pair{"dataset.train_images", d.train_images},
                                   std::pair{"dataset.train_labels", d.train_labels},
                                   std::pair{"dataset.test_images", d.test_images},
                                   std::pair{"dataset.test_labels", d.test_labels}}) {
        if (p.empty()) {
          problems.push_back(std::string(key) + ": required for idx datasets");
          data_ok = false;
        } else if (!fs::exists(p)) {
          problems.push_back(std::string(key) + ": file not found: " + p.string());
          data_ok = false;
        }
      }
    } else {
      problems.push_back("dataset.kind: expected synthetic or idx, got '" + d.kind + "'");
      data_ok = false;
    }
  }

  if (command == Command::Distill) {
    for (const auto& p : cfg.distill.problems()) problems.push_back("distill: " + p);
    if (uses_teacher(cfg.variant) && !fs::exists(teacher_checkpoint_path(cfg))) {
      problems.push_back("teacher.checkpoint: file not found: " + teacher_checkpoint_path(cfg).string() +
                         " (run train-teacher first)");
    }
  }
  if (command != Command::ProbeArima && data_ok) {
    try {
      const auto ts = teacher_spec(cfg);
      const auto ss = student_spec(cfg);
      ts.validate();
      ss.validate();
      if (command == Command::Distill && (is_temporal(cfg.variant) || cfg.variant == Variant::At)) {
        const auto tn = ts.tap_names(), sn = ss.tap_names();
        for (const auto& lp : cfg.distill.layer_pairs) {
          if (std::find(sn.begin(), sn.end(), lp.student_tap) == sn.end()) {
            problems.push_back("distill.layer_pairs: student has no tap '" + lp.student_tap + "'");
          }
          if (std::find(tn.begin(), tn.end(), lp.teacher_tap) == tn.end()) {
            problems.push_back("distill.layer_pairs: teacher has no tap '" + lp.teacher_tap + "'");
          }
        }
      }
    } catch (const ConfigError& e) {
      for (const auto& p : e.problems()) problems.push_back(p);
    } catch (const Error& e) {
      problems.push_back(e.what());
    }
  }

  if (command == Command::ProbeArima) {
    const auto& p = cfg.probe;
    if (p.hidden == 0) problems.push_back("probe.hidden: must be positive");
    if (p.samples < 2) problems.push_back("probe.samples: must be >= 2");
    if (p.batch_size == 0) problems.push_back("probe.batch_size: must be positive");
    if (p.tap != "fc1" && p.tap != "fc2") problems.push_back("probe.tap: expected fc1 or fc2");
    if (p.tap == "fc1" && p.unit >= p.hidden) problems.push_back("probe.unit: out of range for fc1");
    if (p.tap == "fc2" && p.unit != 0) problems.push_back("probe.unit: fc2 has a single unit");
    if (p.horizon < 0) problems.push_back("probe.horizon: must be >= 0");
    const int need = p.order[0] + p.order[1] + p.order[2] + 10;
    if (p.trace_epochs < need) {
      problems.push_back("probe.trace_epochs: order (" + std::to_string(p.order[0]) + "," + std::to_string(p.order[1]) +
                         "," + std::to_string(p.order[2]) + ") needs at least " + std::to_string(need) + " epochs");
    }
    if (p.epochs < p.trace_epochs) problems.push_back("probe.epochs: must be >= probe.trace_epochs");
  }
  if (!problems.empty()) throw ConfigError(problems);
}

std::string effective_config_json(const ExperimentConfig& cfg) {
  const auto& d = cfg.dataset;
  json pairs = json::array();
  for (const auto& p : cfg.distill.layer_pairs) pairs.push_back({p.student_tap, p.teacher_tap});
  json milestones = json::array();
  for (const auto& m : cfg.optimizer.milestones) milestones.push_back({m.epoch, m.multiplier});
  json j = {
      {"seed", cfg.seed},
      {"output_dir", run_dir(cfg).string()},
      {"variant", variant_name(cfg.variant)},
      {"epochs", cfg.epochs},
      {"warmup_epochs", cfg.warmup_epochs},
      {"record_timing", cfg.record_timing},
      {"dataset",
       {{"kind", d.kind},
        {"seed", d.seed},
        {"train_per_class", d.train_per_class},
        {"test_per_class", d.test_per_class},
        {"classes", d.classes},
        {"size", d.size},
        {"noise", d.noise},
        {"jitter", d.jitter},
        {"train_images", d.train_images.string()},
        {"train_labels", d.train_labels.string()},
        {"test_images", d.test_images.string()},
        {"test_labels", d.test_labels.string()},
        {"train_limit", d.train_limit},
        {"test_limit", d.test_limit}}},
      {"student", model_json(cfg.student)},
      {"distill",
       {{"lambda", cfg.distill.lambda},
        {"k", cfg.distill.k},
        {"delta", cfg.distill.delta},
        {"layer_pairs", pairs},
        {"sequence_mode", seq_mode_name(cfg.distill.sequence_mode)},
        {"normalize_maps", cfg.distill.normalize_maps},
        {"detach_target", cfg.distill.detach_target},
        {"kd_temperature", cfg.distill.kd_temperature},
        {"kd_alpha", cfg.distill.kd_alpha},
        {"at_beta", cfg.distill.at_beta ? json(*cfg.distill.at_beta) : json(nullptr)}}},
      {"lstm",
       {{"hidden_channels", cfg.lstm.hidden_channels},
        {"kernel_size", cfg.lstm.kernel_size},
        {"learning_rate", cfg.lstm_learning_rate}}},
      {"optimizer",
       {{"learning_rate", cfg.optimizer.learning_rate},
        {"momentum", cfg.optimizer.momentum},
        {"batch_size", cfg.optimizer.batch_size},
        {"milestones", milestones}}},
      {"probe",
       {{"hidden", cfg.probe.hidden},
        {"samples", cfg.probe.samples},
        {"batch_size", cfg.probe.batch_size},
        {"learning_rate", cfg.probe.learning_rate},
        {"momentum", cfg.probe.momentum},
        {"epochs", cfg.probe.epochs},
        {"trace_epochs", cfg.probe.trace_epochs},
        {"horizon", cfg.probe.horizon},
        {"tap", cfg.probe.tap},
        {"unit", cfg.probe.unit},
        {"probe_input", cfg.probe.probe_input},
        {"order", cfg.probe.order}}},
  };
  json teacher = model_json(cfg.teacher);
  teacher["epochs"] = cfg.teacher_epochs;
  teacher["checkpoint"] = teacher_checkpoint_path(cfg).string();
  j["teacher"] = teacher;
  return j.dump(2) + "\n";
}

DataSplit load_data(const ExperimentConfig& cfg) {
  const auto& d = cfg.dataset;
  DataSplit out;
  if (d.kind == "idx") {
    out.train = load_idx(d.train_images, d.train_labels);
    out.test = load_idx(d.test_images, d.test_labels);
    if (d.train_limit) out.train = out.train.head(d.train_limit);
    if (d.test_limit) out.test = out.test.head(d.test_limit);
    out.test.classes = out.train.classes = std::max(out.train.classes, out.test.classes);
    out.train.split = "train";
    out.test.split = "test";
    return out;
  }
  SynthParams p;
  p.seed = derive_seed(d.seed, 1);
  p.n_per_class = d.train_per_class;
  p.classes = d.classes;
  p.size = d.size;
  p.noise = d.noise;
  p.jitter = d.jitter;
  out.train = synth_dataset(p);
  out.train.split = "train";
  p.seed = derive_seed(d.seed, 2);
  p.n_per_class = d.test_per_class;
  out.test = synth_dataset(p);
  out.test.split = "test";
  return out;
}

RunOptions run_options(const ExperimentConfig& cfg, Variant variant, int epochs) {
  RunOptions o;
  o.variant = variant;
  o.seed = cfg.seed;
  o.epochs = epochs;
  o.warmup_epochs = cfg.warmup_epochs;
  o.batch_size = cfg.optimizer.batch_size;
  o.learning_rate = cfg.optimizer.learning_rate;
  o.momentum = cfg.optimizer.momentum;
  o.milestones = cfg.optimizer.milestones;
  o.distill = cfg.distill;
  o.lstm = cfg.lstm;
  o.lstm_learning_rate = cfg.lstm_learning_rate;
  o.record_timing = cfg.record_timing;
  return o;
}

}  // namespace tskd
