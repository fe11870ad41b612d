#include "tskd/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tskd/checkpoint.hpp"
#include "tskd/ops.hpp"
#include "tskd/rng.hpp"

namespace tskd {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Vanilla: return "vanilla";
    case Variant::Kd: return "kd";
    case Variant::At: return "at";
    case Variant::Tskd: return "tskd";
    case Variant::TskdFm: return "tskd_fm";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (auto v : {Variant::Vanilla, Variant::Kd, Variant::At, Variant::Tskd, Variant::TskdFm}) {
    if (variant_name(v) == name) return v;
  }
  throw ConfigError({"unknown variant '" + name + "' (expected vanilla, kd, at, tskd or tskd_fm)"});
}

bool uses_teacher(Variant v) { return v != Variant::Vanilla; }
bool is_temporal(Variant v) { return v == Variant::Tskd || v == Variant::TskdFm; }

std::uint64_t student_init_seed(std::uint64_t seed) { return derive_seed(seed, 0x57d0ULL); }
std::uint64_t lstm_init_seed(std::uint64_t seed) { return derive_seed(seed, 0x1575ULL); }
std::uint64_t data_order_seed(std::uint64_t seed) { return derive_seed(seed, 0xda7aULL); }

template <typename S>
TemporalExtractor<S> TemporalExtractor<S>::init(const ConvLstmConfig& config, std::size_t pairs,
                                                std::uint64_t seed) {
  TemporalExtractor out;
  for (std::size_t l = 0; l < pairs; ++l) {
    out.per_pair.push_back(ConvLstmParams<S>::init(config, derive_seed(seed, l)));
  }
  return out;
}

template <typename S>
ParamSet<S> TemporalExtractor<S>::parameters() const {
  ParamSet<S> out;
  for (std::size_t l = 0; l < per_pair.size(); ++l) {
    for (auto& p : per_pair[l].parameters()) out.push_back({"lstm" + std::to_string(l) + "." + p.name, p.tensor});
  }
  return out;
}

template <typename S>
std::uint64_t TemporalExtractor<S>::fingerprint() const {
  std::uint64_t h = fnv1a(nullptr, 0);
  for (const auto& p : parameters()) h = fnv1a(p.tensor.data().data(), p.tensor.numel() * sizeof(S), h);
  return h;
}

namespace {

template <typename S>
std::size_t count_correct_impl(const Tensor<S>& logits, std::span<const int> labels) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  auto d = logits.data();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (d[i * k + j] > d[i * k + best]) best = j;
    }
    if (static_cast<int>(best) == labels[i]) ++correct;
  }
  return correct;
}

template <typename S>
void check_finite(double value, const char* what) {
  if (!std::isfinite(value)) throw NumericError(std::string(what) + " is not finite");
}

}  // namespace

std::size_t count_correct(const Tensor<float>& logits, std::span<const int> labels) {
  return count_correct_impl(logits, labels);
}
std::size_t count_correct(const Tensor<double>& logits, std::span<const int> labels) {
  return count_correct_impl(logits, labels);
}

template <typename S>
StepStats<S> general_step(Cnn<S>& student, const Batch<S>& batch, SgdState<S>& sgd, int epoch) {
  auto out = student.forward(batch.images);
  auto loss = softmax_cross_entropy(out.logits, std::span<const int>(batch.labels));
  StepStats<S> stats;
  stats.loss_task = static_cast<double>(loss.item());
  check_finite<S>(stats.loss_task, "task loss");
  stats.correct = count_correct(out.logits, batch.labels);
  backward(loss);
  auto params = student.parameters();
  sgd_step(params, sgd, epoch);
  return stats;
}

template <typename S>
double ReviewGraph<S>::student_loss() const {
  return static_cast<double>(task.item()) + lambda * static_cast<double>(temporal.item());
}

template <typename S>
ReviewGraph<S> review_graph(const Cnn<S>& student, const Cnn<S>& teacher, const MemoryBank<S>& bank,
                            const TemporalExtractor<S>& extractor, const Batch<S>& batch, const DistillConfig& cfg,
                            int epoch) {
  if (bank.size() != static_cast<std::size_t>(cfg.k)) {
    throw ContractError("review step needs " + std::to_string(cfg.k) + " memorized snapshots, bank holds " +
                        std::to_string(bank.size()));
  }
  if (extractor.per_pair.size() != cfg.layer_pairs.size()) {
    throw ContractError("review step: one Conv-LSTM per layer pair required");
  }
  ReviewGraph<S> g;
  g.lambda = cfg.lambda;
  auto live = student.forward(batch.images);
  g.logits = live.logits;
  g.task = softmax_cross_entropy(live.logits, std::span<const int>(batch.labels));

  ForwardResult<S> target;
  std::vector<ForwardResult<S>> snaps;
  {
    NoGradGuard no_grad;
    target = teacher.forward(batch.images);
    for (const auto& e : bank.entries()) snaps.push_back(e.model.forward(batch.images));
  }

  const bool fm = cfg.sequence_mode == SequenceMode::FeatureMaps;
  const S lambda = static_cast<S>(cfg.lambda);
  for (std::size_t l = 0; l < cfg.layer_pairs.size(); ++l) {
    const auto& pair = cfg.layer_pairs[l];
    auto current = attention_map(scale_grad(find_tap(live.taps, pair.student_tap), lambda), cfg.normalize_maps, epoch);
    std::vector<AttentionMap<S>> maps;
    const std::size_t first = fm ? 1 : 0;
    for (std::size_t i = first; i < snaps.size(); ++i) {
      maps.push_back(attention_map(find_tap(snaps[i].taps, pair.student_tap), cfg.normalize_maps,
                                   bank.entries()[i].epoch));
    }
    maps.push_back(current);
    auto seq = build_knowledge_sequence(std::span<const AttentionMap<S>>(maps), cfg.sequence_mode, cfg.k);
    auto predicted = convlstm_predict(extractor.per_pair[l], std::span<const Tensor<S>>(seq.entries));
    auto teacher_map = attention_map(find_tap(target.taps, pair.teacher_tap), cfg.normalize_maps);
    auto goal = absolute_increment(teacher_map, current, cfg.detach_target);
    if (predicted.shape() != goal.values.shape()) {
      predicted = adaptive_avg_pool(predicted, goal.values.dim(1), goal.values.dim(2));
    }
    auto term = temporal_loss(predicted, goal);
    g.per_pair.push_back(term);
    g.temporal = g.temporal.defined() ? add(g.temporal, term) : term;
  }
  g.root = add(g.task, g.temporal);
  return g;
}

template <typename S>
ReviewOutcome<S> review_step(Cnn<S>& student, const Cnn<S>& teacher, const MemoryBank<S>& bank,
                             TemporalExtractor<S>& extractor, const Batch<S>& batch, const DistillConfig& cfg,
                             SgdState<S>& sgd, AdamState<S>& adam, int epoch) {
  auto g = review_graph(student, teacher, bank, extractor, batch, cfg, epoch);
  ReviewOutcome<S> out;
  out.loss_task = static_cast<double>(g.task.item());
  out.loss_temporal = static_cast<double>(g.temporal.item());
  out.loss_student = g.student_loss();
  for (const auto& t : g.per_pair) out.per_pair.push_back(static_cast<double>(t.item()));
  if (!std::isfinite(out.loss_student)) {
    std::ostringstream msg;
    msg << "non-finite loss at epoch " << epoch << ": L_task=" << out.loss_task << " L_temporal=" << out.loss_temporal;
    for (std::size_t l = 0; l < out.per_pair.size(); ++l) {
      msg << " [" << cfg.layer_pairs[l].student_tap << "/" << cfg.layer_pairs[l].teacher_tap << "]=" << out.per_pair[l];
    }
    throw NumericError(msg.str());
  }
  out.correct = count_correct(g.logits, batch.labels);
  backward(g.root);
  auto sp = student.parameters();
  sgd_step(sp, sgd, epoch);
  auto lp = extractor.parameters();
  adam_step(lp, adam);
  return out;
}

template <typename S>
StepStats<S> kd_step(Cnn<S>& student, const Cnn<S>& teacher, const Batch<S>& batch, const DistillConfig& cfg,
                     SgdState<S>& sgd, int epoch) {
  auto out = student.forward(batch.images);
  Tensor<S> teacher_logits;
  {
    NoGradGuard no_grad;
    teacher_logits = teacher.forward(batch.images).logits;
  }
  std::span<const int> labels(batch.labels);
  auto loss = kd_logits_loss(out.logits, teacher_logits, cfg.kd_temperature, cfg.kd_alpha, labels);
  StepStats<S> stats;
  {
    NoGradGuard no_grad;
    stats.loss_task = static_cast<double>(softmax_cross_entropy(out.logits, labels).item());
  }
  stats.loss_aux = static_cast<double>(loss.item());
  check_finite<S>(stats.loss_aux, "KD loss");
  stats.correct = count_correct(out.logits, batch.labels);
  backward(loss);
  auto params = student.parameters();
  sgd_step(params, sgd, epoch);
  return stats;
}

template <typename S>
StepStats<S> at_step(Cnn<S>& student, const Cnn<S>& teacher, const Batch<S>& batch, const DistillConfig& cfg,
                     double beta, SgdState<S>& sgd, int epoch) {
  auto out = student.forward(batch.images);
  ForwardResult<S> target;
  {
    NoGradGuard no_grad;
    target = teacher.forward(batch.images);
  }
  auto task = softmax_cross_entropy(out.logits, std::span<const int>(batch.labels));
  auto spatial = spatial_loss(out.taps, target.taps, std::span<const LayerPair>(cfg.layer_pairs));
  auto loss = student_loss(task, spatial, beta);
  StepStats<S> stats;
  stats.loss_task = static_cast<double>(task.item());
  stats.loss_aux = static_cast<double>(spatial.item());
  check_finite<S>(static_cast<double>(loss.item()), "AT loss");
  stats.correct = count_correct(out.logits, batch.labels);
  backward(loss);
  auto params = student.parameters();
  sgd_step(params, sgd, epoch);
  return stats;
}

template <typename S>
double calibrate_at_beta(const Cnn<S>& student, const Cnn<S>& teacher, const Batch<S>& batch,
                         const DistillConfig& cfg) {
  NoGradGuard no_grad;
  auto out = student.forward(batch.images);
  auto target = teacher.forward(batch.images);
  const double task = static_cast<double>(softmax_cross_entropy(out.logits, std::span<const int>(batch.labels)).item());
  const double spatial =
      static_cast<double>(spatial_loss(out.taps, target.taps, std::span<const LayerPair>(cfg.layer_pairs)).item());
  if (!(spatial > 0) || !std::isfinite(task / spatial)) return 1.0;
  return task / spatial;
}

template <typename S>
double evaluate(const Cnn<S>& model, const Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) return 0;
  NoGradGuard no_grad;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) idx.push_back(i);
    auto b = data.batch<S>(idx);
    correct += count_correct(model.forward(b.images).logits, b.labels);
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainingSchedule schedule_for(const RunOptions& options) {
  if (!is_temporal(options.variant)) return TrainingSchedule::all_general(options.epochs);
  return TrainingSchedule::build(options.epochs, options.distill.delta, options.distill.k, options.warmup_epochs);
}

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

Tensor<float> flat(const std::vector<float>& v) { return Tensor<float>(Shape{v.size()}, v); }

void copy_into(Tensor<float>& dst, const Tensor<float>& src, const std::string& name) {
  if (dst.numel() != src.numel()) throw FormatError("run state: size mismatch for '" + name + "'");
  std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin());
}

const Tensor<float>& lookup(const ParamSet<float>& set, const std::string& name) {
  for (const auto& t : set) {
    if (t.name == name) return t.tensor;
  }
  throw FormatError("run state: missing tensor '" + name + "'");
}

struct RunState {
  int next_epoch = 0;
  double best = 0;
  double last = 0;
  std::optional<double> at_beta;
};

void save_state(const fs::path& dir, const RunState& st, const Cnn<float>& student,
                const TemporalExtractor<float>& extractor, const SgdState<float>& sgd, const AdamState<float>& adam,
                const MemoryBank<float>& bank) {
  fs::create_directories(dir);
  ParamSet<float> tensors;
  for (const auto& p : student.parameters()) tensors.push_back({"student/" + p.name, p.tensor});
  for (std::size_t i = 0; i < sgd.velocity.size(); ++i) {
    if (!sgd.velocity[i].empty()) tensors.push_back({"sgd_v/" + std::to_string(i), flat(sgd.velocity[i])});
  }
  for (const auto& p : extractor.parameters()) tensors.push_back({"extractor/" + p.name, p.tensor});
  for (std::size_t i = 0; i < adam.m.size(); ++i) {
    if (adam.m[i].empty()) continue;
    tensors.push_back({"adam_m/" + std::to_string(i), flat(adam.m[i])});
    tensors.push_back({"adam_v/" + std::to_string(i), flat(adam.v[i])});
  }
  json bank_epochs = json::array();
  for (std::size_t j = 0; j < bank.entries().size(); ++j) {
    const auto& e = bank.entries()[j];
    bank_epochs.push_back(e.epoch);
    for (const auto& p : e.model.parameters()) tensors.push_back({"bank" + std::to_string(j) + "/" + p.name, p.tensor});
  }
  save_checkpoint(tensors, dir / "state.tskd");
  json manifest = {{"next_epoch", st.next_epoch},
                   {"best_test_acc", st.best},
                   {"last_test_acc", st.last},
                   {"bank_epochs", bank_epochs},
                   {"sgd_velocity_buffers", sgd.velocity.size()},
                   {"adam_steps", adam.steps},
                   {"adam_buffers", adam.m.size()}};
  if (st.at_beta) manifest["at_beta"] = *st.at_beta;
  const auto tmp = dir / "manifest.json.tmp";
  {
    std::ofstream out(tmp);
    out << manifest.dump(2) << '\n';
    if (!out) throw IoError("cannot write " + tmp.string());
  }
  fs::rename(tmp, dir / "manifest.json");
}

RunState load_state(const fs::path& dir, Cnn<float>& student, TemporalExtractor<float>& extractor,
                    SgdState<float>& sgd, AdamState<float>& adam, MemoryBank<float>& bank) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("no resumable state in " + dir.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw FormatError("run state manifest: " + std::string(e.what()));
  }
  const auto tensors = load_checkpoint(dir / "state.tskd");
  RunState st;
  st.next_epoch = manifest.at("next_epoch").get<int>();
  st.best = manifest.at("best_test_acc").get<double>();
  st.last = manifest.at("last_test_acc").get<double>();
  if (manifest.contains("at_beta")) st.at_beta = manifest["at_beta"].get<double>();

  for (auto& p : student.parameters()) copy_into(p.tensor, lookup(tensors, "student/" + p.name), p.name);
  sgd.velocity.assign(manifest.at("sgd_velocity_buffers").get<std::size_t>(), {});
  for (std::size_t i = 0; i < sgd.velocity.size(); ++i) {
    auto d = lookup(tensors, "sgd_v/" + std::to_string(i)).data();
    sgd.velocity[i].assign(d.begin(), d.end());
  }
  for (auto& p : extractor.parameters()) copy_into(p.tensor, lookup(tensors, "extractor/" + p.name), p.name);
  adam.steps = manifest.at("adam_steps").get<long long>();
  const auto adam_buffers = manifest.at("adam_buffers").get<std::size_t>();
  adam.m.assign(adam_buffers, {});
  adam.v.assign(adam_buffers, {});
  for (std::size_t i = 0; i < adam_buffers; ++i) {
    auto m = lookup(tensors, "adam_m/" + std::to_string(i)).data();
    auto v = lookup(tensors, "adam_v/" + std::to_string(i)).data();
    adam.m[i].assign(m.begin(), m.end());
    adam.v[i].assign(v.begin(), v.end());
  }
  bank.clear();
  const auto epochs = manifest.at("bank_epochs").get<std::vector<int>>();
  for (std::size_t j = 0; j < epochs.size(); ++j) {
    Cnn<float> snap(student.spec(), 0);
    ParamSet<float> values;
    for (const auto& p : snap.parameters()) {
      values.push_back({p.name, lookup(tensors, "bank" + std::to_string(j) + "/" + p.name)});
    }
    snap.load_parameters(values);
    bank.push(epochs[j], snap);
  }
  return st;
}

}  // namespace

RunResult run_training(const Cnn<float>* teacher, Cnn<float>& student, const Dataset& train, const Dataset& test,
                       const RunOptions& options, MetricsWriter* writer, const EpochCallback& on_epoch) {
  using Clock = std::chrono::steady_clock;
  if (uses_teacher(options.variant) && teacher == nullptr) {
    throw ContractError("variant " + variant_name(options.variant) + " requires a teacher");
  }
  if (options.batch_size == 0) throw ContractError("batch size must be positive");
  if (train.size() == 0) throw ContractError("empty training set");

  RunOptions opt = options;
  if (options.variant == Variant::TskdFm) opt.distill.sequence_mode = SequenceMode::FeatureMaps;
  if (options.variant == Variant::Tskd) opt.distill.sequence_mode = SequenceMode::Increments;
  const auto schedule = schedule_for(opt);
  const auto& dcfg = opt.distill;

  RunResult result;
  result.schedule_warning = schedule.warning();

  SgdState<float> sgd;
  sgd.learning_rate = opt.learning_rate;
  sgd.momentum = opt.momentum;
  sgd.milestones = opt.milestones;
  AdamState<float> adam;
  adam.learning_rate = opt.lstm_learning_rate;
  const bool temporal = is_temporal(opt.variant);
  TemporalExtractor<float> extractor;
  if (temporal) extractor = TemporalExtractor<float>::init(opt.lstm, dcfg.layer_pairs.size(), lstm_init_seed(opt.seed));
  MemoryBank<float> bank(static_cast<std::size_t>(std::max(1, dcfg.k)));

  RunState st;
  if (dcfg.at_beta) st.at_beta = dcfg.at_beta;
  if (opt.resume) {
    if (opt.state_dir.empty()) throw ContractError("resume requested without a state directory");
    st = load_state(opt.state_dir, student, extractor, sgd, adam, bank);
    result.start_epoch = st.next_epoch;
  }

  const std::uint64_t order_seed = data_order_seed(opt.seed);
  for (int epoch = st.next_epoch; epoch < opt.epochs; ++epoch) {
    const NodeKind kind = schedule.kind(epoch);
    const auto order = epoch_order(order_seed, epoch, train.size());
    double task_sum = 0, temporal_sum = 0;
    std::size_t correct = 0, batches = 0;
    double busy_ms = 0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t stop = std::min(order.size(), start + opt.batch_size);
      auto batch = train.batch<float>(std::span<const std::size_t>(order.data() + start, stop - start));
      const auto t0 = Clock::now();
      if (opt.variant == Variant::At && !st.at_beta) st.at_beta = calibrate_at_beta(student, *teacher, batch, dcfg);
      if (kind == NodeKind::Review) {
        auto r = review_step(student, *teacher, bank, extractor, batch, dcfg, sgd, adam, epoch);
        task_sum += r.loss_task;
        temporal_sum += r.loss_temporal;
        correct += r.correct;
      } else {
        StepStats<float> s;
        switch (opt.variant) {
          case Variant::Kd: s = kd_step(student, *teacher, batch, dcfg, sgd, epoch); break;
          case Variant::At: s = at_step(student, *teacher, batch, dcfg, *st.at_beta, sgd, epoch); break;
          default: s = general_step(student, batch, sgd, epoch); break;
        }
        task_sum += s.loss_task;
        correct += s.correct;
      }
      busy_ms += std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
      ++batches;
    }
    if (kind == NodeKind::Memory) bank.memorize(epoch, student, schedule);

    EpochMetrics m;
    m.epoch = epoch;
    m.node_kind = kind;
    m.loss_task = static_cast<float>(task_sum / static_cast<double>(batches));
    m.loss_temporal = static_cast<float>(temporal_sum / static_cast<double>(batches));
    m.train_acc = static_cast<float>(static_cast<double>(correct) / static_cast<double>(train.size()));
    const double test_acc = evaluate(student, test, opt.batch_size);
    m.test_acc = static_cast<float>(test_acc);
    m.lr = static_cast<float>(sgd.lr_at(epoch));
    m.ms_per_batch = opt.record_timing ? static_cast<float>(busy_ms / static_cast<double>(batches)) : 0.0f;

    st.best = std::max(st.best, test_acc);
    st.last = test_acc;
    st.next_epoch = epoch + 1;
    if (!opt.state_dir.empty()) save_state(opt.state_dir, st, student, extractor, sgd, adam, bank);
    if (writer) writer->write(m);
    result.metrics.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  result.best_test_acc = st.best;
  result.final_test_acc = st.last;
  result.at_beta = st.at_beta;
  return result;
}

#define TSKD_INSTANTIATE_TRAINER(S)                                                                                   \
  template struct TemporalExtractor<S>;                                                                               \
  template StepStats<S> general_step(Cnn<S>&, const Batch<S>&, SgdState<S>&, int);                                    \
  template struct ReviewGraph<S>;                                                                                     \
  template ReviewGraph<S> review_graph(const Cnn<S>&, const Cnn<S>&, const MemoryBank<S>&,                            \
                                       const TemporalExtractor<S>&, const Batch<S>&, const DistillConfig&, int);      \
  template ReviewOutcome<S> review_step(Cnn<S>&, const Cnn<S>&, const MemoryBank<S>&, TemporalExtractor<S>&,          \
                                        const Batch<S>&, const DistillConfig&, SgdState<S>&, AdamState<S>&, int);     \
  template StepStats<S> kd_step(Cnn<S>&, const Cnn<S>&, const Batch<S>&, const DistillConfig&, SgdState<S>&, int);    \
  template StepStats<S> at_step(Cnn<S>&, const Cnn<S>&, const Batch<S>&, const DistillConfig&, double, SgdState<S>&, \
                                int);                                                                                 \
  template double calibrate_at_beta(const Cnn<S>&, const Cnn<S>&, const Batch<S>&, const DistillConfig&);            \
  template double evaluate(const Cnn<S>&, const Dataset&, std::size_t);

TSKD_INSTANTIATE_TRAINER(float)
TSKD_INSTANTIATE_TRAINER(double)

}  // namespace tskd
