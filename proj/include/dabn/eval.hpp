#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dabn/adapter.hpp"
#include "dabn/checkpoint.hpp"
#include "dabn/data.hpp"
#include "dabn/train.hpp"

namespace dabn {

enum class ExperimentKind {
  LowerBaseline,
  UpperBaseline,
  UnsupervisedBatch,
  SupervisedBatch,
  SupervisedBaseline,
  OnlineUnrandomized,
  OnlineRandomized,
};

inline const char* kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::LowerBaseline: return "lower-baseline";
    case ExperimentKind::UpperBaseline: return "upper-baseline";
    case ExperimentKind::UnsupervisedBatch: return "unsupervised-batch";
    case ExperimentKind::SupervisedBatch: return "supervised-batch";
    case ExperimentKind::SupervisedBaseline: return "supervised-baseline";
    case ExperimentKind::OnlineUnrandomized: return "online-unrandomized";
    case ExperimentKind::OnlineRandomized: return "online-randomized";
  }
  return "?";
}

inline ExperimentKind kind_from_name(const std::string& name) {
  for (const ExperimentKind k :
       {ExperimentKind::LowerBaseline, ExperimentKind::UpperBaseline,
        ExperimentKind::UnsupervisedBatch, ExperimentKind::SupervisedBatch,
        ExperimentKind::SupervisedBaseline, ExperimentKind::OnlineUnrandomized,
        ExperimentKind::OnlineRandomized})
    if (name == kind_name(k)) return k;
  throw std::invalid_argument("unknown experiment kind: " + name);
}

inline bool is_online_kind(ExperimentKind k) {
  return k == ExperimentKind::OnlineUnrandomized || k == ExperimentKind::OnlineRandomized;
}

inline bool is_batch_kind(ExperimentKind k) {
  return k == ExperimentKind::UnsupervisedBatch || k == ExperimentKind::SupervisedBatch ||
         k == ExperimentKind::SupervisedBaseline;
}

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::LowerBaseline;
  double momentum = 0.01;            // online kinds
  double pre_fraction = 0.1;         // batch kinds
  std::size_t fine_tune_epochs = 10; // supervised kinds
  std::size_t repeats = 5;           // online-randomized
  std::uint64_t seed = 0;
  bool keep_records = false;         // retain per-window records per fold

  void validate() const {
    if (is_online_kind(kind)) check_momentum(momentum);
    if (is_batch_kind(kind)) {
      if (!(pre_fraction > 0.0 && pre_fraction < 1.0))
        throw std::invalid_argument("pre_fraction must lie in (0,1)");
    }
    if (kind == ExperimentKind::OnlineRandomized && repeats == 0)
      throw std::invalid_argument("online-randomized needs repeats >= 1");
  }
};

struct FoldResult {
  std::string target;
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::vector<double> repeat_accuracies;  // online-randomized
  std::vector<StreamRecord> records;      // optional per-window records
  std::vector<std::string> truths;        // aligned with records
  double wall_ms = 0.0;
};

struct SummaryTable {
  std::vector<std::pair<std::string, double>> fold_accuracies;  // (target, accuracy)
  double median = 0.0;
  double mean = 0.0;
  std::string baseline_run_id;
  std::vector<std::pair<std::string, double>> deltas;  // result - baseline per target
  double top_mean = 0.0;   // mean accuracy over the top slice (by baseline accuracy)
  double flop_mean = 0.0;  // mean accuracy over the bottom slice
  std::size_t slice_size = 0;
};

// Shared evaluation settings: fold-model cache directory (empty disables
// caching), fold-level parallelism and a training-invocation counter.
struct EvalContext {
  std::string cache_dir;
  std::size_t threads = 1;
  std::shared_ptr<std::atomic<std::size_t>> trainings =
      std::make_shared<std::atomic<std::size_t>>(0);
};

// ---------------------------------------------------------------------------
// Evaluation helpers
// ---------------------------------------------------------------------------

// Batched global-statistics evaluation (chunked); the single-window and
// streaming paths must agree with this bit-exactly.
inline std::vector<std::size_t> global_stats_labels(const TrainedModel& model,
                                                    std::span<const Window> windows,
                                                    std::size_t chunk = 256) {
  std::vector<std::size_t> out;
  out.reserve(windows.size());
  for (std::size_t start = 0; start < windows.size(); start += chunk) {
    const std::size_t n = std::min(chunk, windows.size() - start);
    const auto [logits, cache] =
        forward(model, windows.subspan(start, n), BnMode::GlobalStats, false, nullptr);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < logits.cols; ++c)
        if (logits(i, c) > logits(i, best)) best = c;
      out.push_back(best);
    }
  }
  return out;
}

// Re-estimates the running statistics as plain batch moments of the
// normalization-layer inputs over the given windows.
inline void reestimate_bn_statistics(TrainedModel& model, std::span<const Window> windows) {
  if (windows.empty())
    throw std::invalid_argument("reestimate_bn_statistics: empty window set");
  const Matrix z = bn_layer_inputs(model, windows);
  std::vector<double> col(windows.size());
  for (std::size_t l = 0; l < model.bn.width(); ++l) {
    for (std::size_t i = 0; i < windows.size(); ++i) col[i] = z(i, l);
    const BatchMoments m = batch_moments(col);
    model.bn.channels[l].running_mean = m.mean;
    model.bn.channels[l].running_var = m.var;
  }
}

// Stratified-by-label split: the first side receives floor(frac * N) windows
// overall, apportioned per label by largest remainder so every class stays
// represented even for small fractions.
inline std::pair<std::vector<Window>, std::vector<Window>> split_stratified(
    std::span<const Window> windows, double frac, Rng& rng) {
  if (!(frac > 0.0 && frac < 1.0))
    throw std::invalid_argument("split_stratified: fraction must lie in (0,1)");
  std::vector<std::string> labels;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto it = std::find(labels.begin(), labels.end(), windows[i].label);
    if (it == labels.end()) {
      labels.push_back(windows[i].label);
      groups.push_back({i});
    } else {
      groups[static_cast<std::size_t>(it - labels.begin())].push_back(i);
    }
  }
  const std::size_t target_total =
      static_cast<std::size_t>(frac * static_cast<double>(windows.size()));

  std::vector<std::size_t> quota(groups.size());
  std::vector<std::pair<double, std::size_t>> remainder;  // (fraction part, class idx)
  std::size_t assigned = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double exact = frac * static_cast<double>(groups[g].size());
    quota[g] = static_cast<std::size_t>(exact);
    assigned += quota[g];
    remainder.push_back({exact - static_cast<double>(quota[g]), g});
  }
  std::stable_sort(remainder.begin(), remainder.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t i = 0; assigned < target_total && i < remainder.size(); ++i) {
    ++quota[remainder[i].second];
    ++assigned;
  }

  std::pair<std::vector<Window>, std::vector<Window>> out;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    rng.shuffle(groups[g]);
    std::vector<std::size_t> sorted_take(groups[g].begin(),
                                         groups[g].begin() + static_cast<std::ptrdiff_t>(
                                                                 std::min(quota[g],
                                                                          groups[g].size())));
    std::vector<bool> taken(windows.size(), false);
    for (const std::size_t i : sorted_take) taken[i] = true;
    for (const std::size_t i : groups[g])
      (taken[i] ? out.first : out.second).push_back(windows[i]);
  }
  if (out.first.empty() || out.second.empty())
    throw std::invalid_argument("split yields an empty side");
  return out;
}

// ---------------------------------------------------------------------------
// Per-fold experiment paths
// ---------------------------------------------------------------------------

// Streams the target windows through an adapter, in dataset order or over
// `repeats` uniform shuffles with a fresh adapter each. The diagnostics sink,
// when given, receives the first pass.
inline FoldResult run_online(const TrainedModel& model, std::span<const Window> target_windows,
                             double momentum, bool randomized, std::size_t repeats,
                             std::uint64_t seed, bool adaptation_enabled = true,
                             bool keep_records = false, std::ostream* diag_sink = nullptr) {
  if (target_windows.empty()) throw std::invalid_argument("run_online: empty target stream");
  check_momentum(momentum);
  if (!randomized) repeats = 1;
  if (repeats == 0) throw std::invalid_argument("run_online: repeats must be >= 1");

  FoldResult fold;
  fold.target = target_windows.front().subject;
  for (std::size_t r = 0; r < repeats; ++r) {
    std::vector<std::size_t> order(target_windows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (randomized) {
      Rng rng = substream(seed, "order", r);
      rng.shuffle(order);
    }
    StreamAdapter adapter(model, momentum, adaptation_enabled);
    if (r == 0 && diag_sink) adapter.attach_sink(*diag_sink);
    std::size_t correct = 0;
    for (const std::size_t i : order) {
      const Window& w = target_windows[i];
      const StreamRecord rec = adapter.adapt_and_classify(w);
      if (rec.predicted == w.label) ++correct;
      if (r == 0 && keep_records) {
        fold.records.push_back(rec);
        fold.truths.push_back(w.label);
      }
    }
    if (r == 0 && diag_sink) adapter.detach_sink();
    fold.repeat_accuracies.push_back(static_cast<double>(correct) /
                                     static_cast<double>(target_windows.size()));
    if (r == 0) {
      fold.correct = correct;
      fold.total = target_windows.size();
    }
  }
  double sum = 0.0;
  for (const double a : fold.repeat_accuracies) sum += a;
  fold.accuracy = sum / static_cast<double>(fold.repeat_accuracies.size());
  return fold;
}

// Static batch adaptation: random stratified split of the target windows,
// statistics re-estimated as plain batch moments of the pre-estimation set's
// layer inputs (optionally after supervised weight tuning on that set), then
// evaluation on the remaining fraction only.
inline FoldResult run_batch_da(const TrainedModel& model, std::span<const Window> target_windows,
                               double pre_fraction, bool supervised,
                               std::size_t fine_tune_epochs, std::uint64_t seed,
                               bool reestimate = true) {
  if (target_windows.empty()) throw std::invalid_argument("run_batch_da: empty target set");
  Rng rng = substream(seed, "pre-split");
  const auto [pre, test] = split_stratified(target_windows, pre_fraction, rng);

  TrainedModel local = model;
  if (supervised) fine_tune(local, pre, fine_tune_epochs, model.hyper, seed);
  if (reestimate) reestimate_bn_statistics(local, pre);

  const std::vector<std::size_t> labels = global_stats_labels(local, test);
  FoldResult fold;
  fold.target = target_windows.front().subject;
  fold.total = test.size();
  for (std::size_t i = 0; i < test.size(); ++i)
    if (local.label_map[labels[i]] == test[i].label) ++fold.correct;
  fold.accuracy = static_cast<double>(fold.correct) / static_cast<double>(fold.total);
  return fold;
}

namespace detail {

// Personal per-user model: stratified 80/20 train/test split, early stopping
// on a 10% validation slice of the training side, evaluation on the test side.
inline FoldResult upper_baseline_fold(const Dataset& ds, std::size_t target_idx,
                                      const ArchConfig& arch, const TrainHyper& hyper,
                                      std::uint64_t fold_seed, EvalContext& ctx) {
  const auto& all = ds.windows[target_idx];
  Rng split_rng = substream(fold_seed, "upper-split");
  const auto [train_full, test] = split_stratified(all, 0.8, split_rng);
  Rng val_rng = substream(fold_seed, "upper-val-split");
  const auto [train_side, val] = split_stratified(train_full, 0.9, val_rng);

  Dataset personal;
  personal.labels = ds.labels;
  personal.window_len = ds.window_len;
  personal.stride = ds.stride;
  personal.pipeline = ds.pipeline;
  personal.subjects = {ds.subjects[target_idx]};
  personal.windows.push_back(train_side);

  TrainHyper h = hyper;
  h.batch_size = std::min(hyper.batch_size, train_side.size());
  if (h.batch_size < 2) throw std::invalid_argument("upper baseline: too few training windows");

  TrainedModel model = init_model([&] {
    ArchConfig a = arch;
    a.classes = ds.labels.size();
    a.window_len = ds.window_len;
    return a;
  }(), h, ds.labels);
  ctx.trainings->fetch_add(1);

  AdamState adam(trainable_params(model).size());
  Rng shuffle_rng = substream(h.seed, "shuffle");
  Rng dropout_rng = substream(h.seed, "dropout");
  const std::size_t src[1] = {0};

  const auto val_accuracy = [&](const TrainedModel& mm) {
    const auto labels = global_stats_labels(mm, val);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < val.size(); ++i)
      if (mm.label_map[labels[i]] == val[i].label) ++ok;
    return static_cast<double>(ok) / static_cast<double>(val.size());
  };

  TrainedModel best = model;
  double best_val = val_accuracy(model);
  const std::size_t patience = 25;
  std::size_t since_best = 0;
  for (std::size_t epoch = 0; epoch < h.epochs && since_best < patience; ++epoch) {
    TrainHyper step = h;
    step.epochs = 1;
    train_epochs(model, personal, src, step, 1, adam, shuffle_rng, dropout_rng, {});
    const double acc = val_accuracy(model);
    if (acc > best_val) {
      best_val = acc;
      best = model;
      since_best = 0;
    } else {
      ++since_best;
    }
  }

  const auto labels = global_stats_labels(best, test);
  FoldResult fold;
  fold.target = ds.subjects[target_idx];
  fold.total = test.size();
  for (std::size_t i = 0; i < test.size(); ++i)
    if (best.label_map[labels[i]] == test[i].label) ++fold.correct;
  fold.accuracy = static_cast<double>(fold.correct) / static_cast<double>(fold.total);
  return fold;
}

}  // namespace detail

// Every subject except the held-out target; the fold-isolation contract.
inline std::vector<std::size_t> fold_sources(std::size_t subject_count, std::size_t target_idx) {
  std::vector<std::size_t> sources;
  for (std::size_t s = 0; s < subject_count; ++s)
    if (s != target_idx) sources.push_back(s);
  return sources;
}

// Trains (or fetches from the cache) the general model for one fold: all
// subjects except the target. Models are canonicalized through the checkpoint
// encoding so cached and fresh runs evaluate identically.
inline TrainedModel fold_model(const Dataset& ds, std::size_t target_idx, const ArchConfig& arch,
                               const TrainHyper& hyper, EvalContext& ctx) {
  const std::vector<std::size_t> sources = fold_sources(ds.subjects.size(), target_idx);

  std::string cache_path;
  if (!ctx.cache_dir.empty()) {
    nlohmann::json key;
    key["dataset"] = hex64(dataset_hash(ds));
    key["target"] = ds.subjects[target_idx];
    key["arch"] = {arch.conv_layers, arch.feature_maps, arch.kernel,   arch.pool,
                   arch.dense_width, arch.dropout_rate, arch.classes,  arch.window_len,
                   arch.in_channels};
    key["hyper"] = {hyper.learning_rate, hyper.decay,         hyper.epochs, hyper.batch_size,
                    hyper.train_momentum, hyper.beta1,        hyper.beta2,  hyper.eps_opt,
                    hyper.seed};
    std::filesystem::create_directories(ctx.cache_dir);
    cache_path = (std::filesystem::path(ctx.cache_dir) /
                  ("fold_" + hex64(fnv1a(key.dump())) + ".dabn"))
                     .string();
    if (std::filesystem::exists(cache_path)) return load_model(cache_path);
  }

  // the shared training core: a 2-user dataset leaves a single source per fold
  TrainedModel model = detail::train_core(ds, sources, arch, hyper, 0.01, {});
  ctx.trainings->fetch_add(1);
  const std::string canonical = serialize_model(model);
  if (!cache_path.empty()) {
    std::ofstream out(cache_path, std::ios::binary | std::ios::trunc);
    out.write(canonical.data(), static_cast<std::streamsize>(canonical.size()));
  }
  return deserialize_model(canonical);
}

// Leave-one-person-out cross-validation: every subject is the target exactly
// once; folds are independent and may run on a thread pool.
inline std::vector<FoldResult> lopocv(const Dataset& ds, const ArchConfig& arch,
                                      const TrainHyper& hyper, const ExperimentSpec& spec,
                                      EvalContext ctx = {}) {
  spec.validate();
  if (ds.subjects.size() < 2) throw std::invalid_argument("lopocv: need at least 2 users");

  const std::size_t folds = ds.subjects.size();
  std::vector<FoldResult> results(folds);
  std::vector<std::exception_ptr> errors(folds);

  const auto run_fold = [&](std::size_t t) {
    const auto started = std::chrono::steady_clock::now();
    const std::uint64_t fold_seed = substream_seed(spec.seed, "fold", fnv1a(ds.subjects[t]));
    FoldResult fold;
    if (spec.kind == ExperimentKind::UpperBaseline) {
      fold = detail::upper_baseline_fold(ds, t, arch, hyper, fold_seed, ctx);
    } else {
      const TrainedModel model = fold_model(ds, t, arch, hyper, ctx);
      const auto& target_windows = ds.windows[t];
      switch (spec.kind) {
        case ExperimentKind::LowerBaseline: {
          fold.target = ds.subjects[t];
          fold.total = target_windows.size();
          for (const Window& w : target_windows)
            if (predict(model, w).label == w.label) ++fold.correct;
          fold.accuracy = static_cast<double>(fold.correct) / static_cast<double>(fold.total);
          break;
        }
        case ExperimentKind::OnlineUnrandomized:
          fold = run_online(model, target_windows, spec.momentum, false, 1, fold_seed, true,
                            spec.keep_records);
          break;
        case ExperimentKind::OnlineRandomized:
          fold = run_online(model, target_windows, spec.momentum, true, spec.repeats, fold_seed,
                            true, spec.keep_records);
          break;
        case ExperimentKind::UnsupervisedBatch:
          fold = run_batch_da(model, target_windows, spec.pre_fraction, false,
                              spec.fine_tune_epochs, fold_seed, true);
          break;
        case ExperimentKind::SupervisedBatch:
          fold = run_batch_da(model, target_windows, spec.pre_fraction, true,
                              spec.fine_tune_epochs, fold_seed, true);
          break;
        case ExperimentKind::SupervisedBaseline:
          fold = run_batch_da(model, target_windows, spec.pre_fraction, true,
                              spec.fine_tune_epochs, fold_seed, false);
          break;
        default:
          throw std::logic_error("lopocv: unhandled kind");
      }
    }
    fold.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                             started)
                       .count();
    results[t] = std::move(fold);
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(ctx.threads, folds));
  if (workers == 1) {
    for (std::size_t t = 0; t < folds; ++t) run_fold(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t t = next.fetch_add(1); t < folds; t = next.fetch_add(1)) {
          try {
            run_fold(t);
          } catch (...) {
            errors[t] = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  return results;
}

// One full cross-validation per momentum; fold models are trained once and
// reused through the cache, since the weights do not depend on the online
// momentum.
inline std::vector<std::pair<double, std::vector<FoldResult>>> momentum_sweep(
    const Dataset& ds, const ArchConfig& arch, const TrainHyper& hyper, ExperimentKind kind,
    std::span<const double> momenta, EvalContext ctx = {}) {
  if (momenta.empty()) throw std::invalid_argument("momentum_sweep: empty momentum list");
  if (!is_online_kind(kind))
    throw std::invalid_argument("momentum_sweep: kind must be an online experiment");
  std::vector<std::pair<double, std::vector<FoldResult>>> out;
  for (const double momentum : momenta) {
    ExperimentSpec spec;
    spec.kind = kind;
    spec.momentum = momentum;
    spec.seed = hyper.seed;
    out.push_back({momentum, lopocv(ds, arch, hyper, spec, ctx)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation and results layout
// ---------------------------------------------------------------------------

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty list");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline SummaryTable summarize(const std::vector<FoldResult>& results) {
  SummaryTable s;
  std::vector<double> accs;
  for (const FoldResult& f : results) {
    s.fold_accuracies.push_back({f.target, f.accuracy});
    accs.push_back(f.accuracy);
  }
  std::sort(s.fold_accuracies.begin(), s.fold_accuracies.end());
  s.median = median_of(accs);
  double sum = 0.0;
  for (const double a : accs) sum += a;
  s.mean = sum / static_cast<double>(accs.size());
  return s;
}

// Full summary against a named baseline run: per-user deltas plus top/flop
// slices of the users ranked by their baseline accuracy.
inline SummaryTable summarize(const std::vector<FoldResult>& results,
                              const std::vector<FoldResult>& baseline,
                              const std::string& baseline_run_id) {
  SummaryTable s = summarize(results);
  s.baseline_run_id = baseline_run_id;
  if (results.size() != baseline.size())
    throw std::invalid_argument("summarize: fold sets differ");
  std::vector<std::pair<std::string, double>> base_sorted;
  for (const FoldResult& f : baseline) base_sorted.push_back({f.target, f.accuracy});
  std::sort(base_sorted.begin(), base_sorted.end());
  for (const auto& [target, acc] : s.fold_accuracies) {
    const auto it = std::lower_bound(base_sorted.begin(), base_sorted.end(),
                                     std::pair<std::string, double>{target, -1.0});
    if (it == base_sorted.end() || it->first != target)
      throw std::invalid_argument("summarize: baseline misses target " + target);
    s.deltas.push_back({target, acc - it->second});
  }

  // rank by baseline accuracy, descending; ties by target id
  std::vector<std::pair<std::string, double>> rank = base_sorted;
  std::stable_sort(rank.begin(), rank.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  s.slice_size = std::min<std::size_t>(10, rank.size());
  const auto result_acc = [&](const std::string& target) {
    for (const auto& [t, a] : s.fold_accuracies)
      if (t == target) return a;
    throw std::logic_error("summarize: missing target");
  };
  double top = 0.0, flop = 0.0;
  for (std::size_t i = 0; i < s.slice_size; ++i) {
    top += result_acc(rank[i].first);
    flop += result_acc(rank[rank.size() - 1 - i].first);
  }
  s.top_mean = top / static_cast<double>(s.slice_size);
  s.flop_mean = flop / static_cast<double>(s.slice_size);
  return s;
}

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_folds_csv(const std::vector<FoldResult>& results, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "target,accuracy,wall_ms\n";
  for (const FoldResult& f : results) {
    char wall[32];
    std::snprintf(wall, sizeof(wall), "%.3f", f.wall_ms);
    out << f.target << ',' << detail::fmt_double(f.accuracy) << ',' << wall << '\n';
  }
}

inline void write_summary_csv(const SummaryTable& s, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "scope,name,value\n";
  out << "aggregate,median," << detail::fmt_double(s.median) << '\n';
  out << "aggregate,mean," << detail::fmt_double(s.mean) << '\n';
  if (!s.baseline_run_id.empty()) {
    out << "aggregate,baseline_run," << s.baseline_run_id << '\n';
    out << "aggregate,top" << s.slice_size << "_mean," << detail::fmt_double(s.top_mean) << '\n';
    out << "aggregate,flop" << s.slice_size << "_mean," << detail::fmt_double(s.flop_mean)
        << '\n';
    for (const auto& [target, delta] : s.deltas)
      out << "delta," << target << ',' << detail::fmt_double(delta) << '\n';
  }
  for (const auto& [target, acc] : s.fold_accuracies)
    out << "accuracy," << target << ',' << detail::fmt_double(acc) << '\n';
}

inline void write_stream_csv(const FoldResult& fold, std::size_t classes,
                             const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "tau,predicted,true_label_if_known";
  for (std::size_t c = 0; c < classes; ++c) out << ",prob_" << c;
  out << "\n";
  for (std::size_t i = 0; i < fold.records.size(); ++i) {
    const StreamRecord& r = fold.records[i];
    out << r.index << ',' << r.predicted << ','
        << (i < fold.truths.size() ? fold.truths[i] : "");
    for (const double p : r.probabilities) out << ',' << detail::fmt_double(p);
    out << '\n';
  }
}

// Results directory: runs/<run-id>/manifest.json + folds.csv + summary.csv
// (+ stream_<t>.csv when per-window records were kept).
inline std::string write_run(const std::string& runs_root, const std::string& run_id,
                             const nlohmann::json& manifest,
                             const std::vector<FoldResult>& results, const SummaryTable& summary,
                             std::size_t classes = 0) {
  const auto dir = std::filesystem::path(runs_root) / run_id;
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    out << manifest.dump(2) << '\n';
  }
  write_folds_csv(results, (dir / "folds.csv").string());
  write_summary_csv(summary, (dir / "summary.csv").string());
  for (const FoldResult& f : results)
    if (!f.records.empty())
      write_stream_csv(f, classes, (dir / ("stream_" + f.target + ".csv")).string());
  return dir.string();
}

}  // namespace dabn
