// Command-line front end: preprocess raw accelerometer CSVs, train the
// multi-user model, stream-personalize against a target, run the evaluation
// experiments and sweeps, and generate synthetic covariate-shift datasets.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "dabn/checkpoint.hpp"
#include "dabn/data.hpp"
#include "dabn/eval.hpp"
#include "dabn/synth.hpp"
#include "dabn/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Precedence: explicit flags > config file > built-in defaults.
struct ConfigBinder {
  std::vector<std::pair<CLI::Option*, std::function<void(const json&)>>> binds;

  template <class T>
  void bind(CLI::Option* opt, std::string key, T& target) {
    binds.push_back({opt, [key = std::move(key), &target](const json& j) {
                       if (j.contains(key)) target = j.at(key).get<T>();
                     }});
  }

  void apply(const json& j) {
    for (auto& [opt, fn] : binds)
      if (opt->count() == 0) fn(j);
  }
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j;
  in >> j;
  return j;
}

void write_json(const json& j, const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

struct ArchFlags {
  std::size_t conv_layers = 5, feature_maps = 64, kernel = 5, pool = 4, dense_width = 256;
  double dropout = 0.5;

  void add(CLI::App* cmd, ConfigBinder& binder) {
    binder.bind(cmd->add_option("--conv-layers", conv_layers, "1D conv layers"), "conv-layers",
                conv_layers);
    binder.bind(cmd->add_option("--feature-maps", feature_maps, "feature maps per conv layer"),
                "feature-maps", feature_maps);
    binder.bind(cmd->add_option("--kernel", kernel, "conv kernel size"), "kernel", kernel);
    binder.bind(cmd->add_option("--pool", pool, "non-overlapping max-pool size"), "pool", pool);
    binder.bind(cmd->add_option("--dense-width", dense_width, "fully connected width"),
                "dense-width", dense_width);
    binder.bind(cmd->add_option("--dropout", dropout, "dropout rate"), "dropout", dropout);
  }

  dabn::ArchConfig resolve(const dabn::Dataset& ds) const {
    dabn::ArchConfig a;
    a.conv_layers = conv_layers;
    a.feature_maps = feature_maps;
    a.kernel = kernel;
    a.pool = pool;
    a.dense_width = dense_width;
    a.dropout_rate = dropout;
    a.classes = ds.labels.size();
    a.window_len = ds.window_len;
    return a;
  }

  json to_json() const {
    return {{"conv-layers", conv_layers}, {"feature-maps", feature_maps}, {"kernel", kernel},
            {"pool", pool},               {"dense-width", dense_width},   {"dropout", dropout}};
  }
};

struct HyperFlags {
  double lr = 1e-4, decay = 1e-3, train_momentum = 0.1, online_momentum = 0.01;
  std::size_t epochs = 649, batch_size = 177;
  std::uint64_t seed = 0;

  void add(CLI::App* cmd, ConfigBinder& binder) {
    binder.bind(cmd->add_option("--lr", lr, "learning rate"), "lr", lr);
    binder.bind(cmd->add_option("--decay", decay, "learning-rate decay per epoch"), "decay",
                decay);
    binder.bind(cmd->add_option("--epochs", epochs, "training epochs"), "epochs", epochs);
    binder.bind(cmd->add_option("--batch-size", batch_size, "domain batch size"), "batch-size",
                batch_size);
    binder.bind(cmd->add_option("--train-momentum", train_momentum,
                                "batch-wise running-statistics momentum"),
                "train-momentum", train_momentum);
    binder.bind(cmd->add_option("--online-momentum", online_momentum,
                                "default per-instance momentum stored in the checkpoint"),
                "online-momentum", online_momentum);
    binder.bind(cmd->add_option("--seed", seed, "root seed"), "seed", seed);
  }

  dabn::TrainHyper resolve() const {
    dabn::TrainHyper h;
    h.learning_rate = lr;
    h.decay = decay;
    h.epochs = epochs;
    h.batch_size = batch_size;
    h.train_momentum = train_momentum;
    h.seed = seed;
    return h;
  }

  json to_json() const {
    return {{"lr", lr},
            {"decay", decay},
            {"epochs", epochs},
            {"batch-size", batch_size},
            {"train-momentum", train_momentum},
            {"online-momentum", online_momentum},
            {"seed", seed}};
  }
};

std::vector<dabn::FoldResult> read_folds_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open baseline folds: " + path);
  std::vector<dabn::FoldResult> out;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw std::runtime_error("malformed folds row: " + line);
    dabn::FoldResult f;
    f.target = line.substr(0, c1);
    f.accuracy = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
    out.push_back(std::move(f));
  }
  return out;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"incremental online domain-adaptive normalization toolkit"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.option_defaults()->always_capture_default();

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (flags take precedence)")
      ->expected(1);

  // ---- preprocess -------------------------------------------------------
  auto* pre = app.add_subcommand("preprocess", "raw CSV -> windowed dataset cache");
  ConfigBinder pre_binder;
  std::string pre_input, pre_out = "preprocess_out";
  std::size_t pre_filter = 4, pre_window = 40, pre_stride = 20;
  double pre_min = -78.0, pre_max = 78.0;
  pre->add_option("--input", pre_input, "raw samples CSV")->required();
  pre_binder.bind(pre->add_option("--out", pre_out, "output directory"), "out", pre_out);
  pre_binder.bind(pre->add_option("--filter-width", pre_filter, "moving-average width"),
                  "filter-width", pre_filter);
  pre_binder.bind(pre->add_option("--min", pre_min, "min-max lower bound"), "min", pre_min);
  pre_binder.bind(pre->add_option("--max", pre_max, "min-max upper bound"), "max", pre_max);
  pre_binder.bind(pre->add_option("--window", pre_window, "window length"), "window",
                  pre_window);
  pre_binder.bind(pre->add_option("--stride", pre_stride, "window stride"), "stride", pre_stride);

  // ---- synth ------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "synthetic covariate-shift dataset cache");
  ConfigBinder synth_binder;
  std::string synth_spec_path, synth_out = "synth_out";
  std::uint64_t synth_seed = 0;
  synth->add_option("--spec", synth_spec_path, "synthetic spec JSON")->required();
  synth_binder.bind(synth->add_option("--out", synth_out, "output directory"), "out", synth_out);
  auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "override spec seed");

  // ---- train ------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "train the multi-user model");
  ConfigBinder tr_binder;
  std::string tr_data, tr_out = "train_out";
  std::vector<std::string> tr_exclude;
  ArchFlags tr_arch;
  HyperFlags tr_hyper;
  tr->add_option("--data", tr_data, "dataset cache")->required();
  tr_binder.bind(tr->add_option("--out", tr_out, "output directory"), "out", tr_out);
  tr->add_option("--exclude-subject", tr_exclude, "subjects held out of training");
  tr_arch.add(tr, tr_binder);
  tr_hyper.add(tr, tr_binder);

  // ---- stream -----------------------------------------------------------
  auto* st = app.add_subcommand("stream", "online-personalize against one target");
  ConfigBinder st_binder;
  std::string st_model, st_data, st_target, st_order = "original", st_adaptation = "on";
  std::string st_out = "stream_out";
  double st_momentum = 0.01;
  std::uint64_t st_seed = 0;
  bool st_snapshots = false;
  st->add_option("--model", st_model, "checkpoint file")->required();
  st->add_option("--data", st_data, "dataset cache")->required();
  st->add_option("--target", st_target, "target subject id")->required();
  st_binder.bind(st->add_option("--momentum", st_momentum, "online adaptation momentum"),
                 "momentum", st_momentum);
  st_binder.bind(st->add_option("--order", st_order, "original|shuffled"), "order", st_order);
  st_binder.bind(st->add_option("--adaptation", st_adaptation, "on|off"), "adaptation",
                 st_adaptation);
  st_binder.bind(st->add_option("--seed", st_seed, "shuffle seed"), "seed", st_seed);
  st_binder.bind(st->add_option("--out", st_out, "output directory"), "out", st_out);
  st->add_flag("--snapshots", st_snapshots, "per-window statistics snapshots in memory");

  // ---- eval -------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "leave-one-person-out experiment");
  ConfigBinder ev_binder;
  std::string ev_data, ev_kind = "lower-baseline", ev_out = "runs", ev_run_id, ev_baseline,
              ev_cache_dir;
  double ev_momentum = 0.01, ev_pre_fraction = 0.1;
  std::size_t ev_fine_tune = 10, ev_repeats = 5, ev_threads = 1;
  bool ev_stream_csv = false;
  ArchFlags ev_arch;
  HyperFlags ev_hyper;
  ev->add_option("--data", ev_data, "dataset cache")->required();
  ev_binder.bind(ev->add_option("--kind", ev_kind, "experiment kind"), "kind", ev_kind);
  ev_binder.bind(ev->add_option("--momentum", ev_momentum, "online adaptation momentum"),
                 "momentum", ev_momentum);
  ev_binder.bind(ev->add_option("--pre-fraction", ev_pre_fraction, "pre-estimation fraction"),
                 "pre-fraction", ev_pre_fraction);
  ev_binder.bind(ev->add_option("--fine-tune-epochs", ev_fine_tune, "supervised tuning epochs"),
                 "fine-tune-epochs", ev_fine_tune);
  ev_binder.bind(ev->add_option("--repeats", ev_repeats, "randomized-order repeats"), "repeats",
                 ev_repeats);
  ev_binder.bind(ev->add_option("--out", ev_out, "runs root directory"), "out", ev_out);
  ev->add_option("--run-id", ev_run_id, "run id (default: config hash)");
  ev->add_option("--baseline", ev_baseline, "baseline run directory for deltas");
  ev_binder.bind(ev->add_option("--threads", ev_threads, "fold-level parallelism"), "threads",
                 ev_threads);
  ev->add_option("--cache-dir", ev_cache_dir, "fold-model cache (default <out>/_cache)");
  ev->add_flag("--stream-csv", ev_stream_csv, "write per-window stream_<t>.csv");
  ev_arch.add(ev, ev_binder);
  ev_hyper.add(ev, ev_binder);

  // ---- sweep ------------------------------------------------------------
  auto* sw = app.add_subcommand("sweep", "one experiment per momentum (or fraction)");
  ConfigBinder sw_binder;
  std::string sw_data, sw_kind = "online-randomized", sw_out = "runs", sw_run_id, sw_cache_dir;
  std::vector<double> sw_momenta, sw_fractions;
  std::size_t sw_repeats = 5, sw_threads = 1, sw_fine_tune = 10;
  ArchFlags sw_arch;
  HyperFlags sw_hyper;
  sw->add_option("--data", sw_data, "dataset cache")->required();
  sw_binder.bind(sw->add_option("--kind", sw_kind, "experiment kind"), "kind", sw_kind);
  sw->add_option("--momenta", sw_momenta, "momentum grid")->delimiter(',');
  sw->add_option("--fractions", sw_fractions, "pre-estimation fraction grid")->delimiter(',');
  sw_binder.bind(sw->add_option("--repeats", sw_repeats, "randomized-order repeats"), "repeats",
                 sw_repeats);
  sw_binder.bind(sw->add_option("--fine-tune-epochs", sw_fine_tune, "supervised tuning epochs"),
                 "fine-tune-epochs", sw_fine_tune);
  sw_binder.bind(sw->add_option("--out", sw_out, "runs root directory"), "out", sw_out);
  sw->add_option("--run-id", sw_run_id, "run id (default: config hash)");
  sw->add_option("--cache-dir", sw_cache_dir, "fold-model cache (default <out>/_cache)");
  sw_binder.bind(sw->add_option("--threads", sw_threads, "fold-level parallelism"), "threads",
                 sw_threads);
  sw_arch.add(sw, sw_binder);
  sw_hyper.add(sw, sw_binder);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;  // help prints and exits cleanly; usage errors -> 1
  }
  const json config = load_config(config_path);

  // ---- dispatch ----------------------------------------------------------
  if (pre->parsed()) {
    pre_binder.apply(config);
    const auto ingest = dabn::ingest_csv(pre_input);
    dabn::PipelineParams params;
    params.filter_width = pre_filter;
    params.minmax_lo = pre_min;
    params.minmax_hi = pre_max;
    params.window_len = pre_window;
    params.stride = pre_stride;
    const dabn::Dataset ds = dabn::run_pipeline(ingest.groups, params);
    fs::create_directories(pre_out);
    dabn::save_dataset(ds, (fs::path(pre_out) / "dataset.dads").string());
    json resolved{{"command", "preprocess"},
                  {"input", pre_input},
                  {"out", pre_out},
                  {"filter-width", pre_filter},
                  {"min", pre_min},
                  {"max", pre_max},
                  {"window", pre_window},
                  {"stride", pre_stride},
                  {"pipeline", ds.pipeline}};
    write_json(resolved, fs::path(pre_out) / "config.json");
    std::cout << "cache: " << (fs::path(pre_out) / "dataset.dads").string() << "\n";
    std::cout << "subjects: " << ds.subjects.size() << "\n";
    std::cout << "malformed_rows: " << ingest.malformed_rows << "\n";
    std::cout << "windows: " << ds.total_windows() << "\n";
    return 0;
  }

  if (synth->parsed()) {
    synth_binder.apply(config);
    dabn::SynthSpec spec = dabn::load_synth_spec(synth_spec_path);
    if (synth_seed_opt->count() > 0) spec.seed = synth_seed;
    const dabn::Dataset ds = dabn::synth_generate(spec);
    fs::create_directories(synth_out);
    dabn::save_dataset(ds, (fs::path(synth_out) / "dataset.dads").string());
    json resolved{{"command", "synth"},
                  {"spec", synth_spec_path},
                  {"out", synth_out},
                  {"seed", spec.seed},
                  {"pipeline", ds.pipeline}};
    write_json(resolved, fs::path(synth_out) / "config.json");
    std::cout << "cache: " << (fs::path(synth_out) / "dataset.dads").string() << "\n";
    std::cout << "windows: " << ds.total_windows() << "\n";
    return 0;
  }

  if (tr->parsed()) {
    tr_binder.apply(config);
    const dabn::Dataset ds = dabn::load_dataset(tr_data);
    std::vector<std::size_t> sources;
    for (std::size_t s = 0; s < ds.subjects.size(); ++s)
      if (std::find(tr_exclude.begin(), tr_exclude.end(), ds.subjects[s]) == tr_exclude.end())
        sources.push_back(s);
    const dabn::ArchConfig arch = tr_arch.resolve(ds);
    const dabn::TrainHyper hyper = tr_hyper.resolve();

    fs::create_directories(tr_out);
    std::ofstream loss_log(fs::path(tr_out) / "loss.csv", std::ios::trunc);
    loss_log << "epoch,mean_loss\n";
    const dabn::TrainedModel model = dabn::train(
        ds, sources, arch, hyper, tr_hyper.online_momentum,
        [&loss_log](std::size_t epoch, double loss) {
          char buf[64];
          std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", epoch, loss);
          loss_log << buf;
        });
    const std::string ckpt = (fs::path(tr_out) / "model.dabn").string();
    dabn::save_model(model, ckpt);

    json resolved{{"command", "train"},
                  {"data", tr_data},
                  {"data_hash", dabn::hex64(dabn::hash_file(tr_data))},
                  {"out", tr_out},
                  {"excluded", tr_exclude},
                  {"arch", tr_arch.to_json()},
                  {"hyper", tr_hyper.to_json()}};
    write_json(resolved, fs::path(tr_out) / "config.json");
    std::cout << "checkpoint: " << ckpt << "\n";
    std::cout << "checkpoint_hash: " << dabn::hex64(dabn::hash_file(ckpt)) << "\n";
    return 0;
  }

  if (st->parsed()) {
    st_binder.apply(config);
    if (st_order != "original" && st_order != "shuffled")
      throw CLI::ValidationError("--order must be original or shuffled");
    if (st_adaptation != "on" && st_adaptation != "off")
      throw CLI::ValidationError("--adaptation must be on or off");
    const dabn::TrainedModel model = dabn::load_model(st_model);
    const dabn::Dataset ds = dabn::load_dataset(st_data);
    const std::size_t target = ds.subject_index(st_target);
    std::vector<dabn::Window> stream = ds.windows[target];
    if (st_order == "shuffled") {
      dabn::Rng rng = dabn::substream(st_seed, "order");
      rng.shuffle(stream);
    }

    fs::create_directories(st_out);
    std::ofstream csv(fs::path(st_out) / "stream.csv", std::ios::trunc);
    dabn::StreamAdapter adapter(model, st_momentum, st_adaptation == "on");
    adapter.attach_sink(csv);
    adapter.enable_snapshots(st_snapshots);
    std::size_t correct = 0;
    for (const dabn::Window& w : stream)
      if (adapter.adapt_and_classify(w).predicted == w.label) ++correct;
    adapter.detach_sink();

    json resolved{{"command", "stream"},     {"model", st_model},
                  {"data", st_data},         {"target", st_target},
                  {"momentum", st_momentum}, {"order", st_order},
                  {"adaptation", st_adaptation}, {"seed", st_seed},
                  {"out", st_out}};
    write_json(resolved, fs::path(st_out) / "config.json");
    char acc[64];
    std::snprintf(acc, sizeof(acc), "%.17g", static_cast<double>(correct) / stream.size());
    std::cout << "stream_csv: " << (fs::path(st_out) / "stream.csv").string() << "\n";
    std::cout << "windows: " << stream.size() << "\n";
    std::cout << acc << "\n";
    return 0;
  }

  if (ev->parsed()) {
    ev_binder.apply(config);
    const dabn::Dataset ds = dabn::load_dataset(ev_data);
    dabn::ExperimentSpec spec;
    spec.kind = dabn::kind_from_name(ev_kind);
    spec.momentum = ev_momentum;
    spec.pre_fraction = ev_pre_fraction;
    spec.fine_tune_epochs = ev_fine_tune;
    spec.repeats = ev_repeats;
    spec.seed = ev_hyper.seed;
    spec.keep_records = ev_stream_csv;

    dabn::EvalContext ctx;
    ctx.threads = ev_threads;
    ctx.cache_dir =
        ev_cache_dir.empty() ? (fs::path(ev_out) / "_cache").string() : ev_cache_dir;

    json resolved{{"command", "eval"},
                  {"data", ev_data},
                  {"data_hash", dabn::hex64(dabn::hash_file(ev_data))},
                  {"kind", ev_kind},
                  {"momentum", ev_momentum},
                  {"pre-fraction", ev_pre_fraction},
                  {"fine-tune-epochs", ev_fine_tune},
                  {"repeats", ev_repeats},
                  {"arch", ev_arch.to_json()},
                  {"hyper", ev_hyper.to_json()},
                  {"baseline", ev_baseline}};
    const std::string run_id =
        ev_run_id.empty() ? dabn::hex64(dabn::fnv1a(resolved.dump())) : ev_run_id;

    const auto folds =
        dabn::lopocv(ds, ev_arch.resolve(ds), ev_hyper.resolve(), spec, ctx);
    dabn::SummaryTable summary;
    if (!ev_baseline.empty()) {
      const auto baseline = read_folds_csv((fs::path(ev_baseline) / "folds.csv").string());
      summary = dabn::summarize(folds, baseline, ev_baseline);
    } else {
      summary = dabn::summarize(folds);
    }
    const std::string run_dir =
        dabn::write_run(ev_out, run_id, resolved, folds, summary, ds.labels.size());
    std::cout << "run_dir: " << run_dir << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "median %.17g mean %.17g", summary.median, summary.mean);
    std::cout << buf << "\n";
    return 0;
  }

  if (sw->parsed()) {
    sw_binder.apply(config);
    const dabn::Dataset ds = dabn::load_dataset(sw_data);
    const dabn::ExperimentKind kind = dabn::kind_from_name(sw_kind);
    dabn::EvalContext ctx;
    ctx.threads = sw_threads;
    ctx.cache_dir =
        sw_cache_dir.empty() ? (fs::path(sw_out) / "_cache").string() : sw_cache_dir;

    std::vector<double> values;
    std::string axis;
    if (dabn::is_online_kind(kind)) {
      axis = "momentum";
      values = sw_momenta;
      if (values.empty())
        values = kind == dabn::ExperimentKind::OnlineUnrandomized
                     ? std::vector<double>{0.0001, 0.0003, 0.0009, 0.002, 0.005}
                     : std::vector<double>{0.001, 0.003, 0.01, 0.02, 0.05};
    } else if (dabn::is_batch_kind(kind)) {
      axis = "pre_fraction";
      values = sw_fractions;
      if (values.empty()) values = {0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 0.9};
    } else {
      throw CLI::ValidationError("sweep requires an online or batch experiment kind");
    }

    json resolved{{"command", "sweep"},
                  {"data", sw_data},
                  {"data_hash", dabn::hex64(dabn::hash_file(sw_data))},
                  {"kind", sw_kind},
                  {"axis", axis},
                  {"values", values},
                  {"repeats", sw_repeats},
                  {"fine-tune-epochs", sw_fine_tune},
                  {"arch", sw_arch.to_json()},
                  {"hyper", sw_hyper.to_json()}};
    const std::string run_id =
        sw_run_id.empty() ? dabn::hex64(dabn::fnv1a(resolved.dump())) : sw_run_id;
    const fs::path run_dir = fs::path(sw_out) / run_id;
    fs::create_directories(run_dir);
    write_json(resolved, run_dir / "manifest.json");

    std::ofstream sweep_csv(run_dir / "sweep.csv", std::ios::trunc);
    sweep_csv << axis << ",median,mean\n";
    for (const double value : values) {
      dabn::ExperimentSpec spec;
      spec.kind = kind;
      spec.seed = sw_hyper.seed;
      spec.repeats = sw_repeats;
      spec.fine_tune_epochs = sw_fine_tune;
      if (axis == "momentum")
        spec.momentum = value;
      else
        spec.pre_fraction = value;
      const auto folds = dabn::lopocv(ds, sw_arch.resolve(ds), sw_hyper.resolve(), spec, ctx);
      const dabn::SummaryTable summary = dabn::summarize(folds);
      char dirname[64];
      std::snprintf(dirname, sizeof(dirname), "%s_%.17g", axis.c_str(), value);
      fs::create_directories(run_dir / dirname);
      dabn::write_folds_csv(folds, (run_dir / dirname / "folds.csv").string());
      dabn::write_summary_csv(summary, (run_dir / dirname / "summary.csv").string());
      char row[128];
      std::snprintf(row, sizeof(row), "%.17g,%.17g,%.17g\n", value, summary.median,
                    summary.mean);
      sweep_csv << row;
    }
    std::cout << "run_dir: " << run_dir.string() << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::logic_error& e) {
    std::cerr << "internal invariant violation: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
