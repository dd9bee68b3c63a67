#include "dabn/adapter.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "dabn/synth.hpp"
#include "dabn/train.hpp"
#include "test_util.hpp"

using namespace dabn;

namespace {

ArchConfig tiny_arch() {
  ArchConfig a;
  a.conv_layers = 1;
  a.feature_maps = 4;
  a.kernel = 5;
  a.pool = 4;
  a.dense_width = 8;
  a.dropout_rate = 0.2;
  a.classes = 3;
  a.window_len = 40;
  a.in_channels = 3;
  return a;
}

TrainedModel quick_model(std::uint64_t seed) {
  SynthSpec spec;
  spec.num_users = 2;
  spec.classes = 3;
  spec.windows_per_class = 24;
  spec.noise_sigma = 0.05;
  spec.users = {UserTransform{{0, 0, 0}, {1, 1, 1}},
                UserTransform{{0.5, 0.3, 0.4}, {1.1, 1.0, 0.9}}};
  spec.seed = seed;
  const Dataset ds = synth_generate(spec);
  TrainHyper h;
  h.learning_rate = 3e-3;
  h.decay = 1e-3;
  h.epochs = 12;
  h.batch_size = 18;
  h.train_momentum = 0.1;
  h.seed = seed;
  const std::vector<std::size_t> sources{0, 1};
  return train(ds, sources, tiny_arch(), h);
}

std::vector<Window> target_stream(std::uint64_t seed, std::size_t windows_per_class,
                                  std::array<double, 3> offset = {0.7, 0.5, 0.6}) {
  SynthSpec spec;
  spec.num_users = 2;
  spec.classes = 3;
  spec.windows_per_class = windows_per_class;
  spec.noise_sigma = 0.05;
  spec.users = {UserTransform{{0, 0, 0}, {1, 1, 1}}, UserTransform{offset, {1.1, 1.2, 0.95}}};
  spec.seed = seed + 5000;
  Dataset ds = synth_generate(spec);
  return std::move(ds.windows[1]);
}

}  // namespace

TEST(InitAdapter, MomentumValidatedAtBoundaries) {
  const TrainedModel model = quick_model(40);
  EXPECT_NO_THROW(StreamAdapter(model, 0.01, true));
  EXPECT_THROW(StreamAdapter(model, 0.0, true), std::invalid_argument);
  EXPECT_THROW(StreamAdapter(model, 1.0, true), std::invalid_argument);
}

TEST(InitAdapter, DisabledAdaptationEqualsPredict) {
  const TrainedModel model = quick_model(41);
  StreamAdapter adapter(model, 0.05, /*adaptation_enabled=*/false);
  const auto stream = target_stream(41, 20);
  for (const Window& w : stream) {
    const Prediction p = predict(model, w);
    const StreamRecord r = adapter.adapt_and_classify(w);
    ASSERT_EQ(r.label_index, p.label_index);
    ASSERT_EQ(r.probabilities, p.probabilities);  // bit-identical paths
  }
}

TEST(InitAdapter, AdaptersFromOneModelAreIndependent) {
  const TrainedModel model = quick_model(42);
  StreamAdapter a(model, 0.1, true);
  StreamAdapter b(model, 0.1, true);
  const auto stream = target_stream(42, 10);
  for (const Window& w : stream) a.adapt_and_classify(w);
  EXPECT_EQ(a.windows_seen(), stream.size());
  EXPECT_EQ(b.windows_seen(), 0u);
  for (std::size_t l = 0; l < model.bn.width(); ++l) {
    EXPECT_DOUBLE_EQ(b.live_bn().channels[l].running_mean, model.bn.channels[l].running_mean);
    EXPECT_DOUBLE_EQ(b.live_bn().channels[l].running_var, model.bn.channels[l].running_var);
  }
}

TEST(AdaptAndClassify, UpdateHappensBeforeNormalization) {
  // One window: the classification must use statistics that already include
  // this window, i.e. exactly one online update applied to every channel.
  const TrainedModel model = quick_model(43);
  const auto stream = target_stream(43, 4);
  const Window& w = stream.front();

  StreamAdapter adapter(model, 0.2, true);
  const StreamRecord r = adapter.adapt_and_classify(w);

  const std::vector<Window> one{w};
  const Matrix z = bn_layer_inputs(model, one);
  std::vector<double> act(model.arch.dense_width);
  for (std::size_t l = 0; l < model.arch.dense_width; ++l) {
    const BnChannelState updated = update_running_online(model.bn.channels[l], z(0, l), 0.2);
    EXPECT_DOUBLE_EQ(adapter.live_bn().channels[l].running_mean, updated.running_mean);
    EXPECT_DOUBLE_EQ(adapter.live_bn().channels[l].running_var, updated.running_var);
    const double v = normalize(updated, z(0, l), updated.running_mean, updated.running_var);
    act[l] = v > 0.0 ? v : 0.0;
  }
  std::vector<double> logits(model.arch.classes);
  for (std::size_t c = 0; c < model.arch.classes; ++c) {
    double acc = model.classifier.b[c];
    for (std::size_t l = 0; l < model.arch.dense_width; ++l)
      acc += model.classifier.w[c * model.arch.dense_width + l] * act[l];
    logits[c] = acc;
  }
  const auto probs = softmax(logits);
  for (std::size_t c = 0; c < probs.size(); ++c)
    EXPECT_NEAR(r.probabilities[c], probs[c], 1e-15);
}

TEST(AdaptAndClassify, StationaryStreamStatisticsApproachBatchMoments) {
  const TrainedModel model = quick_model(44);
  // stationary stream: two templates alternating, which keeps the
  // exponential estimate locked to the full-set moments
  const auto pool = target_stream(44, 2);
  std::vector<Window> stream;
  for (int i = 0; i < 200; ++i) stream.push_back(pool[i % 2 == 0 ? 0 : 3]);

  StreamAdapter adapter(model, 0.05, true);
  for (const Window& w : stream) adapter.adapt_and_classify(w);

  const Matrix z = bn_layer_inputs(model, stream);
  for (std::size_t l = 0; l < model.arch.dense_width; ++l) {
    std::vector<double> col(stream.size());
    for (std::size_t i = 0; i < stream.size(); ++i) col[i] = z(i, l);
    const BatchMoments m = batch_moments(col);
    const auto& ch = adapter.live_bn().channels[l];
    EXPECT_LE(std::abs(ch.running_mean - m.mean), 0.05 * std::max(std::abs(m.mean), 0.05))
        << "channel " << l;
    EXPECT_LE(std::abs(ch.running_var - m.var), 0.05 * std::max(m.var, 1e-4)) << "channel " << l;
  }
}

TEST(AdaptAndClassify, ReplayIsDeterministic) {
  const TrainedModel model = quick_model(45);
  const auto stream = target_stream(45, 12);
  StreamAdapter a(model, 0.03, true);
  StreamAdapter b(model, 0.03, true);
  for (const Window& w : stream) {
    const StreamRecord ra = a.adapt_and_classify(w);
    const StreamRecord rb = b.adapt_and_classify(w);
    ASSERT_EQ(ra.index, rb.index);
    ASSERT_EQ(ra.label_index, rb.label_index);
    ASSERT_EQ(ra.probabilities, rb.probabilities);
  }
}

TEST(AdaptAndClassify, OnePassAndCountLaws) {
  const TrainedModel model = quick_model(46);
  const auto stream = target_stream(46, 15);
  StreamAdapter adapter(model, 0.05, true);
  for (const Window& w : stream) adapter.adapt_and_classify(w);
  EXPECT_EQ(adapter.windows_seen(), stream.size());
  EXPECT_EQ(adapter.forward_count(), stream.size());
  for (const std::uint64_t c : adapter.channel_update_counts()) EXPECT_EQ(c, stream.size());
}

TEST(AdaptAndClassify, ConstantMemoryProbe) {
  const TrainedModel model = quick_model(47);
  const auto pool = target_stream(47, 4);
  StreamAdapter adapter(model, 0.05, true);
  adapter.adapt_and_classify(pool[0]);
  const std::size_t bytes_after_one = adapter.state_bytes();
  for (int i = 0; i < 1000; ++i) adapter.adapt_and_classify(pool[i % pool.size()]);
  EXPECT_EQ(adapter.state_bytes(), bytes_after_one);
}

TEST(AdaptAndClassify, FrozenWeightsLaw) {
  const TrainedModel model = quick_model(48);
  const std::uint64_t before = model_weights_hash(model);
  StreamAdapter adapter(model, 0.05, true);
  for (const Window& w : target_stream(48, 20)) adapter.adapt_and_classify(w);
  EXPECT_EQ(model_weights_hash(model), before);
}

TEST(AdaptAndClassify, GeometricForgettingClosedForm) {
  const TrainedModel model = quick_model(49);
  const auto pre = target_stream(49, 10);
  const auto post = target_stream(49, 10, {2.0, 1.5, 1.8});
  const double alpha = 0.07;

  StreamAdapter adapter(model, alpha, true);
  for (const Window& w : pre) adapter.adapt_and_classify(w);
  const std::vector<double> mu_at_drift = [&] {
    std::vector<double> v;
    for (const auto& ch : adapter.live_bn().channels) v.push_back(ch.running_mean);
    return v;
  }();

  const Matrix zpost = bn_layer_inputs(model, post);
  for (std::size_t n = 1; n <= post.size(); ++n) {
    adapter.adapt_and_classify(post[n - 1]);
    for (std::size_t l = 0; l < model.arch.dense_width; ++l) {
      // influence of everything before the drift decays as (1-a)^n
      long double closed = std::pow(1.0L - alpha, static_cast<long double>(n)) *
                           static_cast<long double>(mu_at_drift[l]);
      for (std::size_t j = 0; j < n; ++j)
        closed += static_cast<long double>(alpha) *
                  std::pow(1.0L - alpha, static_cast<long double>(n - 1 - j)) *
                  static_cast<long double>(zpost(j, l));
      const double got = adapter.live_bn().channels[l].running_mean;
      ASSERT_LE(std::abs(got - static_cast<double>(closed)),
                1e-10 * std::max(1.0L, std::abs(closed)));
    }
  }
}

TEST(AdaptAndClassify, OnlineMeanApproachesBatchEstimateIid) {
  const TrainedModel model = quick_model(50);
  // i.i.d. windows of a single class with noise
  SynthSpec spec;
  spec.num_users = 2;
  spec.classes = 2;
  spec.windows_per_class = 500;
  spec.noise_sigma = 0.08;
  spec.users = {UserTransform{}, UserTransform{{0.4, 0.3, 0.5}, {1.1, 1.0, 1.05}}};
  spec.seed = 5150;
  Dataset ds = synth_generate(spec);
  std::vector<Window> stream(ds.windows[1].begin(), ds.windows[1].begin() + 500);

  StreamAdapter adapter(model, 0.02, true);
  for (const Window& w : stream) adapter.adapt_and_classify(w);

  const Matrix z = bn_layer_inputs(model, stream);
  for (std::size_t l = 0; l < model.arch.dense_width; ++l) {
    std::vector<double> col(stream.size());
    for (std::size_t i = 0; i < stream.size(); ++i) col[i] = z(i, l);
    const BatchMoments m = batch_moments(col);
    EXPECT_LE(std::abs(adapter.live_bn().channels[l].running_mean - m.mean),
              0.05 * std::max(std::abs(m.mean), 0.05))
        << "channel " << l;
  }
}

TEST(Reset, EqualsFreshAdapter) {
  const TrainedModel model = quick_model(51);
  const auto stream = target_stream(51, 8);
  StreamAdapter used(model, 0.05, true);
  for (const Window& w : stream) used.adapt_and_classify(w);
  used.reset();
  const StreamAdapter fresh(model, 0.05, true);
  EXPECT_EQ(used.windows_seen(), 0u);
  for (std::size_t l = 0; l < model.bn.width(); ++l) {
    EXPECT_DOUBLE_EQ(used.live_bn().channels[l].running_mean,
                     fresh.live_bn().channels[l].running_mean);
    EXPECT_DOUBLE_EQ(used.live_bn().channels[l].running_var,
                     fresh.live_bn().channels[l].running_var);
    EXPECT_DOUBLE_EQ(used.live_bn().channels[l].gamma, fresh.live_bn().channels[l].gamma);
  }
  // idempotent
  used.reset();
  EXPECT_EQ(used.windows_seen(), 0u);

  // classify-after-reset replays the first-ever classification
  StreamAdapter replay(model, 0.05, true);
  const StreamRecord first = replay.adapt_and_classify(stream[0]);
  replay.reset();
  const StreamRecord again = replay.adapt_and_classify(stream[0]);
  EXPECT_EQ(first.label_index, again.label_index);
  EXPECT_EQ(first.probabilities, again.probabilities);
}

TEST(Poisoning, NonFiniteInputPoisonsUntilReset) {
  const TrainedModel model = quick_model(52);
  const auto stream = target_stream(52, 4);
  StreamAdapter adapter(model, 0.05, true);
  adapter.adapt_and_classify(stream[0]);
  const double mean_before = adapter.live_bn().channels[0].running_mean;

  Window bad = stream[1];
  bad.data(3, 1) = INFINITY;
  EXPECT_THROW(adapter.adapt_and_classify(bad), std::runtime_error);
  EXPECT_TRUE(adapter.poisoned());
  // statistics were not corrupted by the poisonous window
  EXPECT_DOUBLE_EQ(adapter.live_bn().channels[0].running_mean, mean_before);
  // subsequent valid windows are refused until reset
  EXPECT_THROW(adapter.adapt_and_classify(stream[2]), std::runtime_error);
  adapter.reset();
  EXPECT_FALSE(adapter.poisoned());
  EXPECT_NO_THROW(adapter.adapt_and_classify(stream[2]));
}

TEST(Poisoning, ShapeMismatchIsAnArgumentErrorNotPoison) {
  const TrainedModel model = quick_model(53);
  StreamAdapter adapter(model, 0.05, true);
  Window bad;
  bad.subject = "t";
  bad.label = "c0";
  bad.data = Matrix(7, 3);
  EXPECT_THROW(adapter.adapt_and_classify(bad), std::invalid_argument);
  EXPECT_FALSE(adapter.poisoned());
}

TEST(DiagnosticsSink, CsvRowsMatchStream) {
  const TrainedModel model = quick_model(54);
  const auto stream = target_stream(54, 6);
  StreamAdapter adapter(model, 0.05, true);
  std::ostringstream sink;
  adapter.attach_sink(sink);
  for (const Window& w : stream) adapter.adapt_and_classify(w);
  adapter.detach_sink();

  std::istringstream in(sink.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "tau,predicted,true_label_if_known,prob_0,prob_1,prob_2");
  std::size_t rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  EXPECT_EQ(rows, stream.size());
}

TEST(StreamRecord, SnapshotTracksLiveStatistics) {
  const TrainedModel model = quick_model(55);
  const auto stream = target_stream(55, 4);
  StreamAdapter adapter(model, 0.05, true);
  adapter.enable_snapshots(true);
  const StreamRecord r = adapter.adapt_and_classify(stream[0]);
  ASSERT_TRUE(r.stats_snapshot.has_value());
  for (std::size_t l = 0; l < model.bn.width(); ++l) {
    EXPECT_DOUBLE_EQ(r.stats_snapshot->first[l], adapter.live_bn().channels[l].running_mean);
    EXPECT_DOUBLE_EQ(r.stats_snapshot->second[l], adapter.live_bn().channels[l].running_var);
  }
  double sum = 0.0;
  for (const double p : r.probabilities) sum += p;
  EXPECT_NEAR(sum, 1.0, 1e-9);
}
