#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dabn/model.hpp"

namespace dabn {

// Outcome of one streamed window: arrival index, prediction, class
// probabilities, and optionally a snapshot of the post-update statistics.
struct StreamRecord {
  std::size_t index = 0;
  std::size_t label_index = 0;
  std::string predicted;
  std::vector<double> probabilities;
  std::optional<std::pair<std::vector<double>, std::vector<double>>> stats_snapshot;
};

// Streaming personalization state: immutable model weights plus a live copy
// of the running statistics that each incoming window updates before being
// classified through them. One adapter serves one stream; memory is constant
// in stream length.
class StreamAdapter {
 public:
  StreamAdapter(const TrainedModel& model, double momentum, bool adaptation_enabled)
      : model_(&model),
        live_bn_(model.bn),
        momentum_(momentum),
        adaptation_enabled_(adaptation_enabled),
        update_counts_(model.bn.width(), 0),
        flat_(model.arch.flat_features()),
        z_(model.arch.dense_width),
        act_(model.arch.dense_width),
        logits_(model.arch.classes) {
    check_momentum(momentum);
  }

  // Updates every channel's running statistics from the window's layer input,
  // then classifies the same window with the updated statistics, all in one
  // forward pass. The window may be discarded afterwards.
  StreamRecord adapt_and_classify(const Window& window) {
    if (poisoned_)
      throw std::runtime_error("adapter poisoned by a prior non-finite input; reset() to reuse");

    detail::conv_block_sample(*model_, window, flat_.data(), nullptr, nullptr);
    detail::dense_sample(model_->dense, flat_.data(), z_.data());
    ++forward_count_;

    for (const double v : z_)
      if (!std::isfinite(v)) {
        poisoned_ = true;
        throw std::runtime_error("adapter poisoned: non-finite layer input");
      }

    const std::size_t width = live_bn_.width();
    for (std::size_t l = 0; l < width; ++l) {
      BnChannelState& ch = live_bn_.channels[l];
      if (adaptation_enabled_) {
        ch = update_running_online(ch, z_[l], momentum_);
        ++update_counts_[l];
      }
      const double v = normalize(ch, z_[l], ch.running_mean, ch.running_var);
      act_[l] = v > 0.0 ? v : 0.0;
    }
    detail::dense_sample(model_->classifier, act_.data(), logits_.data());

    StreamRecord rec;
    rec.index = windows_seen_;
    rec.probabilities = softmax(logits_);
    for (std::size_t c = 1; c < logits_.size(); ++c)
      if (logits_[c] > logits_[rec.label_index]) rec.label_index = c;
    rec.predicted = model_->label_map[rec.label_index];
    if (snapshot_enabled_) {
      std::vector<double> means(width), vars(width);
      for (std::size_t l = 0; l < width; ++l) {
        means[l] = live_bn_.channels[l].running_mean;
        vars[l] = live_bn_.channels[l].running_var;
      }
      rec.stats_snapshot = {std::move(means), std::move(vars)};
    }
    ++windows_seen_;

    if (sink_) write_sink_row(rec, window.label);
    return rec;
  }

  // Restores the statistics to the model's post-training values.
  void reset() {
    live_bn_ = model_->bn;
    windows_seen_ = 0;
    poisoned_ = false;
    std::fill(update_counts_.begin(), update_counts_.end(), 0);
  }

  const TrainedModel& model() const { return *model_; }
  const BnLayerState& live_bn() const { return live_bn_; }
  double momentum() const { return momentum_; }
  bool adaptation_enabled() const { return adaptation_enabled_; }
  bool poisoned() const { return poisoned_; }
  std::size_t windows_seen() const { return windows_seen_; }
  std::size_t forward_count() const { return forward_count_; }
  std::span<const std::uint64_t> channel_update_counts() const { return update_counts_; }

  void enable_snapshots(bool on) { snapshot_enabled_ = on; }

  // Optional append-only CSV sink: tau,predicted,true_label_if_known,prob_*.
  void attach_sink(std::ostream& os, bool write_header = true) {
    sink_ = &os;
    if (write_header) {
      os << "tau,predicted,true_label_if_known";
      for (std::size_t c = 0; c < model_->arch.classes; ++c) os << ",prob_" << c;
      os << "\n";
    }
  }
  void detach_sink() { sink_ = nullptr; }

  // Size of the mutable per-stream state; constant in the stream length.
  std::size_t state_bytes() const {
    return sizeof(*this) + live_bn_.channels.capacity() * sizeof(BnChannelState) +
           update_counts_.capacity() * sizeof(std::uint64_t) +
           (flat_.capacity() + z_.capacity() + act_.capacity() + logits_.capacity()) *
               sizeof(double);
  }

 private:
  void write_sink_row(const StreamRecord& rec, const std::string& truth) {
    char buf[64];
    *sink_ << rec.index << ',' << rec.predicted << ',' << truth;
    for (const double p : rec.probabilities) {
      std::snprintf(buf, sizeof(buf), "%.17g", p);
      *sink_ << ',' << buf;
    }
    *sink_ << '\n';
  }

  const TrainedModel* model_;
  BnLayerState live_bn_;
  double momentum_;
  bool adaptation_enabled_;
  bool poisoned_ = false;
  bool snapshot_enabled_ = false;
  std::size_t windows_seen_ = 0;
  std::size_t forward_count_ = 0;
  std::vector<std::uint64_t> update_counts_;
  std::ostream* sink_ = nullptr;
  // scratch buffers, reused across windows
  std::vector<double> flat_, z_, act_, logits_;
};

inline StreamAdapter init_adapter(const TrainedModel& model, double momentum,
                                  bool adaptation_enabled = true) {
  return StreamAdapter(model, momentum, adaptation_enabled);
}

}  // namespace dabn
