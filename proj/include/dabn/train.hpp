#pragma once

#include <functional>
#include <span>
#include <vector>

#include "dabn/adam.hpp"
#include "dabn/data.hpp"
#include "dabn/model.hpp"

namespace dabn {

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

namespace detail {

// Shared training loop over domain-specific batches: every batch holds one
// subject's windows, is normalized with its own per-channel moments, and
// feeds the running statistics through the batch-wise exponential update.
inline void train_epochs(TrainedModel& model, const Dataset& ds,
                         std::span<const std::size_t> source_idx, const TrainHyper& hyper,
                         std::size_t epochs, AdamState& adam, Rng& shuffle_rng, Rng& dropout_rng,
                         const EpochCallback& on_epoch) {
  const auto params = trainable_params(model);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const auto batches = make_domain_batches(ds, source_idx, hyper.batch_size, shuffle_rng);
    double loss_sum = 0.0;
    for (const DomainBatch& batch : batches) {
      auto [logits, cache] = forward(model, batch.windows, BnMode::TrainBatchStats,
                                     /*dropout_on=*/true, &dropout_rng);
      std::vector<std::size_t> labels(batch.windows.size());
      for (std::size_t i = 0; i < labels.size(); ++i)
        labels[i] = ds.label_index(batch.windows[i].label);
      loss_sum += mean_cross_entropy(logits, labels);

      for (std::size_t l = 0; l < model.bn.width(); ++l)
        model.bn.channels[l] = update_running_train(model.bn.channels[l], cache.moments[l],
                                                    model.bn.train_momentum);

      const std::vector<double> grads = backward(model, cache, labels);
      adam_step(params, grads, adam, hyper, epoch);
    }
    if (on_epoch) on_epoch(epoch, batches.empty() ? 0.0 : loss_sum / batches.size());
  }
}

inline TrainedModel train_core(const Dataset& ds, std::span<const std::size_t> source_idx,
                               const ArchConfig& arch, const TrainHyper& hyper,
                               double online_momentum, const EpochCallback& on_epoch) {
  hyper.validate();
  if (source_idx.empty()) throw std::invalid_argument("train: empty source set");
  for (const std::size_t si : source_idx) {
    if (si >= ds.subjects.size()) throw std::invalid_argument("train: bad subject index");
    if (ds.windows[si].size() < hyper.batch_size)
      throw std::invalid_argument("train: batch size exceeds windows of subject " +
                                  ds.subjects[si]);
  }
  ArchConfig a = arch;
  a.classes = ds.labels.size();
  a.window_len = ds.window_len;
  TrainedModel model = init_model(a, hyper, ds.labels, online_momentum);

  AdamState adam(trainable_params(model).size());
  Rng shuffle_rng = substream(hyper.seed, "shuffle");
  Rng dropout_rng = substream(hyper.seed, "dropout");
  train_epochs(model, ds, source_idx, hyper, hyper.epochs, adam, shuffle_rng, dropout_rng,
               on_epoch);
  return model;
}

}  // namespace detail

// Trains the multi-source model: one domain per source user, shared weights,
// per-batch normalization, running statistics accumulated over all sources.
inline TrainedModel train(const Dataset& ds, std::span<const std::size_t> source_idx,
                          const ArchConfig& arch, const TrainHyper& hyper,
                          double online_momentum = 0.01, const EpochCallback& on_epoch = {}) {
  if (source_idx.size() < 2) throw std::invalid_argument("train: need at least 2 source users");
  return detail::train_core(ds, source_idx, arch, hyper, online_momentum, on_epoch);
}

// Personal model for one user (the per-user upper bound of the evaluation
// harness); identical loop with a single source domain.
inline TrainedModel train_personal(const Dataset& ds, std::size_t subject_idx,
                                   const ArchConfig& arch, const TrainHyper& hyper,
                                   double online_momentum = 0.01,
                                   const EpochCallback& on_epoch = {}) {
  const std::size_t idx[1] = {subject_idx};
  return detail::train_core(ds, idx, arch, hyper, online_momentum, on_epoch);
}

// Continues training an existing model on a labeled window set (single
// subject), used by the supervised evaluation variants. Batches are capped at
// the available window count; running statistics keep updating as in
// training.
inline void fine_tune(TrainedModel& model, std::span<const Window> labeled_windows,
                      std::size_t epochs, const TrainHyper& hyper, std::uint64_t seed_salt) {
  if (labeled_windows.size() < 2)
    throw std::invalid_argument("fine_tune: need at least 2 labeled windows");
  if (epochs == 0) return;

  Dataset sub;
  sub.labels = model.label_map;
  sub.window_len = model.arch.window_len;
  sub.stride = 0;
  sub.pipeline = "fine-tune-subset";
  sub.subjects = {labeled_windows[0].subject};
  sub.windows.resize(1);
  for (const Window& w : labeled_windows) {
    if (w.subject != sub.subjects[0])
      throw std::invalid_argument("fine_tune: windows must come from a single subject");
    sub.windows[0].push_back(w);
  }

  TrainHyper ft = hyper;
  ft.epochs = epochs;
  ft.batch_size = std::min(hyper.batch_size, labeled_windows.size());
  if (ft.batch_size < 2) ft.batch_size = 2;

  AdamState adam(trainable_params(model).size());
  Rng shuffle_rng = substream(hyper.seed, "fine-tune-shuffle", seed_salt);
  Rng dropout_rng = substream(hyper.seed, "fine-tune-dropout", seed_salt);
  const std::size_t idx[1] = {0};
  detail::train_epochs(model, sub, idx, ft, epochs, adam, shuffle_rng, dropout_rng, {});
}

}  // namespace dabn
