#pragma once

// Straight-line reference evaluator for the network, independent of the
// library's forward implementation. Everything is written in the most literal
// way possible: explicit zero-padded buffers, (time, channel) indexing and no
// shared helpers, so it can serve as an oracle for the optimized path.

#include <cmath>
#include <vector>

#include "dabn/model.hpp"

namespace refnet {

struct Activations {
  std::vector<std::vector<double>> conv_stages;  // [stage][t * ch + c], post-ReLU
  std::vector<double> pooled;                    // [t * ch + c] over pooled time
  std::vector<double> dense_out;                 // normalization input
  std::vector<double> bn_out;
  std::vector<double> logits;
  std::vector<double> probabilities;
  // smallest distance to a non-differentiable point: ReLU pre-activations,
  // pooling winner-vs-runner-up gaps, and the post-normalization ReLU inputs
  double kink_margin = 1e300;
};

// Evaluates one window with explicitly supplied per-channel normalization
// moments (running statistics or batch moments); dropout is off.
inline Activations evaluate(const dabn::TrainedModel& model, const dabn::Window& window,
                            const std::vector<double>& bn_mean,
                            const std::vector<double>& bn_var) {
  const auto& arch = model.arch;
  const std::size_t len = arch.window_len;
  Activations acts;

  // input stage, (t, c) layout
  std::vector<double> stage(len * arch.in_channels);
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t c = 0; c < arch.in_channels; ++c)
      stage[t * arch.in_channels + c] = window.data(t, c);
  acts.conv_stages.push_back(stage);

  std::size_t in_ch = arch.in_channels;
  for (std::size_t layer = 0; layer < arch.conv_layers; ++layer) {
    const dabn::ConvLayer& cl = model.conv[layer];
    const std::size_t pad_left = (arch.kernel - 1) / 2;
    const std::size_t pad_right = arch.kernel - 1 - pad_left;
    // build an explicitly padded copy of the input
    std::vector<double> padded((len + pad_left + pad_right) * in_ch, 0.0);
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t c = 0; c < in_ch; ++c)
        padded[(t + pad_left) * in_ch + c] = stage[t * in_ch + c];

    std::vector<double> next(len * cl.out_ch, 0.0);
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t o = 0; o < cl.out_ch; ++o) {
        double acc = cl.b[o];
        for (std::size_t k = 0; k < arch.kernel; ++k)
          for (std::size_t c = 0; c < in_ch; ++c)
            acc += cl.w[(o * in_ch + c) * arch.kernel + k] * padded[(t + k) * in_ch + c];
        acts.kink_margin = std::min(acts.kink_margin, std::abs(acc));
        next[t * cl.out_ch + o] = std::max(0.0, acc);
      }
    }
    stage = next;
    in_ch = cl.out_ch;
    acts.conv_stages.push_back(stage);
  }

  // non-overlapping max pooling over time
  const std::size_t pooled_len = len / arch.pool;
  acts.pooled.assign(pooled_len * in_ch, 0.0);
  for (std::size_t j = 0; j < pooled_len; ++j)
    for (std::size_t c = 0; c < in_ch; ++c) {
      double best = stage[(j * arch.pool) * in_ch + c];
      double second = -1e300;
      for (std::size_t k = 1; k < arch.pool; ++k) {
        const double v = stage[(j * arch.pool + k) * in_ch + c];
        if (v > best) {
          second = best;
          best = v;
        } else {
          second = std::max(second, v);
        }
      }
      // a winner swap only matters when the runner-up is itself active;
      // clipped entries are pinned at zero and covered by the ReLU margins
      if (second > 0.0) acts.kink_margin = std::min(acts.kink_margin, best - second);
      acts.pooled[j * in_ch + c] = best;
    }

  // dense layer; the library flattens channel-major, so index accordingly
  acts.dense_out.assign(arch.dense_width, 0.0);
  for (std::size_t d = 0; d < arch.dense_width; ++d) {
    double acc = model.dense.b[d];
    for (std::size_t c = 0; c < in_ch; ++c)
      for (std::size_t j = 0; j < pooled_len; ++j)
        acc += model.dense.w[d * model.dense.in + c * pooled_len + j] *
               acts.pooled[j * in_ch + c];
    acts.dense_out[d] = acc;
  }

  // batch norm with supplied moments, then ReLU (dropout off)
  acts.bn_out.assign(arch.dense_width, 0.0);
  std::vector<double> relu(arch.dense_width, 0.0);
  for (std::size_t d = 0; d < arch.dense_width; ++d) {
    const auto& ch = model.bn.channels[d];
    const double xhat =
        ch.gamma * (acts.dense_out[d] - bn_mean[d]) / std::sqrt(bn_var[d] + ch.epsilon) + ch.beta;
    acts.kink_margin = std::min(acts.kink_margin, std::abs(xhat));
    acts.bn_out[d] = xhat;
    relu[d] = std::max(0.0, xhat);
  }

  acts.logits.assign(arch.classes, 0.0);
  for (std::size_t c = 0; c < arch.classes; ++c) {
    double acc = model.classifier.b[c];
    for (std::size_t d = 0; d < arch.dense_width; ++d)
      acc += model.classifier.w[c * arch.dense_width + d] * relu[d];
    acts.logits[c] = acc;
  }

  double mx = acts.logits[0];
  for (const double v : acts.logits) mx = std::max(mx, v);
  double sum = 0.0;
  acts.probabilities.assign(arch.classes, 0.0);
  for (std::size_t c = 0; c < arch.classes; ++c) {
    acts.probabilities[c] = std::exp(acts.logits[c] - mx);
    sum += acts.probabilities[c];
  }
  for (double& p : acts.probabilities) p /= sum;
  return acts;
}

}  // namespace refnet
