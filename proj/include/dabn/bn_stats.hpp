#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "dabn/matrix.hpp"

namespace dabn {

// First and second moments of one channel over a batch. The variance is the
// biased estimate (divisor |B|), matching what the normalization uses.
struct BatchMoments {
  double mean = 0.0;
  double var = 0.0;
  std::size_t count = 0;
};

// One normalization channel: trainable affine parameters plus the running
// statistics used whenever no batch is available to normalize with.
struct BnChannelState {
  double gamma = 1.0;
  double beta = 0.0;
  double running_mean = 0.0;
  double running_var = 1.0;
  double epsilon = 1e-5;
};

inline void check_momentum(double momentum) {
  if (!(momentum > 0.0 && momentum < 1.0))
    throw std::invalid_argument("momentum must lie strictly inside (0,1)");
}

// Channel states for one normalization layer, plus the two momenta: one for
// the batch-wise running update during training, one for the per-instance
// update during streaming.
struct BnLayerState {
  std::vector<BnChannelState> channels;
  double train_momentum = 0.1;
  double online_momentum = 0.01;

  BnLayerState() = default;
  BnLayerState(std::size_t width, double train_m, double online_m, double eps = 1e-5) {
    check_momentum(train_m);
    check_momentum(online_m);
    if (width == 0) throw std::invalid_argument("layer width must be >= 1");
    if (!(eps > 0.0)) throw std::invalid_argument("epsilon must be > 0");
    train_momentum = train_m;
    online_momentum = online_m;
    channels.assign(width, BnChannelState{1.0, 0.0, 0.0, 1.0, eps});
  }

  std::size_t width() const { return channels.size(); }
};

// Mean and biased variance over a batch of channel inputs.
inline BatchMoments batch_moments(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("batch_moments: empty batch");
  double sum = 0.0;
  for (const double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("batch_moments: non-finite value");
    sum += v;
  }
  const double n = static_cast<double>(values.size());
  const double mean = sum / n;
  double sq = 0.0;
  for (const double v : values) {
    const double d = v - mean;
    sq += d * d;
  }
  return BatchMoments{mean, sq / n, values.size()};
}

// Batch-wise exponential update of the running statistics. The |B|/(|B|-1)
// factor turns the biased batch variance into an unbiased one, so batches of
// size 1 are rejected.
inline BnChannelState update_running_train(const BnChannelState& state,
                                           const BatchMoments& moments, double momentum) {
  check_momentum(momentum);
  if (moments.count <= 1)
    throw std::invalid_argument("update_running_train: batch size must be > 1");
  if (!(moments.var >= 0.0) || !std::isfinite(moments.mean))
    throw std::invalid_argument("update_running_train: invalid moments");
  const double n = static_cast<double>(moments.count);
  const double bessel = n / (n - 1.0);
  BnChannelState out = state;
  out.running_mean = (1.0 - momentum) * state.running_mean + momentum * moments.mean;
  out.running_var = (1.0 - momentum) * state.running_var + momentum * bessel * moments.var;
  return out;
}

// Single-instance exponential update of the running statistics. The variance
// recurrence uses the pre-update mean and keeps the estimate non-negative for
// every finite input.
inline BnChannelState update_running_online(const BnChannelState& state, double z,
                                            double momentum) {
  check_momentum(momentum);
  if (!std::isfinite(z)) throw std::invalid_argument("update_running_online: non-finite input");
  const double d = z - state.running_mean;
  BnChannelState out = state;
  out.running_mean = (1.0 - momentum) * state.running_mean + momentum * z;
  out.running_var = (1.0 - momentum) * (state.running_var + momentum * d * d);
  return out;
}

// Affine-normalized value of z under the supplied moments. Callers pass batch
// moments while training and running statistics otherwise.
inline double normalize(const BnChannelState& state, double z, double mean, double var) {
  if (!(var >= 0.0)) throw std::invalid_argument("normalize: negative variance");
  return state.gamma * (z - mean) / std::sqrt(var + state.epsilon) + state.beta;
}

struct BnBackwardResult {
  Matrix input_grads;             // |B| x L
  std::vector<double> grad_gamma; // L
  std::vector<double> grad_beta;  // L
};

// Training-mode gradients through the normalization, with the batch mean and
// variance treated as functions of the batch inputs.
inline BnBackwardResult bn_backward(const BnLayerState& layer, const Matrix& batch_inputs,
                                    std::span<const BatchMoments> moments,
                                    const Matrix& upstream_grads) {
  const std::size_t width = layer.width();
  if (batch_inputs.cols != width || moments.size() != width ||
      !batch_inputs.same_shape(upstream_grads))
    throw std::invalid_argument("bn_backward: shape mismatch");
  const std::size_t n = batch_inputs.rows;
  if (n == 0) throw std::invalid_argument("bn_backward: empty batch");

  BnBackwardResult out;
  out.input_grads = Matrix(n, width);
  out.grad_gamma.assign(width, 0.0);
  out.grad_beta.assign(width, 0.0);

  const double m = static_cast<double>(n);
  for (std::size_t l = 0; l < width; ++l) {
    const BnChannelState& ch = layer.channels[l];
    const double inv_std = 1.0 / std::sqrt(moments[l].var + ch.epsilon);

    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dy = upstream_grads(i, l);
      const double xhat = (batch_inputs(i, l) - moments[l].mean) * inv_std;
      sum_dy += dy;
      sum_dy_xhat += dy * xhat;
    }
    out.grad_beta[l] = sum_dy;
    out.grad_gamma[l] = sum_dy_xhat;

    const double g = ch.gamma;
    for (std::size_t i = 0; i < n; ++i) {
      const double dy = upstream_grads(i, l);
      const double xhat = (batch_inputs(i, l) - moments[l].mean) * inv_std;
      out.input_grads(i, l) = g * inv_std / m * (m * dy - sum_dy - xhat * sum_dy_xhat);
    }
  }
  return out;
}

}  // namespace dabn
