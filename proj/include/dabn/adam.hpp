#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "dabn/model.hpp"

namespace dabn {

// Bias-corrected adaptive-moment bookkeeping, flat and aligned with
// trainable_params order.
struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::size_t step_count = 0;

  explicit AdamState(std::size_t n = 0) : first_moment(n, 0.0), second_moment(n, 0.0) {}
};

// One update with effective learning rate lr / (1 + decay * epoch).
inline void adam_step(std::span<double* const> params, std::span<const double> grads,
                      AdamState& state, const TrainHyper& hyper, std::size_t epoch) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double lr = hyper.effective_lr(epoch);
  const double bc1 = 1.0 - std::pow(hyper.beta1, t);
  const double bc2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& mval = state.first_moment[i];
    double& vval = state.second_moment[i];
    mval = hyper.beta1 * mval + (1.0 - hyper.beta1) * g;
    vval = hyper.beta2 * vval + (1.0 - hyper.beta2) * g * g;
    const double mhat = mval / bc1;
    const double vhat = vval / bc2;
    *params[i] -= lr * mhat / (std::sqrt(vhat) + hyper.eps_opt);
  }
}

}  // namespace dabn
