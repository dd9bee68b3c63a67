#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dabn/bn_stats.hpp"
#include "dabn/data.hpp"
#include "dabn/matrix.hpp"
#include "dabn/rng.hpp"

namespace dabn {

// 1D-convolutional front end plus one normalized fully connected block:
// conv_layers x [conv -> ReLU] with zero padding, non-overlapping max pool,
// dense -> batch norm -> dropout -> ReLU, then a softmax classifier.
struct ArchConfig {
  std::size_t conv_layers = 5;
  std::size_t feature_maps = 64;
  std::size_t kernel = 5;
  std::size_t stride = 1;
  std::size_t pool = 4;
  std::size_t dense_width = 256;
  double dropout_rate = 0.5;
  std::size_t classes = 0;
  std::size_t window_len = 40;
  std::size_t in_channels = 3;

  std::size_t pooled_len() const { return window_len / pool; }
  std::size_t flat_features() const { return pooled_len() * feature_maps; }

  void validate() const {
    if (conv_layers == 0 || feature_maps == 0 || kernel == 0 || pool == 0 ||
        dense_width == 0 || classes == 0 || window_len == 0 || in_channels == 0)
      throw std::invalid_argument("arch: all counts must be >= 1");
    if (stride != 1) throw std::invalid_argument("arch: only stride 1 is supported");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
      throw std::invalid_argument("arch: dropout rate must lie in [0,1)");
    if (window_len % pool != 0)
      throw std::invalid_argument("arch: pool must divide the post-convolution length");
  }
};

struct TrainHyper {
  double learning_rate = 1e-4;
  double decay = 1e-3;
  std::size_t epochs = 649;
  std::size_t batch_size = 177;
  double train_momentum = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_opt = 1e-8;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("hyper: learning rate must be > 0");
    if (batch_size <= 1) throw std::invalid_argument("hyper: batch size must be > 1");
    if (epochs == 0) throw std::invalid_argument("hyper: epochs must be >= 1");
    if (!(decay >= 0.0)) throw std::invalid_argument("hyper: decay must be >= 0");
    check_momentum(train_momentum);
  }

  double effective_lr(std::size_t epoch) const {
    return learning_rate / (1.0 + decay * static_cast<double>(epoch));
  }
};

struct ConvLayer {
  std::size_t in_ch = 0, out_ch = 0, kernel = 0;
  std::vector<double> w;  // [out][in][k]
  std::vector<double> b;  // [out]

  double wat(std::size_t o, std::size_t c, std::size_t k) const {
    return w[(o * in_ch + c) * kernel + k];
  }
};

struct Dense {
  std::size_t in = 0, out = 0;
  std::vector<double> w;  // [out][in]
  std::vector<double> b;  // [out]
};

struct TrainedModel {
  ArchConfig arch;
  std::vector<ConvLayer> conv;
  Dense dense;
  Dense classifier;
  BnLayerState bn;
  std::vector<std::string> label_map;
  TrainHyper hyper;
};

// ---------------------------------------------------------------------------
// Parameter plumbing: one fixed flat ordering over all trainable parameters
// (conv w/b per layer, dense w/b, classifier w/b, gamma, beta).
// ---------------------------------------------------------------------------

inline std::vector<double*> trainable_params(TrainedModel& m) {
  std::vector<double*> out;
  for (auto& layer : m.conv) {
    for (double& v : layer.w) out.push_back(&v);
    for (double& v : layer.b) out.push_back(&v);
  }
  for (double& v : m.dense.w) out.push_back(&v);
  for (double& v : m.dense.b) out.push_back(&v);
  for (double& v : m.classifier.w) out.push_back(&v);
  for (double& v : m.classifier.b) out.push_back(&v);
  for (auto& ch : m.bn.channels) out.push_back(&ch.gamma);
  for (auto& ch : m.bn.channels) out.push_back(&ch.beta);
  return out;
}

inline std::vector<double> clone_params(const TrainedModel& m) {
  auto& mm = const_cast<TrainedModel&>(m);
  std::vector<double> out;
  for (double* p : trainable_params(mm)) out.push_back(*p);
  return out;
}

inline void restore_params(TrainedModel& m, std::span<const double> values) {
  const auto ps = trainable_params(m);
  if (ps.size() != values.size()) throw std::invalid_argument("restore_params: size mismatch");
  for (std::size_t i = 0; i < ps.size(); ++i) *ps[i] = values[i];
}

inline std::uint64_t model_weights_hash(const TrainedModel& m) {
  const std::vector<double> v = clone_params(m);
  return fnv1a(v.data(), v.size() * sizeof(double));
}

// Fan-in-scaled uniform initialization from the seeded weight stream.
inline TrainedModel init_model(const ArchConfig& arch, const TrainHyper& hyper,
                               std::vector<std::string> label_map, double online_momentum = 0.01) {
  ArchConfig a = arch;
  if (a.classes == 0) a.classes = label_map.size();
  a.validate();
  hyper.validate();
  if (label_map.size() != a.classes)
    throw std::invalid_argument("init_model: label map size must equal class count");

  TrainedModel m;
  m.arch = a;
  m.hyper = hyper;
  m.label_map = std::move(label_map);
  m.bn = BnLayerState(a.dense_width, hyper.train_momentum, online_momentum);

  Rng rng = substream(hyper.seed, "weights");
  const auto fill = [&rng](std::vector<double>& v, std::size_t fan_in) {
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    for (double& x : v) x = rng.uniform(-bound, bound);
  };

  std::size_t in_ch = a.in_channels;
  for (std::size_t l = 0; l < a.conv_layers; ++l) {
    ConvLayer layer;
    layer.in_ch = in_ch;
    layer.out_ch = a.feature_maps;
    layer.kernel = a.kernel;
    layer.w.resize(layer.out_ch * layer.in_ch * layer.kernel);
    layer.b.resize(layer.out_ch);
    fill(layer.w, layer.in_ch * layer.kernel);
    fill(layer.b, layer.in_ch * layer.kernel);
    m.conv.push_back(std::move(layer));
    in_ch = a.feature_maps;
  }
  m.dense.in = a.flat_features();
  m.dense.out = a.dense_width;
  m.dense.w.resize(m.dense.in * m.dense.out);
  m.dense.b.resize(m.dense.out);
  fill(m.dense.w, m.dense.in);
  fill(m.dense.b, m.dense.in);

  m.classifier.in = a.dense_width;
  m.classifier.out = a.classes;
  m.classifier.w.resize(m.classifier.in * m.classifier.out);
  m.classifier.b.resize(m.classifier.out);
  fill(m.classifier.w, m.classifier.in);
  fill(m.classifier.b, m.classifier.in);
  return m;
}

// ---------------------------------------------------------------------------
// Per-sample kernels, shared by every execution path so that batched and
// single-window evaluation are bit-identical.
// ---------------------------------------------------------------------------

namespace detail {

// One conv layer with zero padding and ReLU, channel-major buffers [ch][t].
inline void conv_relu(const ConvLayer& layer, std::size_t len, const double* in, double* out) {
  const std::size_t pad_left = (layer.kernel - 1) / 2;
  for (std::size_t o = 0; o < layer.out_ch; ++o) {
    for (std::size_t t = 0; t < len; ++t) {
      double acc = layer.b[o];
      for (std::size_t c = 0; c < layer.in_ch; ++c) {
        const double* inc = in + c * len;
        for (std::size_t k = 0; k < layer.kernel; ++k) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) -
                                     static_cast<std::ptrdiff_t>(pad_left);
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
          acc += layer.wat(o, c, k) * inc[src];
        }
      }
      out[o * len + t] = acc > 0.0 ? acc : 0.0;
    }
  }
}

// Validates the window shape and lays it out channel-major.
inline void window_to_channels(const ArchConfig& arch, const Window& w, double* out) {
  if (w.data.rows != arch.window_len || w.data.cols != arch.in_channels)
    throw std::invalid_argument("window shape does not match architecture");
  for (std::size_t c = 0; c < arch.in_channels; ++c)
    for (std::size_t t = 0; t < arch.window_len; ++t) out[c * arch.window_len + t] = w.data(t, c);
}

// Full conv block for one sample. `stages`, when non-null, receives the
// channel-major activations of every stage (input plus each conv layer);
// `argmax` receives the pooled source index per output element.
inline void conv_block_sample(const TrainedModel& m, const Window& win, double* flat_out,
                              std::vector<std::vector<double>>* stages,
                              std::uint32_t* argmax) {
  const ArchConfig& a = m.arch;
  const std::size_t len = a.window_len;
  std::vector<double> cur(a.in_channels * len);
  window_to_channels(a, win, cur.data());
  if (stages) stages->push_back(cur);

  std::vector<double> next;
  for (const ConvLayer& layer : m.conv) {
    next.assign(layer.out_ch * len, 0.0);
    conv_relu(layer, len, cur.data(), next.data());
    cur.swap(next);
    if (stages) stages->push_back(cur);
  }

  const std::size_t pooled = a.pooled_len();
  for (std::size_t o = 0; o < a.feature_maps; ++o) {
    for (std::size_t j = 0; j < pooled; ++j) {
      std::size_t best = j * a.pool;
      for (std::size_t t = j * a.pool + 1; t < (j + 1) * a.pool; ++t)
        if (cur[o * len + t] > cur[o * len + best]) best = t;
      flat_out[o * pooled + j] = cur[o * len + best];
      if (argmax) argmax[o * pooled + j] = static_cast<std::uint32_t>(best);
    }
  }
}

inline void dense_sample(const Dense& d, const double* in, double* out) {
  for (std::size_t o = 0; o < d.out; ++o) {
    double acc = d.b[o];
    const double* wr = d.w.data() + o * d.in;
    for (std::size_t i = 0; i < d.in; ++i) acc += wr[i] * in[i];
    out[o] = acc;
  }
}

}  // namespace detail

// Numerically stable softmax of one logit row.
inline std::vector<double> softmax(std::span<const double> logits) {
  double mx = logits[0];
  for (const double v : logits) mx = std::max(mx, v);
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

// Normalization-layer inputs (dense pre-activations) for a set of windows.
inline Matrix bn_layer_inputs(const TrainedModel& m, std::span<const Window> windows) {
  Matrix z(windows.size(), m.arch.dense_width);
  std::vector<double> flat(m.arch.flat_features());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    detail::conv_block_sample(m, windows[i], flat.data(), nullptr, nullptr);
    detail::dense_sample(m.dense, flat.data(), z.row(i));
  }
  return z;
}

enum class BnMode { TrainBatchStats, GlobalStats };

struct ForwardCache {
  BnMode mode = BnMode::GlobalStats;
  bool dropout_applied = false;
  // per conv stage: rows = batch, cols = channels * len (stage 0 is the input)
  std::vector<Matrix> stages;
  std::vector<std::uint32_t> pool_argmax;  // batch x flat_features
  Matrix flat;           // pooled conv output
  Matrix z;              // dense output, normalization input
  std::vector<BatchMoments> moments;  // per channel (train mode)
  Matrix xhat;           // normalized values
  Matrix dropout_scale;  // multiplicative mask actually applied
  Matrix relu_out;       // classifier input
  Matrix logits;
};

// Whole-network forward pass over a batch. In train-batch-stats mode the
// normalization uses the batch's own per-channel moments and the cache keeps
// what the backward pass needs; in global-stats mode it uses the running
// statistics and dropout is an identity.
inline std::pair<Matrix, ForwardCache> forward(const TrainedModel& m,
                                               std::span<const Window> batch, BnMode mode,
                                               bool dropout_on, Rng* rng) {
  const ArchConfig& a = m.arch;
  if (batch.empty()) throw std::invalid_argument("forward: empty batch");
  if (mode == BnMode::TrainBatchStats && batch.size() < 2)
    throw std::invalid_argument("forward: train-batch-stats mode needs batch size > 1");
  const bool apply_dropout = dropout_on && mode == BnMode::TrainBatchStats && a.dropout_rate > 0.0;
  if (apply_dropout && rng == nullptr)
    throw std::invalid_argument("forward: dropout requires a generator");

  const std::size_t n = batch.size();
  ForwardCache cache;
  cache.mode = mode;
  cache.dropout_applied = apply_dropout;
  cache.stages.assign(a.conv_layers + 1, Matrix());
  cache.stages[0] = Matrix(n, a.in_channels * a.window_len);
  for (std::size_t l = 0; l < a.conv_layers; ++l)
    cache.stages[l + 1] = Matrix(n, a.feature_maps * a.window_len);
  cache.pool_argmax.assign(n * a.flat_features(), 0);
  cache.flat = Matrix(n, a.flat_features());
  cache.z = Matrix(n, a.dense_width);

  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::vector<double>> stages;
    detail::conv_block_sample(m, batch[i], cache.flat.row(i), &stages,
                              cache.pool_argmax.data() + i * a.flat_features());
    for (std::size_t s = 0; s < stages.size(); ++s)
      std::copy(stages[s].begin(), stages[s].end(), cache.stages[s].row(i));
    detail::dense_sample(m.dense, cache.flat.row(i), cache.z.row(i));
  }

  // normalization
  cache.xhat = Matrix(n, a.dense_width);
  if (mode == BnMode::TrainBatchStats) {
    cache.moments.resize(a.dense_width);
    std::vector<double> col(n);
    for (std::size_t l = 0; l < a.dense_width; ++l) {
      for (std::size_t i = 0; i < n; ++i) col[i] = cache.z(i, l);
      cache.moments[l] = batch_moments(col);
      for (std::size_t i = 0; i < n; ++i)
        cache.xhat(i, l) =
            normalize(m.bn.channels[l], cache.z(i, l), cache.moments[l].mean, cache.moments[l].var);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t l = 0; l < a.dense_width; ++l) {
        const BnChannelState& ch = m.bn.channels[l];
        cache.xhat(i, l) = normalize(ch, cache.z(i, l), ch.running_mean, ch.running_var);
      }
  }

  // dropout (inverted scaling) and ReLU
  cache.dropout_scale = Matrix(n, a.dense_width, 1.0);
  if (apply_dropout) {
    const double keep = 1.0 - a.dropout_rate;
    for (double& s : cache.dropout_scale.data) s = rng->uniform01() < keep ? 1.0 / keep : 0.0;
  }
  cache.relu_out = Matrix(n, a.dense_width);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < a.dense_width; ++l) {
      const double v = cache.xhat(i, l) * cache.dropout_scale(i, l);
      cache.relu_out(i, l) = v > 0.0 ? v : 0.0;
    }

  cache.logits = Matrix(n, a.classes);
  for (std::size_t i = 0; i < n; ++i)
    detail::dense_sample(m.classifier, cache.relu_out.row(i), cache.logits.row(i));
  return {cache.logits, std::move(cache)};
}

inline double mean_cross_entropy(const Matrix& logits, std::span<const std::size_t> labels) {
  if (logits.rows != labels.size()) throw std::invalid_argument("loss: label count mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const auto probs = softmax(std::span<const double>(logits.row(i), logits.cols));
    loss += -std::log(std::max(probs[labels[i]], 1e-300));
  }
  return loss / static_cast<double>(logits.rows);
}

// Analytic gradients of the mean cross-entropy over the batch, flattened in
// trainable_params order. Requires a cache from train-batch-stats mode.
inline std::vector<double> backward(const TrainedModel& m, const ForwardCache& cache,
                                    std::span<const std::size_t> labels) {
  const ArchConfig& a = m.arch;
  if (cache.mode != BnMode::TrainBatchStats)
    throw std::invalid_argument("backward: cache must come from train-batch-stats mode");
  const std::size_t n = cache.logits.rows;
  if (labels.size() != n) throw std::invalid_argument("backward: label count mismatch");
  for (const std::size_t y : labels)
    if (y >= a.classes) throw std::invalid_argument("backward: label out of range");

  // dL/dlogits = (softmax - onehot) / n
  Matrix dlogits(n, a.classes);
  for (std::size_t i = 0; i < n; ++i) {
    const auto probs = softmax(std::span<const double>(cache.logits.row(i), a.classes));
    for (std::size_t c = 0; c < a.classes; ++c)
      dlogits(i, c) = (probs[c] - (c == labels[i] ? 1.0 : 0.0)) / static_cast<double>(n);
  }

  // classifier
  std::vector<double> d_cw(m.classifier.w.size(), 0.0), d_cb(m.classifier.b.size(), 0.0);
  Matrix d_relu(n, a.dense_width, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < a.classes; ++c) {
      const double g = dlogits(i, c);
      d_cb[c] += g;
      const double* act = cache.relu_out.row(i);
      double* wrow = d_cw.data() + c * a.dense_width;
      const double* w = m.classifier.w.data() + c * a.dense_width;
      for (std::size_t l = 0; l < a.dense_width; ++l) {
        wrow[l] += g * act[l];
        d_relu(i, l) += g * w[l];
      }
    }

  // ReLU and dropout
  Matrix d_xhat(n, a.dense_width);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < a.dense_width; ++l) {
      const double mask = cache.relu_out(i, l) > 0.0 ? 1.0 : 0.0;
      d_xhat(i, l) = d_relu(i, l) * mask * cache.dropout_scale(i, l);
    }

  // batch normalization
  const BnBackwardResult bn = bn_backward(m.bn, cache.z, cache.moments, d_xhat);

  // dense
  std::vector<double> d_dw(m.dense.w.size(), 0.0), d_db(m.dense.b.size(), 0.0);
  Matrix d_flat(n, a.flat_features(), 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < a.dense_width; ++l) {
      const double g = bn.input_grads(i, l);
      d_db[l] += g;
      const double* in = cache.flat.row(i);
      double* wrow = d_dw.data() + l * m.dense.in;
      const double* w = m.dense.w.data() + l * m.dense.in;
      for (std::size_t f = 0; f < m.dense.in; ++f) {
        wrow[f] += g * in[f];
        d_flat(i, f) += g * w[f];
      }
    }

  // unpool into the last conv stage
  const std::size_t len = a.window_len;
  Matrix d_stage(n, a.feature_maps * len, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < a.flat_features(); ++f) {
      const std::size_t o = f / a.pooled_len();
      const std::uint32_t src = cache.pool_argmax[i * a.flat_features() + f];
      d_stage(i, o * len + src) += d_flat(i, f);
    }

  // conv layers, top down
  std::vector<std::vector<double>> d_conv_w(a.conv_layers), d_conv_b(a.conv_layers);
  for (std::size_t l = 0; l < a.conv_layers; ++l) {
    d_conv_w[l].assign(m.conv[l].w.size(), 0.0);
    d_conv_b[l].assign(m.conv[l].b.size(), 0.0);
  }
  for (std::size_t layer_idx = a.conv_layers; layer_idx-- > 0;) {
    const ConvLayer& layer = m.conv[layer_idx];
    const Matrix& out_stage = cache.stages[layer_idx + 1];
    const Matrix& in_stage = cache.stages[layer_idx];
    const std::size_t pad_left = (layer.kernel - 1) / 2;
    Matrix d_in(n, layer.in_ch * len, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* outs = out_stage.row(i);
      const double* ins = in_stage.row(i);
      double* dins = d_in.row(i);
      const double* douts = d_stage.row(i);
      for (std::size_t o = 0; o < layer.out_ch; ++o) {
        for (std::size_t t = 0; t < len; ++t) {
          double g = douts[o * len + t];
          if (g == 0.0) continue;
          if (!(outs[o * len + t] > 0.0)) continue;  // ReLU mask
          d_conv_b[layer_idx][o] += g;
          for (std::size_t c = 0; c < layer.in_ch; ++c) {
            for (std::size_t k = 0; k < layer.kernel; ++k) {
              const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) -
                                         static_cast<std::ptrdiff_t>(pad_left);
              if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
              d_conv_w[layer_idx][(o * layer.in_ch + c) * layer.kernel + k] +=
                  g * ins[c * len + static_cast<std::size_t>(src)];
              dins[c * len + static_cast<std::size_t>(src)] += g * layer.wat(o, c, k);
            }
          }
        }
      }
    }
    d_stage = std::move(d_in);
  }

  // flatten in trainable_params order
  std::vector<double> grads;
  for (std::size_t l = 0; l < a.conv_layers; ++l) {
    grads.insert(grads.end(), d_conv_w[l].begin(), d_conv_w[l].end());
    grads.insert(grads.end(), d_conv_b[l].begin(), d_conv_b[l].end());
  }
  grads.insert(grads.end(), d_dw.begin(), d_dw.end());
  grads.insert(grads.end(), d_db.begin(), d_db.end());
  grads.insert(grads.end(), d_cw.begin(), d_cw.end());
  grads.insert(grads.end(), d_cb.begin(), d_cb.end());
  grads.insert(grads.end(), bn.grad_gamma.begin(), bn.grad_gamma.end());
  grads.insert(grads.end(), bn.grad_beta.begin(), bn.grad_beta.end());
  return grads;
}

struct Prediction {
  std::size_t label_index = 0;
  std::string label;
  std::vector<double> probabilities;
};

// Classification with the stored running statistics; deterministic, ties go
// to the lowest class index.
inline Prediction predict(const TrainedModel& m, const Window& window) {
  std::vector<double> flat(m.arch.flat_features());
  detail::conv_block_sample(m, window, flat.data(), nullptr, nullptr);
  std::vector<double> z(m.arch.dense_width);
  detail::dense_sample(m.dense, flat.data(), z.data());
  std::vector<double> act(m.arch.dense_width);
  for (std::size_t l = 0; l < m.arch.dense_width; ++l) {
    const BnChannelState& ch = m.bn.channels[l];
    const double v = normalize(ch, z[l], ch.running_mean, ch.running_var);
    act[l] = v > 0.0 ? v : 0.0;
  }
  std::vector<double> logits(m.arch.classes);
  detail::dense_sample(m.classifier, act.data(), logits.data());

  Prediction p;
  p.probabilities = softmax(logits);
  for (std::size_t c = 1; c < logits.size(); ++c)
    if (logits[c] > logits[p.label_index]) p.label_index = c;
  p.label = m.label_map[p.label_index];
  return p;
}

}  // namespace dabn
