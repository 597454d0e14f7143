#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "magloc/core.hpp"
#include "magloc/error.hpp"
#include "magloc/learners/knn.hpp"
#include "magloc/rng.hpp"

namespace magloc {

inline constexpr std::size_t embedding_size = 100;

/// Filters per convolutional layer for a network of `layers` conv layers.
inline std::size_t filters_for_depth(std::size_t layers) {
  switch (layers) {
    case 2: return 4;
    case 3: return 8;
    case 4: return 16;
  }
  fail(errc::configuration, "conv layer count must be 2, 3 or 4 (got " + std::to_string(layers) + ")");
}

struct network_config {
  std::size_t conv_layers = 3;
  std::size_t kernel_width = 3;
  std::size_t embedding_dim = embedding_size;
  double margin = 1.0;
  double learning_rate = 1e-3;
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  std::size_t pairs_per_epoch = 256;
  std::size_t k = 5;  // neighbours used when classifying in embedding space
  std::uint64_t seed = 0;

  void validate() const {
    filters_for_depth(conv_layers);
    if (embedding_dim != embedding_size) fail(errc::configuration, "embedding dimension is fixed at 100");
    if (kernel_width < 1) fail(errc::configuration, "kernel width must be >= 1");
    if (batch_size < 1) fail(errc::configuration, "batch size must be >= 1");
    if (!(margin > 0.0)) fail(errc::configuration, "contrastive margin must be positive");
  }
};

struct conv_shape {
  std::size_t in_channels = 1;
  std::size_t filters = 1;
  std::size_t width = 1;
  std::size_t weight_offset = 0;  // filters x in_channels x width, row-major
  std::size_t bias_offset = 0;

  std::size_t weight(std::size_t f, std::size_t c, std::size_t k) const {
    return weight_offset + (f * in_channels + c) * width + k;
  }
};

/// Conv(valid) -> ReLU -> max-pool(2) per layer, global average over time,
/// then an affine map to the embedding. Both branches of a pair evaluate this
/// one network, so every parameter lives in the single `params` store.
struct network {
  network_config config;
  std::vector<conv_shape> conv;
  std::size_t dense_in = 0;
  std::size_t dense_out = 0;
  std::size_t dense_weight_offset = 0;  // dense_out x dense_in
  std::size_t dense_bias_offset = 0;
  std::vector<double> params;
  // Input map: (x - shift) / scale, where shift is the input's own mean when
  // center_inputs is set.
  bool center_inputs = false;
  double input_shift = 0.0;
  double input_scale = 1.0;
  std::vector<double> loss_history;

  std::size_t parameter_count() const { return params.size(); }

  /// Shortest input the stack accepts.
  std::size_t min_input_length() const {
    std::size_t len = 1;  // length entering the global average
    for (auto it = conv.rbegin(); it != conv.rend(); ++it) len = 2 * len + it->width - 1;
    return len;
  }
};

/// Lays out parameters for an explicit list of conv layers (filters, width)
/// with zero values; used directly for hand-built fixtures.
inline network make_network(const std::vector<std::pair<std::size_t, std::size_t>>& layers, std::size_t out_dim) {
  network net;
  std::size_t offset = 0, channels = 1;
  for (const auto& [filters, width] : layers) {
    conv_shape s;
    s.in_channels = channels;
    s.filters = filters;
    s.width = width;
    s.weight_offset = offset;
    offset += filters * channels * width;
    s.bias_offset = offset;
    offset += filters;
    net.conv.push_back(s);
    channels = filters;
  }
  net.dense_in = channels;
  net.dense_out = out_dim;
  net.dense_weight_offset = offset;
  offset += out_dim * channels;
  net.dense_bias_offset = offset;
  offset += out_dim;
  net.params.assign(offset, 0.0);
  return net;
}

/// Glorot-uniform weights, zero biases. `zero` leaves every parameter at zero.
inline network init_network(const network_config& cfg, std::uint64_t seed, bool zero = false) {
  cfg.validate();
  const std::size_t filters = filters_for_depth(cfg.conv_layers);
  std::vector<std::pair<std::size_t, std::size_t>> layers(cfg.conv_layers, {filters, cfg.kernel_width});
  network net = make_network(layers, cfg.embedding_dim);
  net.config = cfg;
  net.config.seed = seed;
  if (zero) return net;
  auto rng = make_rng(seed, 0x5ea3e5eULL);
  auto fill = [&](std::size_t offset, std::size_t count, double fan_in, double fan_out) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-a, a);
    for (std::size_t i = 0; i < count; ++i) net.params[offset + i] = u(rng);
  };
  for (const auto& s : net.conv)
    fill(s.weight_offset, s.filters * s.in_channels * s.width, static_cast<double>(s.in_channels * s.width),
         static_cast<double>(s.filters * s.width));
  fill(net.dense_weight_offset, net.dense_out * net.dense_in, static_cast<double>(net.dense_in),
       static_cast<double>(net.dense_out));
  return net;
}

namespace detail {

// Channel-major activations: data[c * length + t].
struct activation {
  std::size_t channels = 0;
  std::size_t length = 0;
  std::vector<double> data;
};

// Valid cross-correlation: out[f][t] = b[f] + sum_{c,k} w[f][c][k] * in[c][t + k].
inline activation conv1d_valid(const activation& in, const conv_shape& s, std::span<const double> params) {
  activation out;
  out.channels = s.filters;
  out.length = in.length - s.width + 1;
  out.data.assign(out.channels * out.length, 0.0);
  for (std::size_t f = 0; f < s.filters; ++f) {
    double* o = &out.data[f * out.length];
    const double b = params[s.bias_offset + f];
    for (std::size_t t = 0; t < out.length; ++t) o[t] = b;
    for (std::size_t c = 0; c < s.in_channels; ++c) {
      const double* x = &in.data[c * in.length];
      for (std::size_t k = 0; k < s.width; ++k) {
        const double w = params[s.weight(f, c, k)];
        for (std::size_t t = 0; t < out.length; ++t) o[t] += w * x[t + k];
      }
    }
  }
  return out;
}

struct layer_cache {
  activation input;
  activation pre;  // conv output before ReLU
  std::vector<std::size_t> argmax;  // per pooled cell, index into pre.data
  activation pooled;
};

struct forward_cache {
  std::vector<layer_cache> layers;
  std::vector<double> pooled_mean;  // global average per channel
  std::vector<double> output;
};

inline forward_cache forward_pass(const network& net, std::span<const double> x) {
  if (x.size() < net.min_input_length())
    fail(errc::too_short, "network input of " + std::to_string(x.size()) + " samples is shorter than the " +
                              std::to_string(net.min_input_length()) + "-sample receptive field");
  forward_cache cache;
  activation cur;
  cur.channels = 1;
  cur.length = x.size();
  cur.data.resize(x.size());
  double shift = net.input_shift;
  if (net.center_inputs) shift = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) cur.data[i] = (x[i] - shift) / net.input_scale;

  for (const auto& s : net.conv) {
    layer_cache lc;
    lc.input = cur;
    lc.pre = conv1d_valid(cur, s, net.params);
    activation pooled;
    pooled.channels = s.filters;
    pooled.length = lc.pre.length / 2;
    pooled.data.assign(pooled.channels * pooled.length, 0.0);
    lc.argmax.assign(pooled.data.size(), 0);
    for (std::size_t f = 0; f < s.filters; ++f) {
      for (std::size_t t = 0; t < pooled.length; ++t) {
        const std::size_t i0 = f * lc.pre.length + 2 * t, i1 = i0 + 1;
        const double a0 = std::max(0.0, lc.pre.data[i0]), a1 = std::max(0.0, lc.pre.data[i1]);
        const bool second = a1 > a0;
        pooled.data[f * pooled.length + t] = second ? a1 : a0;
        lc.argmax[f * pooled.length + t] = second ? i1 : i0;
      }
    }
    lc.pooled = pooled;
    cur = std::move(pooled);
    cache.layers.push_back(std::move(lc));
  }

  cache.pooled_mean.assign(cur.channels, 0.0);
  for (std::size_t c = 0; c < cur.channels; ++c) {
    double s = 0.0;
    for (std::size_t t = 0; t < cur.length; ++t) s += cur.data[c * cur.length + t];
    cache.pooled_mean[c] = s / static_cast<double>(cur.length);
  }
  cache.output.assign(net.dense_out, 0.0);
  for (std::size_t o = 0; o < net.dense_out; ++o) {
    double s = net.params[net.dense_bias_offset + o];
    for (std::size_t c = 0; c < net.dense_in; ++c)
      s += net.params[net.dense_weight_offset + o * net.dense_in + c] * cache.pooled_mean[c];
    cache.output[o] = s;
  }
  return cache;
}

// Accumulates d(loss)/d(params) into grad given d(loss)/d(output).
inline void backward_pass(const network& net, const forward_cache& cache, std::span<const double> d_out,
                          std::vector<double>& grad) {
  std::vector<double> d_mean(net.dense_in, 0.0);
  for (std::size_t o = 0; o < net.dense_out; ++o) {
    grad[net.dense_bias_offset + o] += d_out[o];
    for (std::size_t c = 0; c < net.dense_in; ++c) {
      grad[net.dense_weight_offset + o * net.dense_in + c] += d_out[o] * cache.pooled_mean[c];
      d_mean[c] += d_out[o] * net.params[net.dense_weight_offset + o * net.dense_in + c];
    }
  }

  const auto& last = cache.layers.back().pooled;
  std::vector<double> d_act(last.data.size());
  for (std::size_t c = 0; c < last.channels; ++c)
    for (std::size_t t = 0; t < last.length; ++t)
      d_act[c * last.length + t] = d_mean[c] / static_cast<double>(last.length);

  for (std::size_t l = net.conv.size(); l-- > 0;) {
    const auto& s = net.conv[l];
    const auto& lc = cache.layers[l];
    // Unpool into the conv output, gated by ReLU.
    std::vector<double> d_pre(lc.pre.data.size(), 0.0);
    for (std::size_t i = 0; i < d_act.size(); ++i) {
      const std::size_t src = lc.argmax[i];
      if (lc.pre.data[src] > 0.0) d_pre[src] += d_act[i];
    }
    std::vector<double> d_in(lc.input.data.size(), 0.0);
    const std::size_t out_len = lc.pre.length, in_len = lc.input.length;
    for (std::size_t f = 0; f < s.filters; ++f) {
      const double* g = &d_pre[f * out_len];
      double gb = 0.0;
      for (std::size_t t = 0; t < out_len; ++t) gb += g[t];
      grad[s.bias_offset + f] += gb;
      for (std::size_t c = 0; c < s.in_channels; ++c) {
        const double* x = &lc.input.data[c * in_len];
        double* dx = &d_in[c * in_len];
        for (std::size_t k = 0; k < s.width; ++k) {
          const double w = net.params[s.weight(f, c, k)];
          double gw = 0.0;
          for (std::size_t t = 0; t < out_len; ++t) {
            gw += g[t] * x[t + k];
            dx[t + k] += g[t] * w;
          }
          grad[s.weight(f, c, k)] += gw;
        }
      }
    }
    d_act = std::move(d_in);
  }
}

}  // namespace detail

inline std::vector<double> forward(const network& net, std::span<const double> x) {
  return detail::forward_pass(net, x).output;
}

/// Hadsell-style contrastive loss: d^2 for a same-class pair, max(0, m - d)^2 otherwise.
inline double contrastive_loss(std::span<const double> e1, std::span<const double> e2, bool same, double margin) {
  if (e1.size() != e2.size()) fail(errc::dimension, "contrastive loss: embedding sizes differ");
  double d2 = 0.0;
  for (std::size_t i = 0; i < e1.size(); ++i) d2 += (e1[i] - e2[i]) * (e1[i] - e2[i]);
  if (same) return d2;
  const double h = std::max(0.0, margin - std::sqrt(d2));
  return h * h;
}

/// Loss of one pair and its gradient with respect to the shared parameters.
inline double pair_gradient(const network& net, std::span<const double> x1, std::span<const double> x2, bool same,
                            std::vector<double>& grad) {
  const auto c1 = detail::forward_pass(net, x1);
  const auto c2 = detail::forward_pass(net, x2);
  const auto& e1 = c1.output;
  const auto& e2 = c2.output;
  const std::size_t n = e1.size();
  double d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) d2 += (e1[i] - e2[i]) * (e1[i] - e2[i]);
  const double d = std::sqrt(d2);
  std::vector<double> g1(n, 0.0), g2(n, 0.0);
  double loss = 0.0;
  if (same) {
    loss = d2;
    for (std::size_t i = 0; i < n; ++i) {
      g1[i] = 2.0 * (e1[i] - e2[i]);
      g2[i] = -g1[i];
    }
  } else if (d < net.config.margin) {
    const double h = net.config.margin - d;
    loss = h * h;
    if (d > 0.0) {
      for (std::size_t i = 0; i < n; ++i) {
        g1[i] = -2.0 * h * (e1[i] - e2[i]) / d;
        g2[i] = -g1[i];
      }
    }
  }
  grad.assign(net.params.size(), 0.0);
  detail::backward_pass(net, c1, g1, grad);
  detail::backward_pass(net, c2, g2, grad);
  return loss;
}

/// Largest |analytic - numeric| / max(1, |numeric|) over a seeded subset of
/// parameter coordinates, numeric gradients by central differences.
inline double gradient_check(const network& net, std::span<const double> x1, std::span<const double> x2, bool same,
                             std::size_t coordinates = 200, std::uint64_t seed = 0, double h = 1e-5) {
  std::vector<double> analytic;
  pair_gradient(net, x1, x2, same, analytic);
  std::vector<std::size_t> idx(net.params.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (coordinates < idx.size()) {
    auto rng = make_rng(seed, 0x9c4ecULL);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(coordinates);
    std::sort(idx.begin(), idx.end());
  }
  network probe = net;
  auto loss_at = [&]() {
    return contrastive_loss(forward(probe, x1), forward(probe, x2), same, probe.config.margin);
  };
  double worst = 0.0;
  for (auto i : idx) {
    const double orig = probe.params[i];
    probe.params[i] = orig + h;
    const double up = loss_at();
    probe.params[i] = orig - h;
    const double down = loss_at();
    probe.params[i] = orig;
    const double numeric = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric)));
  }
  return worst;
}

/// Takes one plain gradient-descent step on the mean loss of a batch of pairs.
struct training_pair {
  std::size_t first = 0;
  std::size_t second = 0;
  bool same = false;
};

inline double descend(network& net, const std::vector<series>& inputs, std::span<const training_pair> batch,
                      double learning_rate) {
  std::vector<double> total(net.params.size(), 0.0), grad;
  double loss = 0.0;
  for (const auto& p : batch) {
    loss += pair_gradient(net, inputs[p.first], inputs[p.second], p.same, grad);
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += grad[i];
  }
  const double scale = learning_rate / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < total.size(); ++i) net.params[i] -= scale * total[i];
  return loss / static_cast<double>(batch.size());
}

/// Balanced pair stream: even draws are same-class pairs, odd draws
/// different-class pairs, anchors uniform over the training set.
inline std::vector<training_pair> sample_pairs(const std::vector<std::string>& labels, std::size_t count,
                                               rng_engine& rng) {
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::vector<std::string> classes;
  for (const auto& [c, _] : by_class) classes.push_back(c);
  std::uniform_int_distribution<std::size_t> any(0, labels.size() - 1);
  std::vector<training_pair> out;
  out.reserve(count);
  for (std::size_t p = 0; p < count; ++p) {
    const std::size_t a = any(rng);
    const auto& own = by_class[labels[a]];
    if (p % 2 == 0) {
      std::uniform_int_distribution<std::size_t> pick(0, own.size() - 1);
      std::size_t b = own[pick(rng)];
      if (own.size() > 1)
        while (b == a) b = own[pick(rng)];
      out.push_back({a, b, true});
    } else {
      std::uniform_int_distribution<std::size_t> pick_class(0, classes.size() - 2);
      std::size_t ci = pick_class(rng);
      const auto own_pos = static_cast<std::size_t>(
          std::lower_bound(classes.begin(), classes.end(), labels[a]) - classes.begin());
      if (ci >= own_pos) ++ci;
      const auto& other = by_class[classes[ci]];
      std::uniform_int_distribution<std::size_t> pick(0, other.size() - 1);
      out.push_back({a, other[pick(rng)], false});
    }
  }
  return out;
}

/// Trains on balanced pairs by minibatch gradient descent. Aborts with a
/// divergence error when an epoch's mean loss exceeds ten times the first
/// epoch's, or a parameter stops being finite.
inline network train_siamese(const std::vector<series>& inputs, const std::vector<std::string>& labels,
                             const network_config& cfg) {
  cfg.validate();
  if (inputs.size() != labels.size()) fail(errc::dimension, "siamese: inputs and labels differ in count");
  if (std::set<std::string>(labels.begin(), labels.end()).size() < 2)
    fail(errc::data, "siamese training needs at least two classes");
  network net = init_network(cfg, cfg.seed);
  if (cfg.epochs == 0) return net;

  // Each input is centred on its own mean and scaled by the pooled
  // within-input standard deviation of the training set.
  double sq = 0.0, count = 0.0;
  for (const auto& x : inputs) {
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    for (double v : x) sq += (v - mean) * (v - mean);
    count += static_cast<double>(x.size());
  }
  net.center_inputs = true;
  net.input_shift = 0.0;
  net.input_scale = sq / count > 1e-24 ? std::sqrt(sq / count) : 1.0;

  auto rng = make_rng(cfg.seed, 0x7a1aULL);
  double initial = 0.0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto pairs = sample_pairs(labels, cfg.pairs_per_epoch, rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < pairs.size(); b += cfg.batch_size) {
      const std::size_t end = std::min(pairs.size(), b + cfg.batch_size);
      epoch_loss += descend(net, inputs, std::span<const training_pair>(pairs).subspan(b, end - b),
                            cfg.learning_rate);
      ++batches;
    }
    epoch_loss /= static_cast<double>(std::max<std::size_t>(1, batches));
    net.loss_history.push_back(epoch_loss);
    if (epoch == 0) initial = epoch_loss;
    const bool finite = std::all_of(net.params.begin(), net.params.end(), [](double v) { return std::isfinite(v); });
    if (!finite || !std::isfinite(epoch_loss) || (initial > 0.0 && epoch_loss > 10.0 * initial))
      fail(errc::divergence, "siamese training diverged at epoch " + std::to_string(epoch) + ": loss " +
                                 std::to_string(epoch_loss) + " vs initial " + std::to_string(initial));
  }
  return net;
}

/// Support set embedded once for repeated nearest-neighbour queries.
struct embedding_index {
  labeled_set support;
  std::size_t k = 5;
};

inline embedding_index build_embedding_index(const network& net, const std::vector<series>& support,
                                             const std::vector<std::string>& labels, std::size_t k) {
  if (support.empty()) fail(errc::data, "embedding classification needs a non-empty support set");
  embedding_index idx;
  idx.k = std::min(k, support.size());
  for (std::size_t d = 0; d < net.dense_out; ++d) idx.support.schema.push_back("emb." + std::to_string(d));
  for (const auto& s : support) idx.support.rows.push_back(forward(net, s));
  idx.support.labels = labels;
  return idx;
}

inline prediction embed_classify(const network& net, const embedding_index& index, std::span<const double> query) {
  return knn_classify(index.support, std::span<const double>(forward(net, query)), index.k);
}

inline prediction embed_classify(const network& net, const std::vector<series>& support,
                                 const std::vector<std::string>& labels, std::span<const double> query,
                                 std::size_t k) {
  return embed_classify(net, build_embedding_index(net, support, labels, k), query);
}

}  // namespace magloc
