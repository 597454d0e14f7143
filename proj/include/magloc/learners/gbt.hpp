#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "magloc/error.hpp"
#include "magloc/learners/dataset.hpp"
#include "magloc/learners/forest.hpp"
#include "magloc/learners/tree.hpp"

namespace magloc {

struct gbt_config {
  std::size_t rounds = 100;
  std::size_t depth = 3;
  double learning_rate = 0.1;
  std::size_t min_leaf = 1;
  std::uint64_t seed = 0;
};

/// One-vs-rest boosted regression trees on logistic loss.
struct gbt_state {
  std::vector<double> initial;                    // per-class log-odds of the class frequency
  std::vector<std::vector<decision_tree>> trees;  // [round][class]
  double learning_rate = 0.1;
};

namespace detail {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Per-class margins: F_c(x) = initial_c + lr * sum over rounds of tree_c(x).
inline std::vector<double> gbt_margins(const gbt_state& g, std::span<const double> x) {
  std::vector<double> f = g.initial;
  for (const auto& round : g.trees)
    for (std::size_t c = 0; c < round.size(); ++c) f[c] += g.learning_rate * round[c].leaf_for(x).value[0];
  return f;
}

// Normalized one-vs-rest probabilities sigma(F_c) / sum_k sigma(F_k); with no
// rounds this reproduces the class frequencies exactly.
inline std::vector<double> gbt_proba(const gbt_state& g, std::span<const double> x) {
  auto f = gbt_margins(g, x);
  double total = 0.0;
  for (auto& v : f) total += (v = sigmoid(v));
  for (auto& v : f) v /= total;
  return f;
}

}  // namespace detail

inline gbt_state fit_gbt(const labeled_set& train, const gbt_config& cfg) {
  if (train.size() < 2) fail(errc::data, "gradient boosting needs at least 2 training rows");
  const auto classes = train.class_set();
  const auto y = detail::encode_labels(train, classes);
  const std::size_t n = train.size(), k = classes.size();

  gbt_state g;
  g.learning_rate = cfg.learning_rate;
  std::vector<double> freq(k, 0.0);
  for (auto c : y) freq[c] += 1.0;
  for (std::size_t c = 0; c < k; ++c) {
    const double p = freq[c] / static_cast<double>(n);
    // A single-class set has p = 1; clamp so the margin stays finite.
    const double q = std::clamp(p, 1e-12, 1.0 - 1e-12);
    g.initial.push_back(std::log(q / (1.0 - q)));
  }

  std::vector<std::vector<double>> margin(k, std::vector<double>(n));
  for (std::size_t c = 0; c < k; ++c) std::fill(margin[c].begin(), margin[c].end(), g.initial[c]);

  if (cfg.rounds == 0 || k < 2) return g;
  detail::regression_builder builder(train.rows, cfg.depth, std::max<std::size_t>(1, cfg.min_leaf));
  std::vector<double> residual(n);
  for (std::size_t r = 0; r < cfg.rounds; ++r) {
    std::vector<decision_tree> round;
    round.reserve(k);
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t i = 0; i < n; ++i)
        residual[i] = (y[i] == c ? 1.0 : 0.0) - detail::sigmoid(margin[c][i]);
      auto tree = builder.fit(residual);
      for (std::size_t i = 0; i < n; ++i) margin[c][i] += cfg.learning_rate * tree.leaf_for(train.rows[i]).value[0];
      round.push_back(std::move(tree));
    }
    g.trees.push_back(std::move(round));
  }
  return g;
}

}  // namespace magloc
