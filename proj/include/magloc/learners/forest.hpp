#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "magloc/error.hpp"
#include "magloc/learners/dataset.hpp"
#include "magloc/learners/tree.hpp"
#include "magloc/rng.hpp"

namespace magloc {

struct forest_config {
  std::size_t trees = 100;
  std::size_t max_depth = 8;
  std::size_t min_leaf = 2;
  std::optional<std::size_t> features_per_split;  // unset = floor(sqrt(d))
  std::uint64_t seed = 0;
};

struct forest_state {
  std::vector<decision_tree> trees;
  double oob_accuracy = 0.0;  // NaN when no row was ever out of bag
};

namespace detail {

inline std::vector<std::size_t> encode_labels(const labeled_set& train, const std::vector<std::string>& classes) {
  std::vector<std::size_t> y(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) y[i] = index_of(classes, train.labels[i]);
  return y;
}

inline std::vector<double> forest_proba(const forest_state& f, std::span<const double> x, std::size_t classes) {
  std::vector<double> p(classes, 0.0);
  for (const auto& t : f.trees) {
    const auto& leaf = t.leaf_for(x);
    for (std::size_t k = 0; k < classes; ++k) p[k] += leaf.value[k];
  }
  for (auto& v : p) v /= static_cast<double>(f.trees.size());
  return p;
}

}  // namespace detail

/// Bootstrap-aggregated CART classifiers on Gini impurity. Tree t draws its
/// bootstrap and feature subsets from a stream derived from (seed, t).
inline forest_state fit_forest(const labeled_set& train, const forest_config& cfg) {
  if (train.size() < 2) fail(errc::data, "random forest needs at least 2 training rows");
  if (cfg.trees < 1) fail(errc::configuration, "random forest needs at least one tree");
  const auto classes = train.class_set();
  const auto y = detail::encode_labels(train, classes);
  const std::size_t n = train.size(), d = train.dims();
  cart_params params;
  params.max_depth = cfg.max_depth;
  params.min_leaf = std::max<std::size_t>(1, cfg.min_leaf);
  params.features_per_split =
      cfg.features_per_split.value_or(std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d)))));

  forest_state out;
  std::vector<std::vector<double>> oob_votes(n, std::vector<double>(classes.size(), 0.0));
  std::vector<std::size_t> oob_trees(n, 0);
  for (std::size_t t = 0; t < cfg.trees; ++t) {
    auto rng = make_rng(cfg.seed, t);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> sample(n);
    std::vector<char> in_bag(n, 0);
    for (auto& s : sample) {
      s = pick(rng);
      in_bag[s] = 1;
    }
    detail::classification_builder builder(train.rows, y, classes.size(), params, rng);
    out.trees.push_back(builder.build(std::move(sample)));
    for (std::size_t i = 0; i < n; ++i) {
      if (in_bag[i]) continue;
      const auto& leaf = out.trees.back().leaf_for(train.rows[i]);
      for (std::size_t k = 0; k < classes.size(); ++k) oob_votes[i][k] += leaf.value[k];
      ++oob_trees[i];
    }
  }
  std::size_t counted = 0, correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (oob_trees[i] == 0) continue;
    ++counted;
    std::size_t best = 0;
    for (std::size_t k = 1; k < classes.size(); ++k)
      if (oob_votes[i][k] > oob_votes[i][best]) best = k;
    if (best == y[i]) ++correct;
  }
  out.oob_accuracy = counted ? static_cast<double>(correct) / static_cast<double>(counted) : std::nan("");
  return out;
}

}  // namespace magloc
