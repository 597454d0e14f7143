#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "magloc/rng.hpp"

namespace magloc {

struct tree_node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  std::vector<double> value;  // class distribution, or {mean} for regression
  double impurity = 0.0;
  double weight = 0.0;  // training rows reaching the node (with multiplicity)
  int depth = 0;
};

struct decision_tree {
  std::vector<tree_node> nodes;

  const tree_node& leaf_for(std::span<const double> x) const {
    std::size_t i = 0;
    while (nodes[i].feature >= 0) {
      const auto& n = nodes[i];
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[i];
  }

  int depth() const {
    int d = 0;
    for (const auto& n : nodes) d = std::max(d, n.depth);
    return d;
  }
};

inline double gini_impurity(std::span<const double> counts) {
  double total = 0.0;
  for (double c : counts) total += c;
  if (total <= 0.0) return 0.0;
  double s = 0.0;
  for (double c : counts) s += (c / total) * (c / total);
  return 1.0 - s;
}

struct cart_params {
  std::size_t max_depth = 8;
  std::size_t min_leaf = 2;
  std::size_t features_per_split = 0;  // 0 = all features
};

namespace detail {

class classification_builder {
public:
  classification_builder(const std::vector<std::vector<double>>& rows, const std::vector<std::size_t>& y,
                         std::size_t classes, const cart_params& params, rng_engine& rng)
      : rows_(rows), y_(y), classes_(classes), params_(params), rng_(rng) {}

  decision_tree build(std::vector<std::size_t> sample) {
    decision_tree tree;
    grow(tree, std::move(sample), 0);
    return tree;
  }

private:
  std::vector<double> counts_of(const std::vector<std::size_t>& sample) const {
    std::vector<double> c(classes_, 0.0);
    for (auto i : sample) c[y_[i]] += 1.0;
    return c;
  }

  int grow(decision_tree& tree, std::vector<std::size_t> sample, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const auto counts = counts_of(sample);
    const double n = static_cast<double>(sample.size());
    {
      auto& node = tree.nodes.back();
      node.impurity = gini_impurity(counts);
      node.weight = n;
      node.depth = depth;
      node.value = counts;
      for (auto& v : node.value) v /= n;
    }
    if (static_cast<std::size_t>(depth) >= params_.max_depth || tree.nodes[id].impurity <= 0.0 ||
        sample.size() < 2 * params_.min_leaf)
      return id;

    const std::size_t d = rows_.front().size();
    std::vector<std::size_t> features(d);
    std::iota(features.begin(), features.end(), 0);
    std::size_t m = params_.features_per_split == 0 ? d : std::min(d, params_.features_per_split);
    for (std::size_t i = 0; i < m; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, d - 1);
      std::swap(features[i], features[pick(rng_)]);
    }

    const double parent = tree.nodes[id].impurity;
    double best_gain = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::size_t> order = sample;
    std::vector<double> left(classes_), right(classes_);
    for (std::size_t fi = 0; fi < m; ++fi) {
      const std::size_t f = features[fi];
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return rows_[a][f] < rows_[b][f]; });
      std::fill(left.begin(), left.end(), 0.0);
      right = counts;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        left[y_[order[i]]] += 1.0;
        right[y_[order[i]]] -= 1.0;
        const double xv = rows_[order[i]][f], xn = rows_[order[i + 1]][f];
        if (!(xv < xn)) continue;
        const std::size_t nl = i + 1, nr = order.size() - nl;
        if (nl < params_.min_leaf || nr < params_.min_leaf) continue;
        const double gain = parent - (static_cast<double>(nl) * gini_impurity(left) +
                                      static_cast<double>(nr) * gini_impurity(right)) / n;
        if (gain > best_gain + 1e-15) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_threshold = xv;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> ls, rs;
    for (auto i : sample) (rows_[i][static_cast<std::size_t>(best_feature)] <= best_threshold ? ls : rs).push_back(i);
    sample.clear();
    sample.shrink_to_fit();
    const int l = grow(tree, std::move(ls), depth + 1);
    const int r = grow(tree, std::move(rs), depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  const std::vector<std::vector<double>>& rows_;
  const std::vector<std::size_t>& y_;
  std::size_t classes_;
  cart_params params_;
  rng_engine& rng_;
};

// Least-squares regression tree over a fixed row set with every feature
// presorted once; grown level by level.
class regression_builder {
public:
  regression_builder(const std::vector<std::vector<double>>& rows, std::size_t max_depth, std::size_t min_leaf)
      : rows_(rows), max_depth_(max_depth), min_leaf_(min_leaf) {
    const std::size_t n = rows.size();
    const std::size_t d = n ? rows.front().size() : 0;
    order_.resize(d);
    for (std::size_t f = 0; f < d; ++f) {
      order_[f].resize(n);
      std::iota(order_[f].begin(), order_[f].end(), 0);
      std::stable_sort(order_[f].begin(), order_[f].end(),
                       [&](std::size_t a, std::size_t b) { return rows[a][f] < rows[b][f]; });
    }
  }

  decision_tree fit(const std::vector<double>& target) const {
    const std::size_t n = rows_.size();
    const std::size_t d = order_.size();
    decision_tree tree;
    std::vector<int> node_of(n, 0);
    tree.nodes.emplace_back();
    set_leaf(tree.nodes[0], target, node_of, 0, 0);

    std::vector<int> frontier = {0};
    for (std::size_t depth = 0; depth < max_depth_ && !frontier.empty(); ++depth) {
      struct best_split {
        double gain = 0.0;
        int feature = -1;
        double threshold = 0.0;
      };
      const std::size_t width = frontier.size();
      std::vector<int> slot(tree.nodes.size(), -1);
      for (std::size_t s = 0; s < width; ++s) slot[static_cast<std::size_t>(frontier[s])] = static_cast<int>(s);
      std::vector<double> total_sum(width, 0.0), total_n(width, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const int s = slot[static_cast<std::size_t>(node_of[i])];
        if (s < 0) continue;
        total_sum[static_cast<std::size_t>(s)] += target[i];
        total_n[static_cast<std::size_t>(s)] += 1.0;
      }
      std::vector<best_split> best(width);
      std::vector<double> left_sum(width), left_n(width), last_x(width);
      std::vector<char> seen(width);
      for (std::size_t f = 0; f < d; ++f) {
        std::fill(left_sum.begin(), left_sum.end(), 0.0);
        std::fill(left_n.begin(), left_n.end(), 0.0);
        std::fill(seen.begin(), seen.end(), 0);
        for (std::size_t r : order_[f]) {
          const int si = slot[static_cast<std::size_t>(node_of[r])];
          if (si < 0) continue;
          const auto s = static_cast<std::size_t>(si);
          const double x = rows_[r][f];
          // Evaluate the boundary between the previous row of this node and r.
          if (seen[s] && last_x[s] < x) consider(best[s], f, last_x[s], left_sum[s], left_n[s], total_sum[s], total_n[s]);
          left_sum[s] += target[r];
          left_n[s] += 1.0;
          last_x[s] = x;
          seen[s] = 1;
        }
      }
      std::vector<int> next;
      for (std::size_t s = 0; s < width; ++s) {
        if (best[s].feature < 0) continue;
        const int id = frontier[s];
        const int l = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        auto& node = tree.nodes[static_cast<std::size_t>(id)];
        node.feature = best[s].feature;
        node.threshold = best[s].threshold;
        node.left = l;
        node.right = l + 1;
        for (std::size_t i = 0; i < n; ++i) {
          if (node_of[i] != id) continue;
          node_of[i] = rows_[i][static_cast<std::size_t>(node.feature)] <= node.threshold ? l : l + 1;
        }
        const int child_depth = node.depth + 1;
        set_leaf(tree.nodes[static_cast<std::size_t>(l)], target, node_of, l, child_depth);
        set_leaf(tree.nodes[static_cast<std::size_t>(l) + 1], target, node_of, l + 1, child_depth);
        next.push_back(l);
        next.push_back(l + 1);
      }
      frontier = std::move(next);
    }
    return tree;
  }

private:
  void consider(auto& best, std::size_t f, double x, double ls, double ln, double ts, double tn) const {
    const double rn = tn - ln;
    if (ln < static_cast<double>(min_leaf_) || rn < static_cast<double>(min_leaf_)) return;
    const double rs = ts - ls;
    const double gain = ls * ls / ln + rs * rs / rn - ts * ts / tn;
    if (gain > best.gain + 1e-12 * std::max(1.0, ts * ts / tn)) {
      best.gain = gain;
      best.feature = static_cast<int>(f);
      best.threshold = x;
    }
  }

  void set_leaf(tree_node& node, const std::vector<double>& target, const std::vector<int>& node_of, int id,
                int depth) const {
    double s = 0.0, c = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i)
      if (node_of[i] == id) {
        s += target[i];
        c += 1.0;
      }
    node.value = {c > 0.0 ? s / c : 0.0};
    node.weight = c;
    node.depth = depth;
  }

  const std::vector<std::vector<double>>& rows_;
  std::size_t max_depth_;
  std::size_t min_leaf_;
  std::vector<std::vector<std::size_t>> order_;
};

}  // namespace detail

}  // namespace magloc
