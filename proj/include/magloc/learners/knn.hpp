#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "magloc/error.hpp"
#include "magloc/learners/dataset.hpp"

namespace magloc {

/// Majority vote over the k nearest training rows by euclidean distance.
/// Scores are vote fractions. Equal vote counts go to the class with the
/// smaller summed neighbour distance, then to the smaller label. Equidistant
/// neighbours are ranked by training order.
inline prediction knn_classify(const labeled_set& train, std::span<const double> query, std::size_t k) {
  if (k < 1 || k > train.size())
    fail(errc::configuration, "knn: k=" + std::to_string(k) + " outside [1, " + std::to_string(train.size()) + "]");
  if (query.size() != train.dims()) fail(errc::schema_mismatch, "knn: query dimension differs from training data");

  const std::size_t n = train.size();
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < query.size(); ++j) {
      const double d = train.rows[i][j] - query[j];
      s += d * d;
    }
    dist[i] = std::sqrt(s);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) { return dist[a] != dist[b] ? dist[a] < dist[b] : a < b; });

  const auto classes = train.class_set();
  std::vector<std::size_t> votes(classes.size(), 0);
  std::vector<double> summed(classes.size(), 0.0);
  for (std::size_t r = 0; r < k; ++r) {
    const auto c = detail::index_of(classes, train.labels[order[r]]);
    ++votes[c];
    summed[c] += dist[order[r]];
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < classes.size(); ++c) {
    if (votes[c] > votes[best] || (votes[c] == votes[best] && votes[c] > 0 && summed[c] < summed[best]))
      best = c;
  }
  prediction out;
  out.label = classes[best];
  for (std::size_t c = 0; c < classes.size(); ++c)
    out.probabilities[classes[c]] = static_cast<double>(votes[c]) / static_cast<double>(k);
  out.distance = dist[order[0]];
  return out;
}

inline prediction knn_classify(const labeled_set& train, const feature_vector& query, std::size_t k) {
  if (query.schema != train.schema) fail(errc::schema_mismatch, "knn: query schema differs from training schema");
  return knn_classify(train, std::span<const double>(query.values), k);
}

}  // namespace magloc
