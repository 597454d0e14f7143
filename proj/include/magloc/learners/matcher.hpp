#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "magloc/core.hpp"
#include "magloc/distances.hpp"
#include "magloc/error.hpp"

namespace magloc {

struct match_result {
  std::string label;
  double distance = 0.0;
  std::size_t index = 0;
};

/// 1-NN over whole series. Ties go to the earlier training series. For kinds
/// other than DTW, series of unequal length are compared on their common prefix.
inline match_result full_signal_classify(const std::vector<series>& train, const std::vector<std::string>& labels,
                                         std::span<const double> query, const distance_kind& kind) {
  if (train.empty()) fail(errc::data, "full-signal matching needs at least one training series");
  if (train.size() != labels.size()) fail(errc::dimension, "training series and labels differ in count");
  match_result best;
  best.distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < train.size(); ++i) {
    std::span<const double> a = train[i];
    std::span<const double> q = query;
    if (kind.tag != distance_tag::dtw && a.size() != q.size()) {
      const std::size_t common = std::min(a.size(), q.size());
      a = a.first(common);
      q = q.first(common);
    }
    const double d = distance(kind, q, a);
    if (d < best.distance) {
      best = {labels[i], d, i};
    }
  }
  if (!std::isfinite(best.distance)) fail(errc::degenerate_input, "full-signal matching found no finite distance");
  return best;
}

}  // namespace magloc
