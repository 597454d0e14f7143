#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "magloc/error.hpp"
#include "magloc/features.hpp"

namespace magloc {

/// Feature rows with labels and a shared schema.
struct labeled_set {
  std::vector<std::string> schema;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;

  std::size_t size() const noexcept { return rows.size(); }
  std::size_t dims() const noexcept { return schema.size(); }

  std::vector<std::string> class_set() const {
    std::set<std::string> s(labels.begin(), labels.end());
    return {s.begin(), s.end()};
  }
};

inline labeled_set make_labeled_set(const std::vector<feature_vector>& x, const std::vector<std::string>& labels) {
  if (x.size() != labels.size()) fail(errc::dimension, "feature rows and labels differ in count");
  labeled_set out;
  if (!x.empty()) out.schema = x.front().schema;
  for (const auto& fv : x) {
    if (fv.schema != out.schema) fail(errc::schema_mismatch, "inconsistent schemas in training set");
    out.rows.push_back(fv.values);
  }
  out.labels = labels;
  return out;
}

/// Label plus a probability (or score) for every class of the model.
struct prediction {
  std::string label;
  std::map<std::string, double> probabilities;
  std::optional<double> distance;
};

namespace detail {

inline std::size_t index_of(const std::vector<std::string>& classes, const std::string& label) {
  auto it = std::lower_bound(classes.begin(), classes.end(), label);
  if (it == classes.end() || *it != label) fail(errc::unknown_label, "label '" + label + "' not in class set");
  return static_cast<std::size_t>(it - classes.begin());
}

// argmax with ties resolved to the lexicographically smallest label
// (class sets are kept sorted, so this is the lowest index).
inline prediction from_probabilities(const std::vector<std::string>& classes, const std::vector<double>& p) {
  prediction out;
  std::size_t best = 0;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    out.probabilities[classes[k]] = p[k];
    if (p[k] > p[best]) best = k;
  }
  out.label = classes.empty() ? std::string() : classes[best];
  return out;
}

}  // namespace detail

}  // namespace magloc
