#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "magloc/error.hpp"
#include "magloc/features.hpp"
#include "magloc/learners/dataset.hpp"
#include "magloc/learners/forest.hpp"
#include "magloc/learners/gbt.hpp"
#include "magloc/learners/knn.hpp"
#include "magloc/learners/matcher.hpp"

namespace magloc {

enum class model_kind { knn, random_forest, gbt, full_signal };

inline const char* to_string(model_kind k) {
  switch (k) {
    case model_kind::knn: return "knn";
    case model_kind::random_forest: return "random_forest";
    case model_kind::gbt: return "gbt";
    case model_kind::full_signal: return "full_signal";
  }
  return "unknown";
}

struct knn_state {
  std::size_t k = 5;
  labeled_set train;
};

struct matcher_state {
  distance_kind kind;
  std::vector<series> train;
  std::vector<std::string> labels;
};

/// A fitted classifier together with the class set and feature schema it was trained on.
struct trained_model {
  model_kind kind = model_kind::knn;
  std::vector<std::string> class_set;
  std::vector<std::string> schema;
  std::uint64_t seed = 0;
  forest_config forest;  // configuration snapshots; only the one matching `kind` is meaningful
  gbt_config boosting;
  std::variant<knn_state, forest_state, gbt_state, matcher_state> state;
};

inline trained_model train_knn(const labeled_set& train, std::size_t k) {
  if (k < 1 || k > train.size()) fail(errc::configuration, "knn: k outside [1, training size]");
  trained_model m;
  m.kind = model_kind::knn;
  m.class_set = train.class_set();
  m.schema = train.schema;
  m.state = knn_state{k, train};
  return m;
}

inline trained_model train_random_forest(const labeled_set& train, const forest_config& cfg) {
  trained_model m;
  m.kind = model_kind::random_forest;
  m.class_set = train.class_set();
  m.schema = train.schema;
  m.seed = cfg.seed;
  m.forest = cfg;
  m.state = fit_forest(train, cfg);
  return m;
}

inline trained_model train_gbt(const labeled_set& train, const gbt_config& cfg) {
  trained_model m;
  m.kind = model_kind::gbt;
  m.class_set = train.class_set();
  m.schema = train.schema;
  m.seed = cfg.seed;
  m.boosting = cfg;
  m.state = fit_gbt(train, cfg);
  return m;
}

inline trained_model train_matcher(std::vector<series> train, std::vector<std::string> labels,
                                   const distance_kind& kind) {
  if (train.empty() || train.size() != labels.size()) fail(errc::data, "matcher needs labelled training series");
  kind.validate();
  trained_model m;
  m.kind = model_kind::full_signal;
  std::set<std::string> s(labels.begin(), labels.end());
  m.class_set.assign(s.begin(), s.end());
  m.state = matcher_state{kind, std::move(train), std::move(labels)};
  return m;
}

/// Label and class probabilities for one input. The full-signal model reads
/// the vector values as the raw series and ignores the schema.
inline prediction predict(const trained_model& model, const feature_vector& x) {
  if (model.kind != model_kind::full_signal && x.schema != model.schema)
    fail(errc::schema_mismatch, "input schema does not match the model schema");
  switch (model.kind) {
    case model_kind::knn: {
      const auto& st = std::get<knn_state>(model.state);
      return knn_classify(st.train, std::span<const double>(x.values), st.k);
    }
    case model_kind::random_forest:
      return detail::from_probabilities(
          model.class_set, detail::forest_proba(std::get<forest_state>(model.state), x.values, model.class_set.size()));
    case model_kind::gbt:
      return detail::from_probabilities(model.class_set, detail::gbt_proba(std::get<gbt_state>(model.state), x.values));
    case model_kind::full_signal: {
      const auto& st = std::get<matcher_state>(model.state);
      const auto r = full_signal_classify(st.train, st.labels, x.values, st.kind);
      prediction p;
      p.label = r.label;
      for (const auto& c : model.class_set) p.probabilities[c] = c == r.label ? 1.0 : 0.0;
      p.distance = r.distance;
      return p;
    }
  }
  fail(errc::configuration, "unknown model kind");
}

}  // namespace magloc
