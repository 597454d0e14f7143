#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "magloc/core.hpp"
#include "magloc/distances.hpp"
#include "magloc/error.hpp"
#include "magloc/features.hpp"
#include "magloc/learners/model.hpp"
#include "magloc/rng.hpp"
#include "magloc/shapelets.hpp"
#include "magloc/siamese.hpp"
#include "magloc/spectral.hpp"

namespace magloc {

enum class signal_domain { time, frequency };

inline const char* to_string(signal_domain d) { return d == signal_domain::time ? "time" : "frequency"; }

inline signal_domain parse_signal_domain(const std::string& s) {
  if (s == "time") return signal_domain::time;
  if (s == "frequency") return signal_domain::frequency;
  fail(errc::configuration, "unknown domain '" + s + "' (expected time or frequency)");
}

enum class feature_family { match, stats, shapelet, combined, siamese };
enum class classifier_kind { none, knn, rf, gbt };

inline const char* to_string(classifier_kind c) {
  switch (c) {
    case classifier_kind::none: return "none";
    case classifier_kind::knn: return "knn";
    case classifier_kind::rf: return "rf";
    case classifier_kind::gbt: return "gbt";
  }
  return "unknown";
}

/// Parsed `<features>[:<classifier>]` method string.
struct method_spec {
  feature_family features = feature_family::stats;
  classifier_kind classifier = classifier_kind::none;
  distance_tag match_distance = distance_tag::dtw;  // match only
  std::size_t siamese_layers = 0;                  // siamese only
  std::string text;
};

inline method_spec parse_method(const std::string& text) {
  method_spec m;
  m.text = text;
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string tail = colon == std::string::npos ? "" : text.substr(colon + 1);

  if (head.rfind("match-", 0) == 0) {
    m.features = feature_family::match;
    const std::string d = head.substr(6);
    if (d != "dtw" && d != "euclid" && d != "cosine" && d != "bhatt")
      fail(errc::configuration, "unknown matching distance '" + d + "'");
    m.match_distance = parse_distance_tag(d);
  } else if (head == "stats") {
    m.features = feature_family::stats;
  } else if (head == "shapelet") {
    m.features = feature_family::shapelet;
  } else if (head == "combined") {
    m.features = feature_family::combined;
  } else if (head == "siamese-c2" || head == "siamese-c3" || head == "siamese-c4") {
    m.features = feature_family::siamese;
    m.siamese_layers = static_cast<std::size_t>(head.back() - '0');
  } else {
    fail(errc::configuration, "unknown feature set '" + head + "' in method '" + text + "'");
  }

  if (tail.empty()) m.classifier = classifier_kind::none;
  else if (tail == "knn") m.classifier = classifier_kind::knn;
  else if (tail == "rf") m.classifier = classifier_kind::rf;
  else if (tail == "gbt") m.classifier = classifier_kind::gbt;
  else fail(errc::configuration, "unknown classifier '" + tail + "' in method '" + text + "'");

  const bool tabular = m.features == feature_family::stats || m.features == feature_family::shapelet ||
                       m.features == feature_family::combined;
  if (tabular && m.classifier == classifier_kind::none)
    fail(errc::configuration, "method '" + text + "' needs a classifier (knn, rf or gbt)");
  if (!tabular && m.classifier != classifier_kind::none && m.classifier != classifier_kind::knn)
    fail(errc::configuration, "method '" + text + "' classifies by nearest neighbours; only ':knn' may follow it");
  return m;
}

inline void check_supported(const method_spec& m, signal_domain domain) {
  if (m.features == feature_family::siamese && domain == signal_domain::frequency)
    fail(errc::configuration, "method '" + m.text + "' is not available in the frequency domain");
}

struct pipeline_config {
  std::size_t window = default_window;
  descriptor_config descriptors;
  shapelet_config shapelets;
  std::size_t knn_k = 5;
  forest_config forest;
  gbt_config boosting;
  network_config network;
  std::optional<std::size_t> dtw_radius;
  std::size_t histogram_bins = default_histogram_bins;
  // Downsample training segments to the smallest class before fitting the
  // classifier, so that held-out groups do not skew the class prior.
  bool balance_classes = true;
};

/// Everything learned from one training set, enough to label new segments.
struct pipeline {
  method_spec method;
  signal_domain domain = signal_domain::time;
  pipeline_config config;
  std::uint64_t seed = 0;
  std::vector<std::string> class_set;
  std::optional<shapelet_dictionary> dictionary;
  std::optional<standardizer> scaler;
  std::optional<network> net;
  trained_model model;  // for siamese: knn over support embeddings
};

/// Training segments of one observation, grouped for dictionary extraction.
struct training_piece_source {
  std::string label;
  std::string location_id;
  std::string device_id;
  series values;                       // the full magnitude series
  std::vector<std::size_t> segments;   // training segment indices, ascending
};

namespace detail {

inline series power_values(std::span<const double> x) {
  const auto ps = power_spectrum(x);
  series out;
  out.reserve(ps.size());
  for (const auto& b : ps) out.push_back(b.power);
  return out;
}

inline descriptor_config descriptors_for(const pipeline_config& cfg, signal_domain domain) {
  descriptor_config d = cfg.descriptors;
  if (domain == signal_domain::frequency) d.domain = descriptor_domain::frequency;
  return d;
}

inline shapelet_config shapelets_for(const pipeline_config& cfg, signal_domain domain) {
  shapelet_config s = cfg.shapelets;
  s.domain = domain == signal_domain::time ? shapelet_domain::time : shapelet_domain::gcc;
  return s;
}

// Maximal runs of consecutive training segments become contiguous pieces.
inline std::vector<training_unit> to_units(const std::vector<training_piece_source>& sources, std::size_t window) {
  std::vector<training_unit> units;
  for (const auto& src : sources) {
    training_unit u{src.label, src.location_id, src.device_id, {}};
    std::size_t i = 0;
    while (i < src.segments.size()) {
      std::size_t j = i;
      while (j + 1 < src.segments.size() && src.segments[j + 1] == src.segments[j] + 1) ++j;
      const auto begin = src.values.begin() + static_cast<std::ptrdiff_t>(src.segments[i] * window);
      const auto end = src.values.begin() + static_cast<std::ptrdiff_t>((src.segments[j] + 1) * window);
      u.pieces.emplace_back(begin, end);
      i = j + 1;
    }
    if (!u.pieces.empty()) units.push_back(std::move(u));
  }
  return units;
}

inline feature_vector raw_features(const pipeline& p, std::span<const double> x) {
  switch (p.method.features) {
    case feature_family::stats: return extract_descriptors(x, descriptors_for(p.config, p.domain));
    case feature_family::shapelet: return shapelet_transform(x, *p.dictionary);
    case feature_family::combined:
      return combine(extract_descriptors(x, descriptors_for(p.config, p.domain)), shapelet_transform(x, *p.dictionary));
    default: fail(errc::configuration, "raw_features: method has no tabular features");
  }
}

inline trained_model fit_classifier(classifier_kind c, const labeled_set& train, const pipeline_config& cfg,
                                    std::uint64_t seed) {
  switch (c) {
    case classifier_kind::knn: return train_knn(train, std::min(cfg.knn_k, train.size()));
    case classifier_kind::rf: {
      auto f = cfg.forest;
      f.seed = seed;
      return train_random_forest(train, f);
    }
    case classifier_kind::gbt: {
      auto g = cfg.boosting;
      g.seed = seed;
      return train_gbt(train, g);
    }
    case classifier_kind::none: break;
  }
  fail(errc::configuration, "no classifier selected");
}

// Seeded per-class subsample down to the smallest class size; order preserved.
inline std::vector<std::size_t> balanced_subset(const std::vector<std::string>& labels, std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::size_t smallest = labels.size();
  for (const auto& [_, idx] : by_class) smallest = std::min(smallest, idx.size());
  auto rng = make_rng(seed, 0xba1aULL);
  std::vector<std::size_t> keep;
  for (auto& [_, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(smallest));
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

}  // namespace detail

/// Fits a pipeline on the training material only: the segments (with labels)
/// and, for shapelet features, the per-observation training pieces.
inline pipeline fit_pipeline(const method_spec& method, signal_domain domain, const pipeline_config& cfg,
                             std::uint64_t seed, const std::vector<series>& all_segments,
                             const std::vector<std::string>& all_labels,
                             const std::vector<training_piece_source>& sources) {
  check_supported(method, domain);
  if (all_segments.empty() || all_segments.size() != all_labels.size())
    fail(errc::data, "pipeline needs labelled training segments");
  std::vector<series> segments;
  std::vector<std::string> labels;
  if (cfg.balance_classes) {
    for (auto i : detail::balanced_subset(all_labels, seed)) {
      segments.push_back(all_segments[i]);
      labels.push_back(all_labels[i]);
    }
  } else {
    segments = all_segments;
    labels = all_labels;
  }
  pipeline p;
  p.method = method;
  p.domain = domain;
  p.config = cfg;
  p.seed = seed;
  {
    std::set<std::string> s(labels.begin(), labels.end());
    p.class_set.assign(s.begin(), s.end());
  }

  switch (method.features) {
    case feature_family::match: {
      distance_kind kind{method.match_distance, cfg.dtw_radius, cfg.histogram_bins};
      std::vector<series> stored;
      stored.reserve(segments.size());
      for (const auto& s : segments) stored.push_back(domain == signal_domain::time ? s : detail::power_values(s));
      p.model = train_matcher(std::move(stored), labels, kind);
      return p;
    }
    case feature_family::siamese: {
      auto ncfg = cfg.network;
      ncfg.conv_layers = method.siamese_layers;
      ncfg.seed = seed;
      if (p.class_set.size() < 2) {
        // One class: nothing to contrast; an untrained network labels everything alike.
        p.net = init_network(ncfg, seed);
      } else {
        p.net = train_siamese(segments, labels, ncfg);
      }
      const auto index = build_embedding_index(*p.net, segments, labels, cfg.knn_k);
      p.model = train_knn(index.support, index.k);
      return p;
    }
    default: break;
  }

  if (method.features != feature_family::stats) {
    p.dictionary = extract_dictionary(detail::to_units(sources, cfg.window), detail::shapelets_for(cfg, domain));
    if (p.dictionary->max_length() > cfg.window)
      fail(errc::configuration, "shapelet longer than the segment window");
  }
  std::vector<feature_vector> rows;
  rows.reserve(segments.size());
  for (const auto& s : segments) rows.push_back(detail::raw_features(p, s));
  p.scaler = fit_standardizer(rows);
  for (auto& r : rows) r = p.scaler->apply(r);
  p.model = detail::fit_classifier(method.classifier, make_labeled_set(rows, labels), cfg, seed);
  return p;
}

/// Labels one segment.
inline prediction predict_segment(const pipeline& p, std::span<const double> x) {
  switch (p.method.features) {
    case feature_family::match: {
      feature_vector raw;  // the matcher reads raw values and ignores the schema
      raw.values = p.domain == signal_domain::time ? series(x.begin(), x.end()) : detail::power_values(x);
      return predict(p.model, raw);
    }
    case feature_family::siamese: {
      auto e = forward(*p.net, x);
      return predict(p.model, make_feature_vector(std::move(e), p.model.schema, feature_source::embedding));
    }
    default: return predict(p.model, p.scaler->apply(detail::raw_features(p, x)));
  }
}

}  // namespace magloc
