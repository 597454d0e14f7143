#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "magloc/core.hpp"
#include "magloc/error.hpp"
#include "magloc/pipeline.hpp"
#include "magloc/rng.hpp"

namespace magloc {

enum class protocol { all_places, leave_place_out, leave_device_out };

inline const char* to_string(protocol p) {
  switch (p) {
    case protocol::all_places: return "all";
    case protocol::leave_place_out: return "lpo";
    case protocol::leave_device_out: return "ldo";
  }
  return "unknown";
}

inline protocol parse_protocol(const std::string& s) {
  if (s == "all") return protocol::all_places;
  if (s == "lpo") return protocol::leave_place_out;
  if (s == "ldo") return protocol::leave_device_out;
  fail(errc::configuration, "unknown protocol '" + s + "' (expected all, lpo or ldo)");
}

struct segment_ref {
  std::size_t observation = 0;
  std::size_t segment = 0;

  friend auto operator<=>(const segment_ref&, const segment_ref&) = default;
};

struct fold {
  std::string key;  // place id, device id, or iteration number
  std::vector<segment_ref> train;
  std::vector<segment_ref> test;
};

inline constexpr std::size_t all_places_iterations = 30;
inline constexpr std::size_t all_places_test_segments = 3;
inline constexpr std::size_t all_places_min_segments = 10;

namespace detail {

inline std::vector<segment_ref> all_segments(const dataset& d, const std::vector<std::size_t>& obs, std::size_t window) {
  std::vector<segment_ref> out;
  for (auto i : obs)
    for (std::size_t s = 0; s < d[i].size() / window; ++s) out.push_back({i, s});
  return out;
}

}  // namespace detail

/// Each iteration draws 3 test segments per observation; the rest train.
inline std::vector<fold> folds_all_places(const dataset& d, std::uint64_t seed, std::size_t window = default_window,
                                          std::size_t iterations = all_places_iterations) {
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i].size() / window < all_places_min_segments)
      fail(errc::too_short, "observation " + std::to_string(i) + " yields " + std::to_string(d[i].size() / window) +
                                " segments; the all-places protocol needs " + std::to_string(all_places_min_segments));
  std::vector<fold> out;
  const auto base = derive_seed(seed, "all-places");
  for (std::size_t it = 0; it < iterations; ++it) {
    auto rng = make_rng(base, it);
    fold f;
    f.key = std::to_string(it);
    for (std::size_t i = 0; i < d.size(); ++i) {
      std::vector<std::size_t> idx(d[i].size() / window);
      std::iota(idx.begin(), idx.end(), 0);
      std::shuffle(idx.begin(), idx.end(), rng);
      std::vector<std::size_t> test(idx.begin(), idx.begin() + all_places_test_segments);
      std::sort(test.begin(), test.end());
      std::vector<std::size_t> train(idx.begin() + all_places_test_segments, idx.end());
      std::sort(train.begin(), train.end());
      for (auto s : train) f.train.push_back({i, s});
      for (auto s : test) f.test.push_back({i, s});
    }
    out.push_back(std::move(f));
  }
  return out;
}

/// One fold per location: all of its observations, across devices, are held out.
inline std::vector<fold> folds_leave_place_out(const dataset& d, std::size_t window = default_window) {
  std::map<std::string, std::set<std::string>> places_of;
  for (const auto& o : d.observations()) places_of[o.location_type()].insert(o.location_id());
  for (const auto& [label, places] : places_of)
    if (places.size() < 2)
      fail(errc::configuration, "class '" + label + "' has a single location; leave-a-place-out needs two or more");
  std::set<std::string> places;
  for (const auto& o : d.observations()) places.insert(o.location_id());
  std::vector<fold> out;
  for (const auto& place : places) {
    std::vector<std::size_t> tr, te;
    for (std::size_t i = 0; i < d.size(); ++i) (d[i].location_id() == place ? te : tr).push_back(i);
    out.push_back({place, detail::all_segments(d, tr, window), detail::all_segments(d, te, window)});
  }
  return out;
}

/// One fold per device.
inline std::vector<fold> folds_leave_device_out(const dataset& d, std::size_t window = default_window) {
  std::set<std::string> devices;
  for (const auto& o : d.observations()) devices.insert(o.device_id());
  if (devices.size() < 2) fail(errc::configuration, "leave-a-device-out needs at least two devices");
  std::vector<fold> out;
  for (const auto& dev : devices) {
    std::vector<std::size_t> tr, te;
    for (std::size_t i = 0; i < d.size(); ++i) (d[i].device_id() == dev ? te : tr).push_back(i);
    out.push_back({dev, detail::all_segments(d, tr, window), detail::all_segments(d, te, window)});
  }
  return out;
}

inline std::vector<fold> make_folds(const dataset& d, protocol p, std::uint64_t seed, std::size_t window) {
  switch (p) {
    case protocol::all_places: return folds_all_places(d, seed, window);
    case protocol::leave_place_out: return folds_leave_place_out(d, window);
    case protocol::leave_device_out: return folds_leave_device_out(d, window);
  }
  fail(errc::configuration, "unknown protocol");
}

/// Throws a leakage error when a fold's test material can reach training:
/// shared segments, or (lpo/ldo) a test place or device present in training.
inline void check_no_leakage(const dataset& d, const fold& f, protocol p) {
  if (f.test.empty()) fail(errc::leakage, "fold " + f.key + " has an empty test set");
  std::set<segment_ref> train(f.train.begin(), f.train.end());
  for (const auto& r : f.test)
    if (train.count(r))
      fail(errc::leakage, "fold " + f.key + ": segment " + std::to_string(r.segment) + " of observation " +
                              std::to_string(r.observation) + " is in both train and test");
  if (p == protocol::all_places) return;
  std::set<std::string> held;
  for (const auto& r : f.test)
    held.insert(p == protocol::leave_place_out ? d[r.observation].location_id() : d[r.observation].device_id());
  for (const auto& r : f.train) {
    const auto& key = p == protocol::leave_place_out ? d[r.observation].location_id() : d[r.observation].device_id();
    if (held.count(key)) fail(errc::leakage, "fold " + f.key + ": held-out '" + key + "' appears in training");
  }
}

struct confusion_matrix {
  std::vector<std::string> class_set;
  std::vector<std::vector<std::size_t>> counts;  // [truth][prediction]

  std::size_t row_total(std::size_t i) const {
    return std::accumulate(counts[i].begin(), counts[i].end(), std::size_t{0});
  }

  std::vector<std::vector<double>> normalized() const {
    std::vector<std::vector<double>> out(counts.size(), std::vector<double>(counts.size(), 0.0));
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const auto t = row_total(i);
      if (t == 0) continue;
      for (std::size_t j = 0; j < counts.size(); ++j)
        out[i][j] = static_cast<double>(counts[i][j]) / static_cast<double>(t);
    }
    return out;
  }

  /// Classes with no true items; left out of the balanced accuracy.
  std::vector<std::string> empty_rows() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < counts.size(); ++i)
      if (row_total(i) == 0) out.push_back(class_set[i]);
    return out;
  }
};

inline confusion_matrix empty_confusion(const std::vector<std::string>& class_set) {
  return {class_set, std::vector<std::vector<std::size_t>>(class_set.size(), std::vector<std::size_t>(class_set.size(), 0))};
}

inline void tally(confusion_matrix& m, const std::string& truth, const std::string& predicted) {
  m.counts[detail::index_of(m.class_set, truth)][detail::index_of(m.class_set, predicted)] += 1;
}

inline confusion_matrix confusion(const std::vector<std::string>& predicted, const std::vector<std::string>& truth,
                                  const std::vector<std::string>& class_set) {
  if (predicted.size() != truth.size()) fail(errc::dimension, "confusion: prediction and truth counts differ");
  auto m = empty_confusion(class_set);
  for (std::size_t i = 0; i < truth.size(); ++i) tally(m, truth[i], predicted[i]);
  return m;
}

/// Mean over non-empty rows of diagonal / row total.
inline double balanced_accuracy(const confusion_matrix& m) {
  double sum = 0.0;
  std::size_t rows = 0;
  for (std::size_t i = 0; i < m.counts.size(); ++i) {
    const auto t = m.row_total(i);
    if (t == 0) continue;
    sum += static_cast<double>(m.counts[i][i]) / static_cast<double>(t);
    ++rows;
  }
  if (rows == 0) fail(errc::data, "balanced accuracy of an empty confusion matrix");
  return sum / static_cast<double>(rows);
}

struct segment_prediction {
  std::size_t observation = 0;
  std::size_t segment = 0;
  std::string truth;
  std::string predicted;
};

struct observation_prediction {
  std::size_t observation = 0;
  std::string truth;
  std::string predicted;
};

struct fold_result {
  std::string key;
  std::uint64_t seed = 0;
  std::size_t train_segments = 0;
  std::size_t dictionary_size = 0;
  std::vector<segment_prediction> segments;
  std::vector<observation_prediction> observations;
};

struct evaluation_report {
  protocol protocol_used = protocol::leave_place_out;
  method_spec method;
  signal_domain domain = signal_domain::time;
  pipeline_config config;
  std::uint64_t seed = 0;
  std::vector<std::string> class_set;
  std::vector<fold_result> folds;
  confusion_matrix segment_confusion;
  confusion_matrix observation_confusion;
  double segment_balanced_accuracy = 0.0;
  double balanced_accuracy = 0.0;  // observation level, the headline
};

/// Majority vote over segment labels; ties go to the lowest class-set index.
inline std::string majority_vote(const std::vector<std::string>& labels, const std::vector<std::string>& class_set) {
  std::vector<std::size_t> votes(class_set.size(), 0);
  for (const auto& l : labels) ++votes[detail::index_of(class_set, l)];
  return class_set[static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin())];
}

/// Recomputes both confusion matrices and accuracies from the stored folds.
inline void aggregate(evaluation_report& r) {
  r.segment_confusion = empty_confusion(r.class_set);
  r.observation_confusion = empty_confusion(r.class_set);
  for (const auto& f : r.folds) {
    for (const auto& s : f.segments) tally(r.segment_confusion, s.truth, s.predicted);
    for (const auto& o : f.observations) tally(r.observation_confusion, o.truth, o.predicted);
  }
  r.segment_balanced_accuracy = balanced_accuracy(r.segment_confusion);
  r.balanced_accuracy = balanced_accuracy(r.observation_confusion);
}

namespace detail {

inline series segment_values(const dataset& d, const segment_ref& r, std::size_t w) {
  const auto& v = d[r.observation].values();
  return series(v.begin() + static_cast<std::ptrdiff_t>(r.segment * w),
                v.begin() + static_cast<std::ptrdiff_t>((r.segment + 1) * w));
}

}  // namespace detail

/// Fits a pipeline on the listed segments of `d`.
inline pipeline fit_on_segments(const dataset& d, const std::vector<segment_ref>& train, const method_spec& method,
                                signal_domain domain, const pipeline_config& cfg, std::uint64_t seed) {
  std::vector<series> train_x;
  std::vector<std::string> train_y;
  std::map<std::size_t, std::vector<std::size_t>> by_obs;
  for (const auto& r : train) {
    train_x.push_back(detail::segment_values(d, r, cfg.window));
    train_y.push_back(d[r.observation].location_type());
    by_obs[r.observation].push_back(r.segment);
  }
  std::vector<training_piece_source> sources;
  for (auto& [i, segs] : by_obs) {
    std::sort(segs.begin(), segs.end());
    sources.push_back({d[i].location_type(), d[i].location_id(), d[i].device_id(), d[i].values(), segs});
  }
  return fit_pipeline(method, domain, cfg, seed, train_x, train_y, sources);
}

/// Fits on every full segment of every observation.
inline pipeline fit_on_dataset(const dataset& d, const method_spec& method, signal_domain domain,
                               const pipeline_config& cfg, std::uint64_t seed) {
  std::vector<segment_ref> all;
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t s = 0; s < d[i].size() / cfg.window; ++s) all.push_back({i, s});
  if (all.empty()) fail(errc::too_short, "no observation holds a full segment");
  return fit_on_segments(d, all, method, domain, cfg, seed);
}

/// Fits and scores one fold using training material only.
inline fold_result run_fold(const dataset& d, const fold& f, protocol p, const method_spec& method,
                            signal_domain domain, const pipeline_config& cfg, std::uint64_t seed) {
  check_no_leakage(d, f, p);
  fold_result out;
  out.key = f.key;
  out.seed = derive_seed(seed, f.key);
  out.train_segments = f.train.size();
  const auto model = fit_on_segments(d, f.train, method, domain, cfg, out.seed);
  out.dictionary_size = model.dictionary ? model.dictionary->entries.size() : 0;

  std::map<std::size_t, std::vector<std::string>> votes;
  for (const auto& r : f.test) {
    const auto pred = predict_segment(model, detail::segment_values(d, r, cfg.window));
    out.segments.push_back({r.observation, r.segment, d[r.observation].location_type(), pred.label});
    votes[r.observation].push_back(pred.label);
  }
  for (const auto& [i, labels] : votes)
    out.observations.push_back({i, d[i].location_type(), majority_vote(labels, d.class_set())});
  return out;
}

inline evaluation_report run_protocol(const dataset& d, protocol p, const method_spec& method, signal_domain domain,
                                      const pipeline_config& cfg, std::uint64_t seed) {
  check_supported(method, domain);
  if (d.empty()) fail(errc::data, "cannot evaluate an empty dataset");
  evaluation_report r;
  r.protocol_used = p;
  r.method = method;
  r.domain = domain;
  r.config = cfg;
  r.seed = seed;
  r.class_set = d.class_set();
  for (const auto& f : make_folds(d, p, seed, cfg.window)) r.folds.push_back(run_fold(d, f, p, method, domain, cfg, seed));
  aggregate(r);
  return r;
}

}  // namespace magloc
