#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "magloc/core.hpp"
#include "magloc/distances.hpp"
#include "magloc/error.hpp"
#include "magloc/features.hpp"

namespace magloc {

enum class shapelet_domain { time, gcc };

inline const char* to_string(shapelet_domain d) { return d == shapelet_domain::time ? "time" : "gcc"; }

struct shapelet_config {
  std::vector<std::size_t> lengths = {10, 20, 30};
  std::size_t stride = 5;
  double presence_threshold = 0.90;
  // Unset means ceil(presence_threshold * class unit count).
  std::optional<std::size_t> min_support_count;
  // Presence: time domain, best z-normalized distance <= match_epsilon * length;
  // gcc domain, best gcc distance <= gcc_match_epsilon.
  double match_epsilon = 0.3;
  double gcc_match_epsilon = 0.5;
  // Average-linkage cut. Time domain: in units of sqrt(length), i.e. on
  // euclidean / sqrt(length) which is sqrt(2 (1 - correlation)).
  double cluster_cut = 0.6;
  double gcc_cluster_cut = 0.5;
  std::size_t max_per_class = 5;
  shapelet_domain domain = shapelet_domain::time;

  void validate() const {
    if (stride < 1) fail(errc::configuration, "shapelet stride must be >= 1");
    if (!(presence_threshold > 0.0 && presence_threshold <= 1.0))
      fail(errc::configuration, "presence threshold must lie in (0, 1]");
    if (lengths.empty()) fail(errc::configuration, "shapelet length set is empty");
    for (auto l : lengths)
      if (l < 4) fail(errc::configuration, "shapelet lengths must be >= 4");
    if (max_per_class < 1) fail(errc::configuration, "max_per_class must be >= 1");
  }
};

struct shapelet {
  std::string id;
  series pattern;
  std::size_t length = 0;
  std::string class_label;
  double support = 0.0;
  std::size_t support_count = 0;
  shapelet_domain domain = shapelet_domain::time;
  bool constant = false;
};

struct extraction_failure {
  std::string class_label;
  std::string reason;
};

struct shapelet_dictionary {
  std::vector<shapelet> entries;
  shapelet_config config;
  std::vector<extraction_failure> failures;

  std::size_t max_length() const {
    std::size_t m = 0;
    for (const auto& s : entries) m = std::max(m, s.length);
    return m;
  }
};

/// Training material for one observation: its label and provenance plus
/// one or more contiguous pieces (whole trace, or runs of training segments).
struct training_unit {
  std::string label;
  std::string location_id;
  std::string device_id;
  std::vector<series> pieces;
};

struct candidate {
  series pattern;  // z-normalized
  std::size_t length = 0;
  std::string label;
  std::size_t unit = 0;
  std::size_t piece = 0;
  std::size_t offset = 0;
  bool constant = false;
  std::vector<complex> spectrum;  // gcc domain only
};

struct candidate_set {
  std::vector<candidate> candidates;
  std::vector<std::string> warnings;
};

struct z_normalized {
  series values;
  bool constant = false;
};

inline z_normalized z_normalize(std::span<const double> x) {
  z_normalized out;
  out.values.resize(x.size());
  if (x.empty()) return out;
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  if (sd <= 1e-10 * std::max(1.0, std::abs(mean))) {
    std::fill(out.values.begin(), out.values.end(), 0.0);
    out.constant = true;
    return out;
  }
  for (std::size_t i = 0; i < x.size(); ++i) out.values[i] = (x[i] - mean) / sd;
  return out;
}

/// Every z-normalized window of each configured length at the configured
/// stride, in (unit, piece, length, offset) order. Lengths not shorter than a
/// piece are skipped with a warning.
inline candidate_set generate_candidates(const std::vector<training_unit>& units, const shapelet_config& cfg) {
  cfg.validate();
  candidate_set out;
  std::set<std::pair<std::size_t, std::size_t>> warned;
  for (std::size_t u = 0; u < units.size(); ++u) {
    for (std::size_t p = 0; p < units[u].pieces.size(); ++p) {
      const auto& piece = units[u].pieces[p];
      for (std::size_t len : cfg.lengths) {
        if (len >= piece.size()) {
          if (warned.emplace(len, piece.size()).second)
            out.warnings.push_back("shapelet length " + std::to_string(len) + " skipped for series of length " +
                                   std::to_string(piece.size()));
          continue;
        }
        const std::size_t count = (piece.size() - len) / cfg.stride + 1;
        for (std::size_t k = 0; k < count; ++k) {
          const std::size_t off = k * cfg.stride;
          auto z = z_normalize(std::span<const double>(piece).subspan(off, len));
          candidate c;
          c.pattern = std::move(z.values);
          c.constant = z.constant;
          c.length = len;
          c.label = units[u].label;
          c.unit = u;
          c.piece = p;
          c.offset = off;
          if (cfg.domain == shapelet_domain::gcc && !c.constant) c.spectrum = detail::gcc_spectrum(c.pattern);
          out.candidates.push_back(std::move(c));
        }
      }
    }
  }
  return out;
}

struct cluster {
  std::vector<std::size_t> members;  // ascending
  std::size_t medoid = 0;
};

/// Average-linkage agglomerative clustering of a precomputed distance matrix
/// (nearest-neighbour chain), cut so that clusters are joined by merges of
/// height <= cut. Each cluster reports the member with minimum summed distance
/// to the others as its medoid; ties resolve to the lower index.
inline std::vector<cluster> cluster_from_matrix(const square_matrix& dist, double cut) {
  const std::size_t n = dist.size();
  if (n == 0) return {};
  square_matrix d = dist;
  std::vector<std::size_t> size(n, 1);
  std::vector<char> active(n, 1);
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };

  std::vector<std::size_t> chain;
  std::size_t remaining = n;
  while (remaining > 1) {
    if (chain.empty()) {
      for (std::size_t i = 0; i < n; ++i)
        if (active[i]) {
          chain.push_back(i);
          break;
        }
    }
    const std::size_t a = chain.back();
    const std::size_t prev = chain.size() >= 2 ? chain[chain.size() - 2] : n;
    std::size_t b = n;
    double best = std::numeric_limits<double>::infinity();
    if (prev != n) {
      b = prev;
      best = d(a, prev);
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == a) continue;
      if (d(a, k) < best) {
        best = d(a, k);
        b = k;
      }
    }
    if (b == prev) {
      chain.pop_back();
      chain.pop_back();
      const std::size_t keep = std::min(a, b), drop = std::max(a, b);
      if (best <= cut) parent[find(drop)] = find(keep);
      const double na = static_cast<double>(size[keep]), nb = static_cast<double>(size[drop]);
      for (std::size_t k = 0; k < n; ++k) {
        if (!active[k] || k == keep || k == drop) continue;
        const double v = (na * d(keep, k) + nb * d(drop, k)) / (na + nb);
        d(keep, k) = v;
        d(k, keep) = v;
      }
      size[keep] += size[drop];
      active[drop] = 0;
      --remaining;
    } else {
      chain.push_back(b);
    }
  }

  std::map<std::size_t, std::size_t> slot_of_root;
  std::vector<cluster> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = find(i);
    auto [it, inserted] = slot_of_root.emplace(r, out.size());
    if (inserted) out.emplace_back();
    out[it->second].members.push_back(i);
  }
  for (auto& c : out) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t m : c.members) {
      double s = 0.0;
      for (std::size_t o : c.members) s += dist(m, o);
      if (s < best) {
        best = s;
        c.medoid = m;
      }
    }
  }
  return out;
}

inline std::vector<cluster> cluster_candidates(const std::vector<series>& candidates, const distance_kind& kind,
                                               double cut) {
  if (candidates.empty()) fail(errc::data, "cluster_candidates: no candidates");
  return cluster_from_matrix(pairwise_matrix(candidates, kind), cut);
}

namespace detail {

// Best match of a z-normalized pattern over every sliding window of x, as a
// normalized distance: time domain divides the euclidean distance by the
// pattern length, gcc domain reports the raw gcc distance.
inline double best_match(std::span<const double> x, const series& pattern, shapelet_domain domain,
                         const std::vector<complex>* pattern_spectrum = nullptr) {
  const std::size_t len = pattern.size();
  if (len == 0 || x.size() < len) return std::numeric_limits<double>::infinity();
  std::vector<complex> own;
  if (domain == shapelet_domain::gcc && pattern_spectrum == nullptr) {
    own = gcc_spectrum(pattern);
    pattern_spectrum = &own;
  }
  double best = std::numeric_limits<double>::infinity();
  if (domain == shapelet_domain::time) {
    // Same arithmetic as z_normalize, without the copy; abandons a window once
    // its partial sum exceeds the best so far.
    const double n = static_cast<double>(len);
    double bound = std::numeric_limits<double>::infinity();
    for (std::size_t off = 0; off + len <= x.size(); ++off) {
      const double* w = x.data() + off;
      double mean = 0.0;
      for (std::size_t i = 0; i < len; ++i) mean += w[i];
      mean /= n;
      double var = 0.0;
      for (std::size_t i = 0; i < len; ++i) var += (w[i] - mean) * (w[i] - mean);
      const double sd = std::sqrt(var / n);
      const bool flat = sd <= 1e-10 * std::max(1.0, std::abs(mean));
      double s = 0.0;
      std::size_t i = 0;
      for (; i < len && s <= bound; ++i) {
        const double e = (flat ? 0.0 : (w[i] - mean) / sd) - pattern[i];
        s += e * e;
      }
      if (i < len) continue;
      const double dist = std::sqrt(s) / n;
      if (dist < best) {
        best = dist;
        bound = s;
      }
    }
    return best;
  }
  const bool pattern_flat = std::all_of(pattern.begin(), pattern.end(), [](double v) { return v == 0.0; });
  for (std::size_t off = 0; off + len <= x.size(); ++off) {
    const auto z = z_normalize(x.subspan(off, len));
    const double dist =
        (z.constant || pattern_flat) ? 1.0 : 1.0 - gcc_similarity(gcc_spectrum(z.values), *pattern_spectrum);
    best = std::min(best, dist);
  }
  return best;
}

inline std::size_t ceil_fraction(double fraction, std::size_t count) {
  return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(count) - 1e-9));
}

}  // namespace detail

/// Normalized best-match distance of a shapelet within a series; +inf when
/// the series is shorter than the shapelet.
inline double shapelet_distance(std::span<const double> x, const shapelet& s) {
  return detail::best_match(x, s.pattern, s.domain);
}

/// Builds the per-class shapelet dictionary from labelled training units.
inline shapelet_dictionary extract_dictionary(const std::vector<training_unit>& units, const shapelet_config& cfg) {
  cfg.validate();
  if (units.empty()) fail(errc::data, "extract_dictionary: no training units");
  shapelet_dictionary dict;
  dict.config = cfg;

  const auto cands = generate_candidates(units, cfg);
  std::set<std::string> label_set;
  for (const auto& u : units) label_set.insert(u.label);
  auto lengths = cfg.lengths;
  std::sort(lengths.begin(), lengths.end());
  lengths.erase(std::unique(lengths.begin(), lengths.end()), lengths.end());

  struct kept {
    std::size_t origin;  // candidate index, the deterministic tie-break key
    std::size_t length;
    double support;
    std::size_t span;
    std::size_t cluster_size;
    double mean_match;                 // mean best-match distance over matched units
    std::vector<std::size_t> matched;  // unit indices
    double contrast = 0.0;             // mean best match outside the class over inside
  };

  for (const auto& label : label_set) {
    std::vector<std::size_t> class_units;
    for (std::size_t u = 0; u < units.size(); ++u)
      if (units[u].label == label) class_units.push_back(u);
    const std::size_t n_units = class_units.size();
    const std::size_t required =
        cfg.min_support_count.value_or(detail::ceil_fraction(cfg.presence_threshold, n_units));
    std::vector<kept> entries;

    for (std::size_t len : lengths) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < cands.candidates.size(); ++i) {
        const auto& c = cands.candidates[i];
        if (c.label == label && c.length == len && !c.constant) idx.push_back(i);
      }
      if (idx.empty()) continue;

      square_matrix dist(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = i + 1; j < idx.size(); ++j) {
          const auto& a = cands.candidates[idx[i]];
          const auto& b = cands.candidates[idx[j]];
          const double v = cfg.domain == shapelet_domain::time
                               ? euclidean(a.pattern, b.pattern)
                               : 1.0 - detail::gcc_similarity(a.spectrum, b.spectrum);
          dist(i, j) = v;
          dist(j, i) = v;
        }
      const double cut = cfg.domain == shapelet_domain::time
                             ? cfg.cluster_cut * std::sqrt(static_cast<double>(len))
                             : cfg.gcc_cluster_cut;
      const auto clusters = cluster_from_matrix(dist, cut);

      for (const auto& cl : clusters) {
        std::set<std::size_t> span;
        for (auto m : cl.members) span.insert(cands.candidates[idx[m]].unit);
        // Single-unit clusters are not recurring events. Wider spans are not
        // required: the stride scatters one event's alignments over several clusters.
        if (span.size() < std::min<std::size_t>(2, required)) continue;
        const auto& medoid = cands.candidates[idx[cl.medoid]];
        std::vector<std::size_t> matched;
        double matched_total = 0.0;
        for (auto u : class_units) {
          double best = std::numeric_limits<double>::infinity();
          for (const auto& piece : units[u].pieces)
            best = std::min(best, detail::best_match(piece, medoid.pattern, cfg.domain,
                                                     cfg.domain == shapelet_domain::gcc ? &medoid.spectrum : nullptr));
          const double limit = cfg.domain == shapelet_domain::time ? cfg.match_epsilon : cfg.gcc_match_epsilon;
          if (best <= limit) {
            matched.push_back(u);
            matched_total += best;
          }
        }
        const double support = static_cast<double>(matched.size()) / static_cast<double>(n_units);
        if (support + 1e-12 < cfg.presence_threshold || matched.size() < required) continue;
        const double mean_match = matched_total / static_cast<double>(std::max<std::size_t>(1, matched.size()));
        entries.push_back({idx[cl.medoid], len, support, span.size(), cl.members.size(), mean_match, std::move(matched)});
      }
    }

    // Longer shapelets win over shorter ones matching the same observations.
    std::vector<kept> survivors;
    for (const auto& e : entries) {
      const bool dominated = std::any_of(entries.begin(), entries.end(), [&](const kept& f) {
        return f.length > e.length && f.matched == e.matched;
      });
      if (!dominated) survivors.push_back(e);
    }
    // Patterns common to every class (slow background trends) say nothing
    // about this one: among the survivors, prefer those whose best match
    // elsewhere is many times worse than within the class. A ratio favours
    // windows the class reproduces tightly over ones half made of background.
    if (survivors.size() > cfg.max_per_class) {
      for (auto& e : survivors) {
        const auto& c = cands.candidates[e.origin];
        double inside = 0.0, outside = 0.0;
        std::size_t n_in = 0, n_out = 0;
        for (const auto& u : units) {
          double best = std::numeric_limits<double>::infinity();
          for (const auto& piece : u.pieces)
            best = std::min(best, detail::best_match(piece, c.pattern, cfg.domain,
                                                     cfg.domain == shapelet_domain::gcc ? &c.spectrum : nullptr));
          if (!std::isfinite(best)) continue;
          if (u.label == label) inside += best, ++n_in;
          else outside += best, ++n_out;
        }
        if (n_in && n_out) {
          const double in_mean = inside / static_cast<double>(n_in), out_mean = outside / static_cast<double>(n_out);
          e.contrast = in_mean > 0.0 ? out_mean / in_mean
                                     : (out_mean > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
        }
      }
    }
    std::sort(survivors.begin(), survivors.end(), [](const kept& a, const kept& b) {
      if (a.support != b.support) return a.support > b.support;
      if (a.contrast != b.contrast) return a.contrast > b.contrast;
      if (a.mean_match != b.mean_match) return a.mean_match < b.mean_match;
      if (a.span != b.span) return a.span > b.span;
      if (a.length != b.length) return a.length > b.length;
      if (a.cluster_size != b.cluster_size) return a.cluster_size > b.cluster_size;
      return a.origin < b.origin;
    });
    if (survivors.size() > cfg.max_per_class) survivors.resize(cfg.max_per_class);
    std::sort(survivors.begin(), survivors.end(), [](const kept& a, const kept& b) {
      if (a.length != b.length) return a.length < b.length;
      return a.origin < b.origin;
    });

    if (survivors.empty()) {
      dict.failures.push_back({label, "no candidate reached support " + std::to_string(cfg.presence_threshold) +
                                          " over " + std::to_string(n_units) + " observations"});
      continue;
    }
    for (std::size_t k = 0; k < survivors.size(); ++k) {
      const auto& e = survivors[k];
      const auto& c = cands.candidates[e.origin];
      shapelet s;
      s.id = label + "/" + std::to_string(e.length) + "/" + std::to_string(k);
      s.pattern = c.pattern;
      s.length = e.length;
      s.class_label = label;
      s.support = e.support;
      s.support_count = e.matched.size();
      s.domain = cfg.domain;
      s.constant = c.constant;
      dict.entries.push_back(std::move(s));
    }
  }
  return dict;
}

/// One value per dictionary entry: the entry's best normalized match distance
/// within the series (+inf when the series is shorter than the entry).
inline feature_vector shapelet_transform(std::span<const double> x, const shapelet_dictionary& dict) {
  std::vector<double> values;
  std::vector<std::string> schema;
  values.reserve(dict.entries.size());
  for (const auto& s : dict.entries) {
    values.push_back(shapelet_distance(x, s));
    schema.push_back("shp." + s.id);
  }
  return make_feature_vector(std::move(values), std::move(schema), feature_source::shapelet);
}

}  // namespace magloc
