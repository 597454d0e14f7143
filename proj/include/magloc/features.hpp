#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "magloc/error.hpp"
#include "magloc/spectral.hpp"

namespace magloc {

enum class feature_source { statistical = 0, shapelet = 1, embedding = 2, combined = 3 };

inline const char* to_string(feature_source s) {
  switch (s) {
    case feature_source::statistical: return "statistical";
    case feature_source::shapelet: return "shapelet";
    case feature_source::embedding: return "embedding";
    case feature_source::combined: return "combined";
  }
  return "unknown";
}

/// Named, fixed-length numeric descriptor of one segment. `origins` records
/// the source of every entry so that combined vectors keep a canonical order.
struct feature_vector {
  std::vector<double> values;
  std::vector<std::string> schema;
  feature_source source = feature_source::statistical;
  std::vector<feature_source> origins;

  std::size_t size() const noexcept { return values.size(); }
  bool empty() const noexcept { return values.empty(); }

  bool has_sentinels() const {
    return std::any_of(values.begin(), values.end(), [](double v) { return std::isinf(v); });
  }
};

inline feature_vector make_feature_vector(std::vector<double> values, std::vector<std::string> schema,
                                          feature_source source) {
  if (values.size() != schema.size())
    fail(errc::schema_mismatch, "feature vector has " + std::to_string(values.size()) + " values but " +
                                    std::to_string(schema.size()) + " names");
  feature_vector fv;
  fv.origins.assign(values.size(), source);
  fv.values = std::move(values);
  fv.schema = std::move(schema);
  fv.source = source;
  return fv;
}

enum class descriptor_domain { time, frequency, both };
enum class flat_spectrum_policy { zero, error };

struct descriptor_config {
  std::size_t subwindow = 15;
  descriptor_domain domain = descriptor_domain::both;
  // What to report for spectral descriptors when a subwindow has no non-DC power.
  flat_spectrum_policy on_flat_spectrum = flat_spectrum_policy::zero;
};

inline constexpr std::size_t descriptors_per_view = 8;

inline const std::vector<std::string>& descriptor_names() {
  static const std::vector<std::string> names = {"median",     "amplitude", "energy",    "natural_freq",
                                                 "natural_mag", "centroid", "peak_freq", "peak_mag"};
  return names;
}

namespace detail {

inline double median_of(std::span<const double> x) {
  std::vector<double> v(x.begin(), x.end());
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2), v.end());
  const double upper = v[n / 2];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2));
  return 0.5 * (lower + upper);
}

// The eight descriptors of a single window.
inline std::vector<double> window_descriptors(std::span<const double> x, flat_spectrum_policy policy) {
  std::vector<double> out(descriptors_per_view, 0.0);
  out[0] = median_of(x);
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  out[1] = *mx - *mn;
  double energy = 0.0;
  for (double v : x) energy += v * v;
  out[2] = energy;

  const auto ps = power_spectrum(x);
  const std::size_t top = ps.size() - 1;  // last non-DC bin index
  double total = 0.0, weighted = 0.0, pmax = 0.0;
  std::size_t argmax = 1;
  for (std::size_t k = 1; k <= top; ++k) {
    total += ps[k].power;
    weighted += ps[k].frequency * ps[k].power;
    if (ps[k].power > pmax) {
      pmax = ps[k].power;
      argmax = k;
    }
  }
  const double scale = std::max(1.0, energy);
  if (top < 1 || total <= 1e-20 * scale) {
    if (policy == flat_spectrum_policy::error)
      fail(errc::degenerate_spectrum, "spectral centroid undefined: window has no non-DC power");
    return out;
  }

  // Lowest-frequency non-DC local maximum; differences below tol count as ties.
  const double tol = 1e-12 * pmax;
  std::size_t natural = 0;
  for (std::size_t k = 1; k <= top && natural == 0; ++k) {
    const double p = ps[k].power;
    const bool has_left = k > 1, has_right = k < top;
    const double left = has_left ? ps[k - 1].power : -1.0;
    const double right = has_right ? ps[k + 1].power : -1.0;
    const bool ge_left = !has_left || p >= left - tol;
    const bool ge_right = !has_right || p >= right - tol;
    const bool strict = (has_left && p > left + tol) || (has_right && p > right + tol);
    if (ge_left && ge_right && strict && p > tol) natural = k;
  }
  if (natural == 0) natural = argmax;

  out[3] = ps[natural].frequency;
  out[4] = ps[natural].power;
  out[5] = weighted / total;
  out[6] = ps[argmax].frequency;
  out[7] = ps[argmax].power;
  return out;
}

// Averages window descriptors over non-overlapping subwindows.
inline std::vector<double> view_descriptors(std::span<const double> x, std::size_t subwindow,
                                            flat_spectrum_policy policy) {
  std::size_t width = subwindow;
  if (x.size() < 2 * subwindow) width = x.size();
  const std::size_t count = x.size() / width;
  std::vector<double> acc(descriptors_per_view, 0.0);
  for (std::size_t w = 0; w < count; ++w) {
    const auto d = window_descriptors(x.subspan(w * width, width), policy);
    for (std::size_t i = 0; i < descriptors_per_view; ++i) acc[i] += d[i];
  }
  for (auto& v : acc) v /= static_cast<double>(count);
  return acc;
}

}  // namespace detail

/// The eight statistical descriptors averaged over subwindows of the segment,
/// for the time-domain view and/or the one-sided power sequence viewed as a series.
inline feature_vector extract_descriptors(std::span<const double> seg, const descriptor_config& cfg = {}) {
  if (cfg.subwindow < 2) fail(errc::invalid_window, "descriptor subwindow must be at least 2");
  if (seg.size() < 2 * cfg.subwindow && seg.size() != cfg.subwindow)
    fail(errc::invalid_window, "segment of " + std::to_string(seg.size()) + " samples is too short for subwindow " +
                                   std::to_string(cfg.subwindow));
  std::vector<double> values;
  std::vector<std::string> schema;
  const auto& names = descriptor_names();

  if (cfg.domain != descriptor_domain::frequency) {
    const auto d = detail::view_descriptors(seg, cfg.subwindow, cfg.on_flat_spectrum);
    values.insert(values.end(), d.begin(), d.end());
    for (const auto& n : names) schema.push_back("stat.t." + n);
  }
  if (cfg.domain != descriptor_domain::time) {
    const auto ps = power_spectrum(seg);
    std::vector<double> power(ps.size());
    for (std::size_t k = 0; k < ps.size(); ++k) power[k] = ps[k].power;
    if (power.size() < 2) fail(errc::too_short, "power sequence too short for descriptors");
    const auto d = detail::view_descriptors(power, cfg.subwindow, cfg.on_flat_spectrum);
    values.insert(values.end(), d.begin(), d.end());
    for (const auto& n : names) schema.push_back("stat.f." + n);
  }
  return make_feature_vector(std::move(values), std::move(schema), feature_source::statistical);
}

/// Concatenates two feature vectors. Entries are stably ordered by source
/// (statistical, shapelet, embedding) so the result does not depend on call order.
inline feature_vector combine(const feature_vector& a, const feature_vector& b) {
  for (const auto* fv : {&a, &b}) {
    if (fv->values.size() != fv->schema.size() || fv->origins.size() != fv->values.size())
      fail(errc::schema_mismatch, "feature vector bookkeeping mismatch");
  }
  if (b.empty()) return a;
  if (a.empty()) return b;

  struct entry {
    feature_source origin;
    std::size_t order;
  };
  std::vector<entry> entries;
  const std::size_t n = a.size() + b.size();
  entries.reserve(n);
  for (std::size_t i = 0; i < n; ++i) entries.push_back({i < a.size() ? a.origins[i] : b.origins[i - a.size()], i});
  std::stable_sort(entries.begin(), entries.end(),
                   [](const entry& x, const entry& y) { return x.origin < y.origin; });

  feature_vector out;
  out.source = feature_source::combined;
  for (const auto& e : entries) {
    const bool from_a = e.order < a.size();
    const std::size_t k = from_a ? e.order : e.order - a.size();
    const auto& src = from_a ? a : b;
    out.values.push_back(src.values[k]);
    out.schema.push_back(src.schema[k]);
    out.origins.push_back(e.origin);
  }
  return out;
}

/// Per-feature z-score parameters estimated on a training set.
struct standardizer {
  std::vector<std::string> schema;
  std::vector<double> mean;
  std::vector<double> stddev;

  feature_vector apply(const feature_vector& fv) const {
    if (fv.schema != schema) fail(errc::schema_mismatch, "standardizer schema differs from input schema");
    feature_vector out = fv;
    for (std::size_t i = 0; i < out.values.size(); ++i)
      out.values[i] = stddev[i] > 0.0 ? (out.values[i] - mean[i]) / stddev[i] : 0.0;
    return out;
  }
};

inline standardizer fit_standardizer(const std::vector<feature_vector>& train) {
  if (train.empty()) fail(errc::data, "standardize: empty training set");
  standardizer s;
  s.schema = train.front().schema;
  const std::size_t d = s.schema.size();
  s.mean.assign(d, 0.0);
  s.stddev.assign(d, 0.0);
  for (const auto& fv : train) {
    if (fv.schema != s.schema) fail(errc::schema_mismatch, "standardize: inconsistent training schemas");
    for (std::size_t i = 0; i < d; ++i) s.mean[i] += fv.values[i];
  }
  const double n = static_cast<double>(train.size());
  for (auto& m : s.mean) m /= n;
  for (const auto& fv : train)
    for (std::size_t i = 0; i < d; ++i) {
      const double c = fv.values[i] - s.mean[i];
      s.stddev[i] += c * c;
    }
  for (std::size_t i = 0; i < d; ++i) {
    s.stddev[i] = std::sqrt(s.stddev[i] / n);
    // Relative floor so that round-off on a constant column reads as zero variance.
    if (s.stddev[i] <= 1e-12 * std::max(1.0, std::abs(s.mean[i]))) s.stddev[i] = 0.0;
  }
  return s;
}

struct standardized_sets {
  std::vector<feature_vector> train;
  std::vector<feature_vector> applied;
  standardizer parameters;
};

/// Z-scores both sets using statistics of `train` only.
inline standardized_sets standardize(const std::vector<feature_vector>& train,
                                     const std::vector<feature_vector>& apply_to) {
  standardized_sets out;
  out.parameters = fit_standardizer(train);
  for (const auto& fv : train) out.train.push_back(out.parameters.apply(fv));
  for (const auto& fv : apply_to) out.applied.push_back(out.parameters.apply(fv));
  return out;
}

}  // namespace magloc
