#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "magloc/error.hpp"

namespace magloc {

using series = std::vector<double>;

/// One magnetometer reading on the 1 Hz grid; components in microtesla.
struct sample {
  std::int64_t t = 0;
  double bx = 0.0;
  double by = 0.0;
  double bz = 0.0;

  friend bool operator==(const sample&, const sample&) = default;
};

/// Orientation-independent field strength of a reading.
inline double magnitude(const sample& s) { return std::hypot(s.bx, s.by, s.bz); }

/// Minimum admitted trace length, one default-sized segment.
inline constexpr std::size_t min_observation_length = 60;
inline constexpr std::size_t default_window = 60;

/// One labelled trace recorded by one device at one place.
class observation {
public:
  observation() = default;

  observation(std::string device_id, std::string location_id, std::string location_type,
              std::int64_t start_time, std::vector<sample> samples)
      : device_id_(std::move(device_id)),
        location_id_(std::move(location_id)),
        location_type_(std::move(location_type)),
        start_time_(start_time),
        samples_(std::move(samples)) {
    series_.reserve(samples_.size());
    for (const auto& s : samples_) series_.push_back(magnitude(s));
  }

  const std::string& device_id() const noexcept { return device_id_; }
  const std::string& location_id() const noexcept { return location_id_; }
  const std::string& location_type() const noexcept { return location_type_; }
  std::int64_t start_time() const noexcept { return start_time_; }
  const std::vector<sample>& samples() const noexcept { return samples_; }
  const series& values() const noexcept { return series_; }
  std::size_t size() const noexcept { return samples_.size(); }

  friend bool operator==(const observation& a, const observation& b) {
    return a.device_id_ == b.device_id_ && a.location_id_ == b.location_id_ &&
           a.location_type_ == b.location_type_ && a.start_time_ == b.start_time_ &&
           a.samples_ == b.samples_;
  }

private:
  std::string device_id_;
  std::string location_id_;
  std::string location_type_;
  std::int64_t start_time_ = 0;
  std::vector<sample> samples_;
  series series_;
};

/// A collection of observations; the class set is the sorted set of labels present.
class dataset {
public:
  dataset() = default;

  explicit dataset(std::vector<observation> observations) : observations_(std::move(observations)) {
    std::set<std::string> labels;
    for (const auto& o : observations_) labels.insert(o.location_type());
    class_set_.assign(labels.begin(), labels.end());
  }

  const std::vector<observation>& observations() const noexcept { return observations_; }
  const std::vector<std::string>& class_set() const noexcept { return class_set_; }
  std::size_t size() const noexcept { return observations_.size(); }
  bool empty() const noexcept { return observations_.empty(); }
  const observation& operator[](std::size_t i) const { return observations_[i]; }

  std::size_t class_index(const std::string& label) const {
    auto it = std::lower_bound(class_set_.begin(), class_set_.end(), label);
    if (it == class_set_.end() || *it != label) fail(errc::unknown_label, "unknown label '" + label + "'");
    return static_cast<std::size_t>(it - class_set_.begin());
  }

  friend bool operator==(const dataset& a, const dataset& b) { return a.observations_ == b.observations_; }

private:
  std::vector<observation> observations_;
  std::vector<std::string> class_set_;
};

/// A fixed-length window cut from an observation.
struct segment {
  std::string device_id;
  std::string location_id;
  std::string location_type;
  std::size_t observation_index = 0;
  std::size_t segment_index = 0;
  series values;
};

/// Splits an observation into floor(n / window) consecutive non-overlapping
/// segments; the trailing remainder is dropped.
inline std::vector<segment> segment_observation(const observation& obs, std::size_t window,
                                                std::size_t observation_index = 0) {
  if (window < 2) fail(errc::invalid_window, "segment window must be at least 2 samples");
  if (obs.size() < window)
    fail(errc::invalid_window, "window of " + std::to_string(window) + " exceeds observation length " +
                                   std::to_string(obs.size()));
  const std::size_t count = obs.size() / window;
  std::vector<segment> out;
  out.reserve(count);
  const auto& v = obs.values();
  for (std::size_t k = 0; k < count; ++k) {
    segment s;
    s.device_id = obs.device_id();
    s.location_id = obs.location_id();
    s.location_type = obs.location_type();
    s.observation_index = observation_index;
    s.segment_index = k;
    s.values.assign(v.begin() + static_cast<std::ptrdiff_t>(k * window),
                    v.begin() + static_cast<std::ptrdiff_t>((k + 1) * window));
    out.push_back(std::move(s));
  }
  return out;
}

/// Segments every observation, in dataset order.
inline std::vector<segment> segment_dataset(const dataset& d, std::size_t window) {
  std::vector<segment> out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    auto segs = segment_observation(d[i], window, i);
    for (auto& s : segs) out.push_back(std::move(s));
  }
  return out;
}

enum class violation_kind { non_finite, duplicate_key, label_conflict, too_short, time_grid };

inline const char* to_string(violation_kind k) {
  switch (k) {
    case violation_kind::non_finite: return "non-finite";
    case violation_kind::duplicate_key: return "duplicate-key";
    case violation_kind::label_conflict: return "label-conflict";
    case violation_kind::too_short: return "too-short";
    case violation_kind::time_grid: return "time-grid";
  }
  return "unknown";
}

struct violation {
  violation_kind kind;
  std::size_t observation_index = 0;
  std::string message;
};

struct validation_report {
  std::vector<violation> violations;

  bool ok() const noexcept { return violations.empty(); }
  std::size_t count(violation_kind k) const {
    return static_cast<std::size_t>(
        std::count_if(violations.begin(), violations.end(), [k](const violation& v) { return v.kind == k; }));
  }
};

inline validation_report validate_dataset(const dataset& d) {
  validation_report report;
  std::set<std::tuple<std::string, std::string, std::int64_t>> keys;
  std::map<std::string, std::string> type_of_location;
  std::set<std::string> conflicted;

  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& o = d[i];
    if (o.size() < min_observation_length) {
      report.violations.push_back({violation_kind::too_short, i,
                                   "observation has " + std::to_string(o.size()) + " samples, need " +
                                       std::to_string(min_observation_length)});
    }
    for (std::size_t k = 0; k < o.samples().size(); ++k) {
      const auto& s = o.samples()[k];
      if (!std::isfinite(s.bx) || !std::isfinite(s.by) || !std::isfinite(s.bz)) {
        report.violations.push_back(
            {violation_kind::non_finite, i, "non-finite component at sample " + std::to_string(k)});
        break;
      }
    }
    for (std::size_t k = 0; k < o.samples().size(); ++k) {
      if (o.samples()[k].t != static_cast<std::int64_t>(k)) {
        report.violations.push_back(
            {violation_kind::time_grid, i, "sample " + std::to_string(k) + " is off the unit-step grid"});
        break;
      }
    }
    if (!keys.emplace(o.device_id(), o.location_id(), o.start_time()).second) {
      report.violations.push_back({violation_kind::duplicate_key, i,
                                   "duplicate (device, location, start) key for " + o.device_id() + "/" +
                                       o.location_id()});
    }
    auto [it, inserted] = type_of_location.emplace(o.location_id(), o.location_type());
    if (!inserted && it->second != o.location_type() && conflicted.insert(o.location_id()).second) {
      report.violations.push_back({violation_kind::label_conflict, i,
                                   "location '" + o.location_id() + "' labelled both '" + it->second +
                                       "' and '" + o.location_type() + "'"});
    }
  }
  return report;
}

}  // namespace magloc
