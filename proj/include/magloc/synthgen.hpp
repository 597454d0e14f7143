#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "magloc/core.hpp"
#include "magloc/error.hpp"
#include "magloc/rng.hpp"

namespace magloc {

enum class motif_family { pulse, ramp, oscillation };

inline const char* to_string(motif_family f) {
  switch (f) {
    case motif_family::pulse: return "pulse";
    case motif_family::ramp: return "ramp";
    case motif_family::oscillation: return "oscillation";
  }
  return "unknown";
}

inline motif_family parse_motif_family(const std::string& s) {
  if (s == "pulse") return motif_family::pulse;
  if (s == "ramp") return motif_family::ramp;
  if (s == "oscillation") return motif_family::oscillation;
  fail(errc::configuration, "unknown motif family '" + s + "'");
}

struct motif_spec {
  motif_family family = motif_family::pulse;
  std::size_t length = 20;
  double amplitude = 4.0;  // microtesla
  double period = 6.0;     // oscillation only, samples
  bool inverted = false;   // sign flip
  bool reversed = false;   // time reversal

  /// The additive waveform, starting and ending near zero.
  series shape() const {
    series m(length, 0.0);
    const double last = static_cast<double>(length - 1);
    for (std::size_t i = 0; i < length; ++i) {
      const double u = static_cast<double>(i) / last;
      double v = 0.0;
      switch (family) {
        case motif_family::pulse: v = std::sin(std::numbers::pi * u); break;
        case motif_family::ramp: v = u; break;
        case motif_family::oscillation:
          v = u * std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / period);
          break;
      }
      m[i] = amplitude * v;
    }
    if (reversed) std::reverse(m.begin(), m.end());
    if (inverted)
      for (auto& v : m) v = -v;
    return m;
  }
};

struct range {
  double lo = 0.0;
  double hi = 0.0;
};

struct synth_spec {
  std::size_t classes = 6;
  std::size_t places = 3;
  std::size_t devices = 3;
  std::size_t trace_length = 600;
  // motifs[c] are cycled through the occurrences of class c; empty = noise only.
  std::vector<std::vector<motif_spec>> motifs;
  std::size_t occurrences = 10;
  bool jitter = true;  // random offset inside each occurrence slot, else slot start
  double noise_sigma = 0.4;
  range device_gain{0.9, 1.1};
  range device_offset{-5.0, 5.0};
  range place_baseline{45.0, 55.0};
  // Slow per-trace background: a sum of three sinusoids with random periods
  // in drift_period and random phases, total standard deviation drift_amplitude.
  double drift_amplitude = 10.0;
  range drift_period{150.0, 900.0};
  // Per-place fixed waveform repeating every `signature_period` samples.
  double place_signature = 0.0;
  std::size_t signature_period = 60;
  std::vector<std::string> class_names;  // empty = defaults
  std::uint64_t seed = 0;

  void validate() const {
    if (classes < 1 || places < 1 || devices < 1) fail(errc::configuration, "synth: classes, places and devices must be >= 1");
    if (trace_length < min_observation_length)
      fail(errc::configuration, "synth: trace length below " + std::to_string(min_observation_length));
    if (!(noise_sigma >= 0.0) || !(place_signature >= 0.0)) fail(errc::configuration, "synth: negative noise or signature");
    if (motifs.size() != classes) fail(errc::configuration, "synth: motif list count differs from class count");
    if (!class_names.empty() && class_names.size() != classes)
      fail(errc::configuration, "synth: class name count differs from class count");
    if (device_gain.lo > device_gain.hi || device_offset.lo > device_offset.hi || place_baseline.lo > place_baseline.hi)
      fail(errc::configuration, "synth: empty parameter range");
    if (!(drift_amplitude >= 0.0) || !(drift_period.lo > 0.0) || drift_period.lo > drift_period.hi)
      fail(errc::configuration, "synth: invalid drift settings");
    if (signature_period < 2) fail(errc::configuration, "synth: signature period must be >= 2");
    for (const auto& set : motifs)
      for (const auto& m : set) {
        if (m.length < 2 || m.length >= trace_length) fail(errc::configuration, "synth: motif length must lie in [2, trace length)");
        if (m.family == motif_family::oscillation && !(m.period > 0.0)) fail(errc::configuration, "synth: oscillation period must be positive");
      }
  }
};

inline const std::vector<std::string>& default_class_names() {
  static const std::vector<std::string> names = {"train_station", "subway",  "park",      "bridge",      "coffee_shop",
                                                 "hall",          "laundromat", "bus_stop", "parking_lot", "gym"};
  return names;
}

inline std::string class_name(const synth_spec& spec, std::size_t c) {
  if (!spec.class_names.empty()) return spec.class_names[c];
  if (spec.classes <= default_class_names().size()) return default_class_names()[c];
  return "type" + std::to_string(c);
}

/// Six classes in three confusable pairs: each pair shares its power spectrum
/// (sign flip or time reversal) so only the waveform shape separates them.
inline std::vector<std::vector<motif_spec>> default_motifs(std::size_t classes, double amplitude = 4.0) {
  const std::vector<motif_spec> base = {
      {motif_family::pulse, 20, amplitude, 6.0, false, false},
      {motif_family::pulse, 20, amplitude, 6.0, true, false},
      {motif_family::ramp, 30, amplitude, 6.0, false, false},
      {motif_family::ramp, 30, amplitude, 6.0, false, true},
      {motif_family::oscillation, 30, amplitude, 6.0, false, false},
      {motif_family::oscillation, 30, amplitude, 6.0, false, true},
  };
  std::vector<std::vector<motif_spec>> out(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    motif_spec m = base[c % base.size()];
    // Beyond six classes, vary the period or length to keep motifs distinct.
    const std::size_t round = c / base.size();
    if (round > 0) {
      if (m.family == motif_family::oscillation) m.period += 2.0 * static_cast<double>(round);
      else m.length = std::min<std::size_t>(40, m.length + 5 * round);
    }
    out[c] = {m};
  }
  return out;
}

/// Default benchmark: six classes, three places and three devices each,
/// ten motif occurrences per 600-sample trace, noise at a tenth of the motif amplitude.
inline synth_spec default_synth_spec(std::uint64_t seed = 0) {
  synth_spec s;
  s.motifs = default_motifs(s.classes);
  s.seed = seed;
  return s;
}

/// Pure noise: no planted events, no place structure and no drift. Every trace
/// is independent Gaussian noise around one shared baseline, seen through its
/// device's gain and offset.
inline synth_spec null_synth_spec(std::uint64_t seed = 0) {
  synth_spec s = default_synth_spec(seed);
  s.motifs.assign(s.classes, {});
  s.place_baseline = {50.0, 50.0};
  s.drift_amplitude = 0.0;
  return s;
}

/// Every place carries its own stable signature and baseline and each class
/// one motif at fixed offsets, without noise or drift: all segments of a
/// trace are the same window.
inline synth_spec separable_synth_spec(std::uint64_t seed = 0) {
  synth_spec s = default_synth_spec(seed);
  for (auto& m : s.motifs) m.resize(1);
  s.jitter = false;
  s.noise_sigma = 0.0;
  s.drift_amplitude = 0.0;
  s.place_signature = 3.0;
  return s;
}

struct planted_motif {
  std::size_t observation_index = 0;
  std::size_t position = 0;
  std::size_t motif_index = 0;  // into the class's motif list
  std::size_t length = 0;
};

struct synth_result {
  dataset data;
  std::vector<planted_motif> planted;
};

namespace detail {

inline std::uint64_t substream(std::uint64_t seed, std::uint64_t kind, std::uint64_t a, std::uint64_t b = 0,
                               std::uint64_t c = 0) {
  std::uint64_t s = derive_seed(seed, kind);
  s = derive_seed(s, a);
  s = derive_seed(s, b);
  return derive_seed(s, c);
}

inline synth_result generate_with_truth(const synth_spec& spec) {
  spec.validate();
  synth_result out;
  std::vector<observation> obs;
  const std::size_t n = spec.trace_length;

  for (std::size_t c = 0; c < spec.classes; ++c) {
    const auto& motifs = spec.motifs[c];
    std::vector<series> shapes;
    for (const auto& m : motifs) shapes.push_back(m.shape());
    std::size_t slot = 0;
    if (!motifs.empty()) {
      if (spec.occurrences == 0) fail(errc::configuration, "synth: zero occurrences with motifs configured");
      slot = n / spec.occurrences;
      for (const auto& m : motifs)
        if (m.length > slot)
          fail(errc::infeasible, "synth: motif of length " + std::to_string(m.length) + " does not fit " +
                                     std::to_string(spec.occurrences) + " occurrences in " + std::to_string(n) +
                                     " samples");
    }
    for (std::size_t p = 0; p < spec.places; ++p) {
      auto place_rng = make_rng(substream(spec.seed, 1, c, p));
      std::uniform_real_distribution<double> base_dist(spec.place_baseline.lo, spec.place_baseline.hi);
      const double baseline = base_dist(place_rng);
      series signature(spec.signature_period, 0.0);
      if (spec.place_signature > 0.0) {
        std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
        for (int h = 1; h <= 3; ++h) {
          const double ph = phase(place_rng);
          for (std::size_t i = 0; i < signature.size(); ++i)
            signature[i] += spec.place_signature / h *
                            std::sin(2.0 * std::numbers::pi * h * static_cast<double>(i) /
                                         static_cast<double>(signature.size()) + ph);
        }
      }
      for (std::size_t d = 0; d < spec.devices; ++d) {
        auto dev_rng = make_rng(substream(spec.seed, 2, d));
        std::uniform_real_distribution<double> gain_dist(spec.device_gain.lo, spec.device_gain.hi);
        std::uniform_real_distribution<double> off_dist(spec.device_offset.lo, spec.device_offset.hi);
        const double gain = gain_dist(dev_rng);
        const double offset = off_dist(dev_rng);

        auto rng = make_rng(substream(spec.seed, 3, c, p, d));
        std::normal_distribution<double> noise(0.0, 1.0);
        const std::size_t index = obs.size();
        series m(n);
        for (std::size_t i = 0; i < n; ++i)
          m[i] = baseline + signature[i % signature.size()] + spec.noise_sigma * noise(rng);
        if (spec.drift_amplitude > 0.0) {
          std::uniform_real_distribution<double> period(spec.drift_period.lo, spec.drift_period.hi);
          std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
          const double amp = spec.drift_amplitude * std::sqrt(2.0 / 3.0);
          for (int j = 0; j < 3; ++j) {
            const double per = period(rng), ph = phase(rng);
            for (std::size_t i = 0; i < n; ++i)
              m[i] += amp * std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / per + ph);
          }
        }
        if (!motifs.empty()) {
          for (std::size_t k = 0; k < spec.occurrences; ++k) {
            const std::size_t which = k % motifs.size();
            const std::size_t len = motifs[which].length;
            std::size_t pos = k * slot;
            if (spec.jitter) {
              std::uniform_int_distribution<std::size_t> jit(0, slot - len);
              pos += jit(rng);
            }
            for (std::size_t i = 0; i < len; ++i) m[pos + i] += shapes[which][i];
            out.planted.push_back({index, pos, which, len});
          }
        }
        double ux = noise(rng), uy = noise(rng), uz = noise(rng);
        const double norm = std::hypot(ux, uy, uz);
        ux /= norm;
        uy /= norm;
        uz /= norm;
        std::vector<sample> samples(n);
        for (std::size_t i = 0; i < n; ++i) {
          const double v = gain * m[i] + offset;
          samples[i] = {static_cast<std::int64_t>(i), v * ux, v * uy, v * uz};
        }
        obs.emplace_back("dev" + std::to_string(d), class_name(spec, c) + "-" + std::to_string(p), class_name(spec, c),
                         0, std::move(samples));
      }
    }
  }
  out.data = dataset(std::move(obs));
  return out;
}

}  // namespace detail

/// K*P*D labelled traces with the class motifs planted at seeded positions.
inline dataset generate(const synth_spec& spec) { return detail::generate_with_truth(spec).data; }

/// Planted motif positions for a dataset produced by generate(spec).
inline std::vector<planted_motif> oracle_labels(const synth_spec& spec, const dataset& d) {
  auto truth = detail::generate_with_truth(spec);
  if (!(truth.data == d)) fail(errc::data, "oracle_labels: dataset was not produced by this synth spec");
  return truth.planted;
}

}  // namespace magloc
