#pragma once

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <initializer_list>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "magloc/error.hpp"
#include "magloc/eval.hpp"
#include "magloc/io/files.hpp"
#include "magloc/pipeline.hpp"
#include "magloc/shapelets.hpp"
#include "magloc/siamese.hpp"
#include "magloc/synthgen.hpp"

namespace magloc {

using json = nlohmann::json;

inline constexpr int format_version = 1;

namespace io::detail {

// Rejects keys outside `allowed` so that a mistyped option cannot be silently ignored.
inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* what) {
  if (!j.is_object()) fail(errc::configuration, std::string(what) + " must be a JSON object");
  for (const auto& [k, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) fail(errc::configuration, std::string("unknown key '") + k + "' in " + what);
  }
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

// JSON has no non-finite numbers; NaN and infinities travel as strings.
inline json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double number_from(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    fail(errc::parse, "expected a number, found '" + s + "'");
  }
  return j.get<double>();
}

}  // namespace io::detail

// ---- configuration ---------------------------------------------------------

inline void to_json(json& j, const descriptor_config& c) {
  j = {{"subwindow", c.subwindow},
       {"domain", c.domain == descriptor_domain::time ? "time" : c.domain == descriptor_domain::frequency ? "frequency" : "both"},
       {"on_flat_spectrum", c.on_flat_spectrum == flat_spectrum_policy::zero ? "zero" : "error"}};
}

inline void from_json(const json& j, descriptor_config& c) {
  io::detail::check_keys(j, {"subwindow", "domain", "on_flat_spectrum"}, "descriptors");
  io::detail::read_opt(j, "subwindow", c.subwindow);
  if (j.contains("domain")) {
    const auto d = j.at("domain").get<std::string>();
    if (d == "time") c.domain = descriptor_domain::time;
    else if (d == "frequency") c.domain = descriptor_domain::frequency;
    else if (d == "both") c.domain = descriptor_domain::both;
    else fail(errc::configuration, "descriptor domain must be time, frequency or both");
  }
  if (j.contains("on_flat_spectrum")) {
    const auto p = j.at("on_flat_spectrum").get<std::string>();
    if (p != "zero" && p != "error") fail(errc::configuration, "on_flat_spectrum must be zero or error");
    c.on_flat_spectrum = p == "zero" ? flat_spectrum_policy::zero : flat_spectrum_policy::error;
  }
}

inline void to_json(json& j, const shapelet_config& c) {
  j = {{"lengths", c.lengths},
       {"stride", c.stride},
       {"presence_threshold", c.presence_threshold},
       {"min_support_count", c.min_support_count ? json(*c.min_support_count) : json(nullptr)},
       {"match_epsilon", c.match_epsilon},
       {"gcc_match_epsilon", c.gcc_match_epsilon},
       {"cluster_cut", c.cluster_cut},
       {"gcc_cluster_cut", c.gcc_cluster_cut},
       {"max_per_class", c.max_per_class},
       {"domain", to_string(c.domain)}};
}

inline void from_json(const json& j, shapelet_config& c) {
  io::detail::check_keys(j,
                         {"lengths", "stride", "presence_threshold", "min_support_count", "match_epsilon",
                          "gcc_match_epsilon", "cluster_cut", "gcc_cluster_cut", "max_per_class", "domain"},
                         "shapelets");
  io::detail::read_opt(j, "lengths", c.lengths);
  io::detail::read_opt(j, "stride", c.stride);
  io::detail::read_opt(j, "presence_threshold", c.presence_threshold);
  if (j.contains("min_support_count")) {
    const auto& v = j.at("min_support_count");
    c.min_support_count = v.is_null() ? std::nullopt : std::optional<std::size_t>(v.get<std::size_t>());
  }
  io::detail::read_opt(j, "match_epsilon", c.match_epsilon);
  io::detail::read_opt(j, "gcc_match_epsilon", c.gcc_match_epsilon);
  io::detail::read_opt(j, "cluster_cut", c.cluster_cut);
  io::detail::read_opt(j, "gcc_cluster_cut", c.gcc_cluster_cut);
  io::detail::read_opt(j, "max_per_class", c.max_per_class);
  if (j.contains("domain")) {
    const auto d = j.at("domain").get<std::string>();
    if (d != "time" && d != "gcc") fail(errc::configuration, "shapelet domain must be time or gcc");
    c.domain = d == "time" ? shapelet_domain::time : shapelet_domain::gcc;
  }
}

inline void to_json(json& j, const forest_config& c) {
  j = {{"trees", c.trees},
       {"max_depth", c.max_depth},
       {"min_leaf", c.min_leaf},
       {"features_per_split", c.features_per_split ? json(*c.features_per_split) : json(nullptr)},
       {"seed", c.seed}};
}

inline void from_json(const json& j, forest_config& c) {
  io::detail::check_keys(j, {"trees", "max_depth", "min_leaf", "features_per_split", "seed"}, "forest");
  io::detail::read_opt(j, "trees", c.trees);
  io::detail::read_opt(j, "max_depth", c.max_depth);
  io::detail::read_opt(j, "min_leaf", c.min_leaf);
  if (j.contains("features_per_split")) {
    const auto& v = j.at("features_per_split");
    c.features_per_split = v.is_null() ? std::nullopt : std::optional<std::size_t>(v.get<std::size_t>());
  }
  io::detail::read_opt(j, "seed", c.seed);
}

inline void to_json(json& j, const gbt_config& c) {
  j = {{"rounds", c.rounds}, {"depth", c.depth}, {"learning_rate", c.learning_rate}, {"min_leaf", c.min_leaf}, {"seed", c.seed}};
}

inline void from_json(const json& j, gbt_config& c) {
  io::detail::check_keys(j, {"rounds", "depth", "learning_rate", "min_leaf", "seed"}, "boosting");
  io::detail::read_opt(j, "rounds", c.rounds);
  io::detail::read_opt(j, "depth", c.depth);
  io::detail::read_opt(j, "learning_rate", c.learning_rate);
  io::detail::read_opt(j, "min_leaf", c.min_leaf);
  io::detail::read_opt(j, "seed", c.seed);
}

inline void to_json(json& j, const network_config& c) {
  j = {{"conv_layers", c.conv_layers},   {"kernel_width", c.kernel_width}, {"embedding_dim", c.embedding_dim},
       {"margin", c.margin},             {"learning_rate", c.learning_rate}, {"epochs", c.epochs},
       {"batch_size", c.batch_size},     {"pairs_per_epoch", c.pairs_per_epoch}, {"k", c.k},
       {"seed", c.seed}};
}

inline void from_json(const json& j, network_config& c) {
  io::detail::check_keys(j,
                         {"conv_layers", "kernel_width", "embedding_dim", "margin", "learning_rate", "epochs",
                          "batch_size", "pairs_per_epoch", "k", "seed"},
                         "network");
  io::detail::read_opt(j, "conv_layers", c.conv_layers);
  io::detail::read_opt(j, "kernel_width", c.kernel_width);
  io::detail::read_opt(j, "embedding_dim", c.embedding_dim);
  io::detail::read_opt(j, "margin", c.margin);
  io::detail::read_opt(j, "learning_rate", c.learning_rate);
  io::detail::read_opt(j, "epochs", c.epochs);
  io::detail::read_opt(j, "batch_size", c.batch_size);
  io::detail::read_opt(j, "pairs_per_epoch", c.pairs_per_epoch);
  io::detail::read_opt(j, "k", c.k);
  io::detail::read_opt(j, "seed", c.seed);
}

inline void to_json(json& j, const pipeline_config& c) {
  j = {{"window", c.window},
       {"descriptors", c.descriptors},
       {"shapelets", c.shapelets},
       {"knn_k", c.knn_k},
       {"forest", c.forest},
       {"boosting", c.boosting},
       {"network", c.network},
       {"dtw_radius", c.dtw_radius ? json(*c.dtw_radius) : json(nullptr)},
       {"histogram_bins", c.histogram_bins},
       {"balance_classes", c.balance_classes}};
}

inline void from_json(const json& j, pipeline_config& c) {
  io::detail::check_keys(j,
                         {"window", "descriptors", "shapelets", "knn_k", "forest", "boosting", "network", "dtw_radius",
                          "histogram_bins", "balance_classes"},
                         "pipeline");
  io::detail::read_opt(j, "window", c.window);
  io::detail::read_opt(j, "descriptors", c.descriptors);
  io::detail::read_opt(j, "shapelets", c.shapelets);
  io::detail::read_opt(j, "knn_k", c.knn_k);
  io::detail::read_opt(j, "forest", c.forest);
  io::detail::read_opt(j, "boosting", c.boosting);
  io::detail::read_opt(j, "network", c.network);
  if (j.contains("dtw_radius")) {
    const auto& v = j.at("dtw_radius");
    c.dtw_radius = v.is_null() ? std::nullopt : std::optional<std::size_t>(v.get<std::size_t>());
  }
  io::detail::read_opt(j, "histogram_bins", c.histogram_bins);
  io::detail::read_opt(j, "balance_classes", c.balance_classes);
}

inline void to_json(json& j, const range& r) { j = json::array({r.lo, r.hi}); }

inline void from_json(const json& j, range& r) {
  if (!j.is_array() || j.size() != 2) fail(errc::configuration, "a range is a two-element array [lo, hi]");
  r.lo = j[0].get<double>();
  r.hi = j[1].get<double>();
}

inline void to_json(json& j, const motif_spec& m) {
  j = {{"family", to_string(m.family)}, {"length", m.length},     {"amplitude", m.amplitude},
       {"period", m.period},            {"inverted", m.inverted}, {"reversed", m.reversed}};
}

inline void from_json(const json& j, motif_spec& m) {
  io::detail::check_keys(j, {"family", "length", "amplitude", "period", "inverted", "reversed"}, "motif");
  if (j.contains("family")) m.family = parse_motif_family(j.at("family").get<std::string>());
  io::detail::read_opt(j, "length", m.length);
  io::detail::read_opt(j, "amplitude", m.amplitude);
  io::detail::read_opt(j, "period", m.period);
  io::detail::read_opt(j, "inverted", m.inverted);
  io::detail::read_opt(j, "reversed", m.reversed);
}

inline void to_json(json& j, const synth_spec& s) {
  j = {{"classes", s.classes},
       {"places", s.places},
       {"devices", s.devices},
       {"trace_length", s.trace_length},
       {"motifs", s.motifs},
       {"occurrences", s.occurrences},
       {"jitter", s.jitter},
       {"noise_sigma", s.noise_sigma},
       {"device_gain", s.device_gain},
       {"device_offset", s.device_offset},
       {"place_baseline", s.place_baseline},
       {"drift_amplitude", s.drift_amplitude},
       {"drift_period", s.drift_period},
       {"place_signature", s.place_signature},
       {"signature_period", s.signature_period},
       {"class_names", s.class_names},
       {"seed", s.seed}};
}

/// Reads a synth spec. `preset` ("default", "null", "separable") supplies
/// starting values; changing `classes` without `motifs` regenerates the defaults.
inline synth_spec synth_spec_from_json(const json& j, std::uint64_t seed) {
  io::detail::check_keys(j,
                         {"preset", "classes", "places", "devices", "trace_length", "motifs", "occurrences", "jitter",
                          "noise_sigma", "device_gain", "device_offset", "place_baseline", "drift_amplitude",
                          "drift_period", "place_signature", "signature_period", "class_names", "seed"},
                         "synth");
  const std::string preset = j.value("preset", std::string("default"));
  synth_spec s;
  if (preset == "default") s = default_synth_spec(seed);
  else if (preset == "null") s = null_synth_spec(seed);
  else if (preset == "separable") s = separable_synth_spec(seed);
  else fail(errc::configuration, "unknown synth preset '" + preset + "'");
  io::detail::read_opt(j, "classes", s.classes);
  io::detail::read_opt(j, "places", s.places);
  io::detail::read_opt(j, "devices", s.devices);
  io::detail::read_opt(j, "trace_length", s.trace_length);
  if (j.contains("motifs")) s.motifs = j.at("motifs").get<std::vector<std::vector<motif_spec>>>();
  else if (s.motifs.size() != s.classes)
    s.motifs = preset == "null" ? std::vector<std::vector<motif_spec>>(s.classes) : default_motifs(s.classes);
  io::detail::read_opt(j, "occurrences", s.occurrences);
  io::detail::read_opt(j, "jitter", s.jitter);
  io::detail::read_opt(j, "noise_sigma", s.noise_sigma);
  io::detail::read_opt(j, "device_gain", s.device_gain);
  io::detail::read_opt(j, "device_offset", s.device_offset);
  io::detail::read_opt(j, "place_baseline", s.place_baseline);
  io::detail::read_opt(j, "drift_amplitude", s.drift_amplitude);
  io::detail::read_opt(j, "drift_period", s.drift_period);
  io::detail::read_opt(j, "place_signature", s.place_signature);
  io::detail::read_opt(j, "signature_period", s.signature_period);
  io::detail::read_opt(j, "class_names", s.class_names);
  io::detail::read_opt(j, "seed", s.seed);
  s.validate();
  return s;
}

// ---- fitted artifacts ------------------------------------------------------

inline void to_json(json& j, const tree_node& n) {
  json value = json::array();
  for (double v : n.value) value.push_back(io::detail::number(v));
  j = {{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left},     {"right", n.right},
       {"value", value},       {"impurity", n.impurity},   {"weight", n.weight}, {"depth", n.depth}};
}

inline void from_json(const json& j, tree_node& n) {
  n.feature = j.at("feature").get<int>();
  n.threshold = j.at("threshold").get<double>();
  n.left = j.at("left").get<int>();
  n.right = j.at("right").get<int>();
  n.value.clear();
  for (const auto& v : j.at("value")) n.value.push_back(io::detail::number_from(v));
  n.impurity = j.at("impurity").get<double>();
  n.weight = j.at("weight").get<double>();
  n.depth = j.at("depth").get<int>();
}

inline void to_json(json& j, const decision_tree& t) { j = t.nodes; }
inline void from_json(const json& j, decision_tree& t) { t.nodes = j.get<std::vector<tree_node>>(); }

inline void to_json(json& j, const labeled_set& s) { j = {{"schema", s.schema}, {"rows", s.rows}, {"labels", s.labels}}; }

inline void from_json(const json& j, labeled_set& s) {
  s.schema = j.at("schema").get<std::vector<std::string>>();
  s.rows = j.at("rows").get<std::vector<std::vector<double>>>();
  s.labels = j.at("labels").get<std::vector<std::string>>();
}

inline void to_json(json& j, const distance_kind& k) {
  j = {{"tag", to_string(k.tag)}, {"dtw_radius", k.dtw_radius ? json(*k.dtw_radius) : json(nullptr)}, {"bins", k.bins}};
}

inline void from_json(const json& j, distance_kind& k) {
  k.tag = parse_distance_tag(j.at("tag").get<std::string>());
  const auto& r = j.at("dtw_radius");
  k.dtw_radius = r.is_null() ? std::nullopt : std::optional<std::size_t>(r.get<std::size_t>());
  k.bins = j.at("bins").get<std::size_t>();
}

inline model_kind parse_model_kind(const std::string& s) {
  for (auto k : {model_kind::knn, model_kind::random_forest, model_kind::gbt, model_kind::full_signal})
    if (s == to_string(k)) return k;
  fail(errc::parse, "unknown model kind '" + s + "'");
}

inline void to_json(json& j, const trained_model& m) {
  j = {{"kind", to_string(m.kind)}, {"class_set", m.class_set}, {"schema", m.schema},
       {"seed", m.seed},            {"forest", m.forest},       {"boosting", m.boosting}};
  switch (m.kind) {
    case model_kind::knn: {
      const auto& st = std::get<knn_state>(m.state);
      j["state"] = {{"k", st.k}, {"train", st.train}};
      break;
    }
    case model_kind::random_forest: {
      const auto& st = std::get<forest_state>(m.state);
      j["state"] = {{"trees", st.trees}, {"oob_accuracy", io::detail::number(st.oob_accuracy)}};
      break;
    }
    case model_kind::gbt: {
      const auto& st = std::get<gbt_state>(m.state);
      j["state"] = {{"initial", st.initial}, {"trees", st.trees}, {"learning_rate", st.learning_rate}};
      break;
    }
    case model_kind::full_signal: {
      const auto& st = std::get<matcher_state>(m.state);
      j["state"] = {{"kind", st.kind}, {"train", st.train}, {"labels", st.labels}};
      break;
    }
  }
}

inline void from_json(const json& j, trained_model& m) {
  m.kind = parse_model_kind(j.at("kind").get<std::string>());
  m.class_set = j.at("class_set").get<std::vector<std::string>>();
  m.schema = j.at("schema").get<std::vector<std::string>>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.forest = j.at("forest").get<forest_config>();
  m.boosting = j.at("boosting").get<gbt_config>();
  const auto& st = j.at("state");
  switch (m.kind) {
    case model_kind::knn: m.state = knn_state{st.at("k").get<std::size_t>(), st.at("train").get<labeled_set>()}; break;
    case model_kind::random_forest:
      m.state = forest_state{st.at("trees").get<std::vector<decision_tree>>(), io::detail::number_from(st.at("oob_accuracy"))};
      break;
    case model_kind::gbt:
      m.state = gbt_state{st.at("initial").get<std::vector<double>>(),
                          st.at("trees").get<std::vector<std::vector<decision_tree>>>(),
                          st.at("learning_rate").get<double>()};
      break;
    case model_kind::full_signal:
      m.state = matcher_state{st.at("kind").get<distance_kind>(), st.at("train").get<std::vector<series>>(),
                              st.at("labels").get<std::vector<std::string>>()};
      break;
  }
}

inline void to_json(json& j, const shapelet& s) {
  j = {{"id", s.id},           {"pattern", s.pattern},       {"length", s.length},
       {"class_label", s.class_label}, {"support", s.support}, {"support_count", s.support_count},
       {"domain", to_string(s.domain)}, {"constant", s.constant}};
}

inline void from_json(const json& j, shapelet& s) {
  s.id = j.at("id").get<std::string>();
  s.pattern = j.at("pattern").get<series>();
  s.length = j.at("length").get<std::size_t>();
  s.class_label = j.at("class_label").get<std::string>();
  s.support = j.at("support").get<double>();
  s.support_count = j.at("support_count").get<std::size_t>();
  s.domain = j.at("domain").get<std::string>() == "gcc" ? shapelet_domain::gcc : shapelet_domain::time;
  s.constant = j.at("constant").get<bool>();
}

inline void to_json(json& j, const shapelet_dictionary& d) {
  json failures = json::array();
  for (const auto& f : d.failures) failures.push_back({{"class_label", f.class_label}, {"reason", f.reason}});
  j = {{"config", d.config}, {"entries", d.entries}, {"failures", failures}};
}

inline void from_json(const json& j, shapelet_dictionary& d) {
  d.config = j.at("config").get<shapelet_config>();
  d.entries = j.at("entries").get<std::vector<shapelet>>();
  d.failures.clear();
  for (const auto& f : j.at("failures"))
    d.failures.push_back({f.at("class_label").get<std::string>(), f.at("reason").get<std::string>()});
}

inline void to_json(json& j, const standardizer& s) {
  j = {{"schema", s.schema}, {"mean", s.mean}, {"stddev", s.stddev}};
}

inline void from_json(const json& j, standardizer& s) {
  s.schema = j.at("schema").get<std::vector<std::string>>();
  s.mean = j.at("mean").get<std::vector<double>>();
  s.stddev = j.at("stddev").get<std::vector<double>>();
}

inline void to_json(json& j, const network& n) {
  json conv = json::array();
  for (const auto& s : n.conv) conv.push_back({{"in_channels", s.in_channels}, {"filters", s.filters}, {"width", s.width}});
  json history = json::array();
  for (double v : n.loss_history) history.push_back(io::detail::number(v));
  j = {{"config", n.config},           {"conv", conv},
       {"dense_out", n.dense_out},     {"params", n.params},
       {"center_inputs", n.center_inputs}, {"input_shift", n.input_shift}, {"input_scale", n.input_scale},
       {"loss_history", history}};
}

inline void from_json(const json& j, network& n) {
  std::vector<std::pair<std::size_t, std::size_t>> layers;
  for (const auto& s : j.at("conv")) layers.emplace_back(s.at("filters").get<std::size_t>(), s.at("width").get<std::size_t>());
  n = make_network(layers, j.at("dense_out").get<std::size_t>());
  n.config = j.at("config").get<network_config>();
  const auto params = j.at("params").get<std::vector<double>>();
  if (params.size() != n.params.size()) fail(errc::parse, "network parameter count does not match its layer shapes");
  n.params = params;
  n.center_inputs = j.at("center_inputs").get<bool>();
  n.input_shift = j.at("input_shift").get<double>();
  n.input_scale = j.at("input_scale").get<double>();
  n.loss_history.clear();
  for (const auto& v : j.at("loss_history")) n.loss_history.push_back(io::detail::number_from(v));
}

inline void to_json(json& j, const pipeline& p) {
  j = {{"method", p.method.text}, {"domain", to_string(p.domain)}, {"config", p.config},
       {"seed", p.seed},          {"class_set", p.class_set},      {"model", p.model}};
  j["dictionary"] = p.dictionary ? json(*p.dictionary) : json(nullptr);
  j["scaler"] = p.scaler ? json(*p.scaler) : json(nullptr);
  j["network"] = p.net ? json(*p.net) : json(nullptr);
}

inline void from_json(const json& j, pipeline& p) {
  p.method = parse_method(j.at("method").get<std::string>());
  p.domain = parse_signal_domain(j.at("domain").get<std::string>());
  p.config = j.at("config").get<pipeline_config>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.class_set = j.at("class_set").get<std::vector<std::string>>();
  p.model = j.at("model").get<trained_model>();
  p.dictionary = j.at("dictionary").is_null() ? std::nullopt : std::optional(j.at("dictionary").get<shapelet_dictionary>());
  p.scaler = j.at("scaler").is_null() ? std::nullopt : std::optional(j.at("scaler").get<standardizer>());
  p.net = j.at("network").is_null() ? std::nullopt : std::optional(j.at("network").get<network>());
}

// ---- reports ---------------------------------------------------------------

inline json confusion_json(const confusion_matrix& m) {
  return {{"class_set", m.class_set}, {"counts", m.counts}, {"normalized", m.normalized()}, {"empty_rows", m.empty_rows()}};
}

inline json report_json(const evaluation_report& r, const json& run_config) {
  json folds = json::array();
  for (const auto& f : r.folds) {
    json segs = json::array(), obs = json::array();
    for (const auto& s : f.segments)
      segs.push_back({{"observation", s.observation}, {"segment", s.segment}, {"truth", s.truth}, {"predicted", s.predicted}});
    for (const auto& o : f.observations)
      obs.push_back({{"observation", o.observation}, {"truth", o.truth}, {"predicted", o.predicted}});
    folds.push_back({{"key", f.key},
                     {"seed", f.seed},
                     {"train_segments", f.train_segments},
                     {"dictionary_size", f.dictionary_size},
                     {"segments", segs},
                     {"observations", obs}});
  }
  return {{"protocol", to_string(r.protocol_used)},
          {"method", r.method.text},
          {"domain", to_string(r.domain)},
          {"seed", r.seed},
          {"class_set", r.class_set},
          {"run_config", run_config},
          {"pipeline", r.config},
          {"balanced_accuracy", r.balanced_accuracy},
          {"segment_balanced_accuracy", r.segment_balanced_accuracy},
          {"observation_confusion", confusion_json(r.observation_confusion)},
          {"segment_confusion", confusion_json(r.segment_confusion)},
          {"folds", folds}};
}

/// Rebuilds a report (predictions and metadata) from its JSON form and
/// recomputes the aggregates from the stored per-fold predictions.
inline evaluation_report report_from_json(const json& j) {
  evaluation_report r;
  r.protocol_used = parse_protocol(j.at("protocol").get<std::string>());
  r.method = parse_method(j.at("method").get<std::string>());
  r.domain = parse_signal_domain(j.at("domain").get<std::string>());
  r.seed = j.at("seed").get<std::uint64_t>();
  r.class_set = j.at("class_set").get<std::vector<std::string>>();
  r.config = j.at("pipeline").get<pipeline_config>();
  for (const auto& f : j.at("folds")) {
    fold_result fr;
    fr.key = f.at("key").get<std::string>();
    fr.seed = f.at("seed").get<std::uint64_t>();
    fr.train_segments = f.at("train_segments").get<std::size_t>();
    fr.dictionary_size = f.at("dictionary_size").get<std::size_t>();
    for (const auto& s : f.at("segments"))
      fr.segments.push_back({s.at("observation").get<std::size_t>(), s.at("segment").get<std::size_t>(),
                             s.at("truth").get<std::string>(), s.at("predicted").get<std::string>()});
    for (const auto& o : f.at("observations"))
      fr.observations.push_back(
          {o.at("observation").get<std::size_t>(), o.at("truth").get<std::string>(), o.at("predicted").get<std::string>()});
    r.folds.push_back(std::move(fr));
  }
  aggregate(r);
  return r;
}

/// Fixed-width text table of the row-normalized confusion matrix.
inline std::string render_confusion(const confusion_matrix& m) {
  std::size_t w = 6;
  for (const auto& c : m.class_set) w = std::max(w, c.size());
  auto pad = [&](const std::string& s) { return s + std::string(w + 2 - std::min(w + 2, s.size()), ' '); };
  std::string out = pad("truth\\pred");
  for (const auto& c : m.class_set) out += pad(c);
  out += "n\n";
  const auto norm = m.normalized();
  char buf[32];
  for (std::size_t i = 0; i < m.class_set.size(); ++i) {
    out += pad(m.class_set[i]);
    for (std::size_t k = 0; k < m.class_set.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.3f", norm[i][k]);
      out += pad(buf);
    }
    out += std::to_string(m.row_total(i)) + "\n";
  }
  return out;
}

// ---- versioned files -------------------------------------------------------

namespace io {

inline std::string dump(const json& j) { return j.dump(1) + "\n"; }

inline json envelope(const char* format, json body) {
  return {{"format", format}, {"version", format_version}, {"body", std::move(body)}};
}

inline json parse_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(errc::parse, "'" + origin + "' is not valid JSON (truncated?): " + e.what());
  }
}

/// Checks the format tag and version and returns the body.
inline json open_envelope(const json& j, const char* format, const std::string& origin) {
  if (!j.is_object() || !j.contains("format") || !j.contains("version") || !j.contains("body"))
    fail(errc::parse, "'" + origin + "' lacks a format header");
  if (j.at("format") != format)
    fail(errc::version, "'" + origin + "' holds '" + j.at("format").dump() + "', expected '" + format + "'");
  if (j.at("version") != format_version)
    fail(errc::version, "'" + origin + "' has format version " + j.at("version").dump() + ", this build reads " +
                            std::to_string(format_version));
  return j.at("body");
}

template <class T>
T load_versioned(const std::filesystem::path& path, const char* format) {
  const auto body = open_envelope(parse_text(read_file(path), path.string()), format, path.string());
  try {
    return body.get<T>();
  } catch (const json::exception& e) {
    fail(errc::parse, "'" + path.string() + "' is malformed: " + e.what());
  }
}

inline void save_model(const std::filesystem::path& p, const trained_model& m) {
  write_file_atomic(p, dump(envelope("magloc-model", m)));
}
inline trained_model load_model(const std::filesystem::path& p) { return load_versioned<trained_model>(p, "magloc-model"); }

inline void save_dictionary(const std::filesystem::path& p, const shapelet_dictionary& d) {
  write_file_atomic(p, dump(envelope("magloc-dictionary", d)));
}
inline shapelet_dictionary load_dictionary(const std::filesystem::path& p) {
  return load_versioned<shapelet_dictionary>(p, "magloc-dictionary");
}

inline void save_network(const std::filesystem::path& p, const network& n) {
  write_file_atomic(p, dump(envelope("magloc-network", n)));
}
inline network load_network(const std::filesystem::path& p) { return load_versioned<network>(p, "magloc-network"); }

inline void save_pipeline(const std::filesystem::path& p, const pipeline& x) {
  write_file_atomic(p, dump(envelope("magloc-pipeline", x)));
}
inline pipeline load_pipeline(const std::filesystem::path& p) { return load_versioned<pipeline>(p, "magloc-pipeline"); }

inline std::string dictionary_text(const shapelet_dictionary& d) { return dump(envelope("magloc-dictionary", d)); }

}  // namespace io

}  // namespace magloc
