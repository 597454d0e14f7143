// Acceptance run: one PASS/FAIL line per criterion, each under its time limit.
// usage: acceptance <path-to-magloc-cli> <work-dir>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>

#include "magloc/eval.hpp"
#include "magloc/io/json.hpp"
#include "magloc/synthgen.hpp"
#include "oracles.hpp"

using namespace magloc;
namespace fs = std::filesystem;

namespace {

struct outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double ba(const dataset& d, protocol p, const std::string& method, std::uint64_t seed) {
  return run_protocol(d, p, parse_method(method), signal_domain::time, {}, seed).balanced_accuracy;
}

outcome dtw_oracle() {
  auto rng = make_rng(1);
  std::uniform_int_distribution<std::size_t> len(1, 8);
  std::size_t mismatches = 0;
  for (int i = 0; i < 200; ++i) {
    const auto a = oracle::random_series(rng, len(rng)), b = oracle::random_series(rng, len(rng));
    if (dtw(a, b) != oracle::dtw_exhaustive(a, b)) ++mismatches;
  }
  return {mismatches == 0, fmt("%zu/200 mismatches", mismatches)};
}

outcome distance_axioms() {
  auto rng = make_rng(2);
  std::size_t bad = 0;
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  for (auto tag : {distance_tag::dtw, distance_tag::euclidean, distance_tag::cosine, distance_tag::bhattacharyya,
                   distance_tag::gcc}) {
    const distance_kind k{tag, std::nullopt, default_histogram_bins};
    const bool exact = tag != distance_tag::dtw && tag != distance_tag::gcc;
    for (int i = 0; i < 500; ++i) {
      const auto a = oracle::random_series(rng, 32, -5, 5), b = oracle::random_series(rng, 32, -5, 5);
      const double ab = distance(k, a, b), ba_ = distance(k, b, a);
      if (exact ? ab != ba_ : std::abs(ab - ba_) > 1e-9) ++bad;
      if (std::abs(distance(k, a, a)) > 1e-9 || ab < -1e-12) ++bad;
      if (tag == distance_tag::dtw) {
        double l1 = 0;
        for (std::size_t t = 0; t < a.size(); ++t) l1 += std::abs(a[t] - b[t]);
        if (ab > l1 + 1e-9) ++bad;
      }
      if (tag == distance_tag::gcc) {
        auto s = b;
        const double c = scale(rng);
        for (auto& v : s) v *= c;
        if (std::abs(distance(k, a, s) - ab) > 1e-9) ++bad;
      }
    }
  }
  return {bad == 0, fmt("%zu violations over 5 kinds x 500 pairs", bad)};
}

outcome spectral() {
  auto rng = make_rng(3);
  std::uniform_int_distribution<std::size_t> len(2, 300);
  double worst_dft = 0, worst_parseval = 0, worst_round = 0;
  for (int i = 0; i < 100; ++i) {
    const auto x = oracle::random_series(rng, len(rng), -3, 3);
    const auto s = dft(x);
    const auto ref = oracle::naive_dft(x);
    double norm = 0, err = 0, energy_t = 0, energy_f = 0;
    for (std::size_t k = 0; k < ref.size(); ++k) {
      norm = std::max(norm, std::abs(ref[k]));
      err = std::max(err, std::abs(ref[k] - s.bins[k]));
      energy_f += std::norm(s.bins[k]);
    }
    for (double v : x) energy_t += v * v;
    worst_dft = std::max(worst_dft, err / std::max(1.0, norm));
    worst_parseval = std::max(worst_parseval, std::abs(energy_f / static_cast<double>(x.size()) - energy_t) / energy_t);
    const auto back = inverse(s);
    for (std::size_t t = 0; t < x.size(); ++t) worst_round = std::max(worst_round, std::abs(back[t] - x[t]));
  }
  return {worst_dft <= 1e-9 && worst_parseval <= 1e-9 && worst_round <= 1e-9,
          fmt("dft %.2e  parseval %.2e  round trip %.2e", worst_dft, worst_parseval, worst_round)};
}

outcome gradient() {
  auto rng = make_rng(4);
  double worst = 0;
  for (std::size_t layers : {2u, 3u, 4u}) {
    network_config cfg;
    cfg.conv_layers = layers;
    cfg.margin = 10.0;
    auto net = init_network(cfg, 10 + layers);
    std::vector<series> xs;
    for (int i = 0; i < 4; ++i) xs.push_back(oracle::random_series(rng, 60, 40, 60));
    net.center_inputs = true;
    net.input_scale = 10.0;
    for (int step = 0; step <= 10; step += 10) {
      if (step == 10) {
        const std::vector<training_pair> batch = {{0, 1, true}, {2, 3, false}, {0, 2, false}, {1, 3, true}};
        for (int s = 0; s < 10; ++s) descend(net, xs, batch, 1e-2);
      }
      worst = std::max(worst, gradient_check(net, xs[0], xs[1], true, 300, layers));
      worst = std::max(worst, gradient_check(net, xs[2], xs[3], false, 300, layers));
    }
  }
  return {worst <= 1e-4, fmt("max relative error %.2e", worst)};
}

// Offset of the best z-normalized match of `pattern` in x.
std::size_t best_offset(const series& x, const series& pattern) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t o = 0; o + pattern.size() <= x.size(); ++o) {
    const double d = oracle::sliding_min(std::span<const double>(x).subspan(o, pattern.size()), pattern);
    if (d < best_d) best_d = d, best = o;
  }
  return best;
}

outcome shapelet_recovery() {
  const auto spec = default_synth_spec(1);
  const auto truth = detail::generate_with_truth(spec);
  const auto& d = truth.data;
  std::vector<training_unit> units;
  for (const auto& o : d.observations()) units.push_back({o.location_type(), o.location_id(), o.device_id(), {o.values()}});
  const auto dict = extract_dictionary(units, {});

  std::size_t recovered = 0;
  std::string per_class;
  for (const auto& label : d.class_set()) {
    std::size_t c = 0;  // generation order, not class-set order
    while (class_name(spec, c) != label) ++c;
    double best_r = -1;
    for (const auto& s : dict.entries) {
      if (s.class_label != label) continue;
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i].location_type() != label) continue;
        const auto o = best_offset(d[i].values(), s.pattern);
        for (const auto& p : truth.planted) {
          if (p.observation_index != i || p.position > o + s.length - 1 || o > p.position + p.length - 1) continue;
          const auto shape = spec.motifs[c][p.motif_index].shape();
          series tmpl(s.length, 0.0);
          for (std::size_t k = 0; k < s.length; ++k) {
            const auto at = static_cast<std::ptrdiff_t>(o + k) - static_cast<std::ptrdiff_t>(p.position);
            if (at >= 0 && at < static_cast<std::ptrdiff_t>(p.length)) tmpl[k] = shape[static_cast<std::size_t>(at)];
          }
          best_r = std::max(best_r, oracle::pearson(s.pattern, tmpl));
        }
      }
    }
    recovered += best_r >= 0.9;
    per_class += fmt(" %s=%.2f", label.c_str(), best_r);
  }
  return {recovered == d.class_set().size(),
          fmt("%zu/%zu classes, %zu shapelets;%s", recovered, d.class_set().size(), dict.entries.size(), per_class.c_str())};
}

outcome protocol_structure() {
  const auto d = generate(default_synth_spec(1));
  const auto lpo = folds_leave_place_out(d), ldo = folds_leave_device_out(d);
  const auto all = folds_all_places(d, 1);
  bool splits = all.size() == 30;
  for (const auto& f : all) {
    std::map<std::size_t, std::size_t> tr, te;
    for (const auto& r : f.train) ++tr[r.observation];
    for (const auto& r : f.test) ++te[r.observation];
    for (std::size_t i = 0; i < d.size(); ++i) splits = splits && tr[i] == 7 && te[i] == 3;
  }
  std::size_t leaks = 0;
  auto guard = [&](const std::vector<fold>& fs_, protocol p) {
    for (const auto& f : fs_) try {
        check_no_leakage(d, f, p);
      } catch (const error&) {
        ++leaks;
      }
  };
  guard(lpo, protocol::leave_place_out);
  guard(ldo, protocol::leave_device_out);
  guard(all, protocol::all_places);
  bool caught = false;
  auto bad = lpo[0];
  bad.train.push_back(bad.test[0]);
  try {
    check_no_leakage(d, bad, protocol::leave_place_out);
  } catch (const error& e) {
    caught = e.code() == errc::leakage;
  }
  const bool ok = lpo.size() == 18 && ldo.size() == 3 && splits && leaks == 0 && caught;
  return {ok, fmt("lpo %zu folds, ldo %zu, all-places %zu (7/3 %s), guard flags %zu clean folds, injected leak %s",
                  lpo.size(), ldo.size(), all.size(), splits ? "ok" : "broken", leaks, caught ? "caught" : "missed")};
}

outcome separability() {
  const auto d = generate(separable_synth_spec(1));
  bool ok = true;
  std::string detail;
  for (const char* m : {"match-dtw", "match-euclid", "match-cosine", "match-bhatt", "stats:rf", "shapelet:rf",
                        "combined:rf", "siamese-c3"}) {
    const double v = ba(d, protocol::all_places, m, 1);
    ok = ok && v == 1.0;
    detail += fmt("%s=%.3f ", m, v);
  }
  return {ok, detail};
}

outcome ordering() {
  const std::vector<std::string> methods = {"shapelet:rf", "combined:rf", "match-dtw", "match-euclid", "match-cosine",
                                            "match-bhatt", "stats:rf",   "stats:knn", "stats:gbt"};
  std::map<std::string, double> mean;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto d = generate(default_synth_spec(seed));
    for (const auto& m : methods) mean[m] += ba(d, protocol::leave_place_out, m, seed) / 5.0;
  }
  const double shp = mean["shapelet:rf"];
  double rival = 0, stats_best = 0;
  for (const auto& m : methods)
    if (m != "shapelet:rf" && m != "combined:rf") rival = std::max(rival, mean[m]);
  for (const char* m : {"stats:rf", "stats:knn", "stats:gbt"}) stats_best = std::max(stats_best, mean[m]);
  const double chance = 1.0 / 6.0;
  const bool ok = shp >= 0.80 && shp - rival >= 0.05 && shp >= chance + 0.05 &&
                  mean["combined:rf"] >= std::max(stats_best, shp) - 0.02;
  std::string detail;
  for (const auto& m : methods) detail += fmt("%s=%.3f ", m.c_str(), mean[m]);
  return {ok, detail + fmt("| margin over best rival %.3f", shp - rival)};
}

outcome device_robustness() {
  double lpo = 0, ldo = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto d = generate(default_synth_spec(seed));
    lpo += ba(d, protocol::leave_place_out, "shapelet:rf", seed) / 3.0;
    ldo += ba(d, protocol::leave_device_out, "shapelet:rf", seed) / 3.0;
  }
  return {std::abs(lpo - ldo) <= 0.10, fmt("shapelet:rf lpo %.3f ldo %.3f", lpo, ldo)};
}

outcome null_calibration() {
  const auto d = generate(null_synth_spec(1));
  const auto b = oracle::chance_band(6, 9);
  bool ok = true;
  std::string detail = fmt("band [%.3f, %.3f]: ", b.lo, b.hi);
  for (const char* m : {"match-dtw", "match-euclid", "match-cosine", "match-bhatt", "stats:knn", "stats:rf", "stats:gbt",
                        "shapelet:knn", "shapelet:rf", "shapelet:gbt", "combined:knn", "combined:rf", "combined:gbt",
                        "siamese-c2", "siamese-c3", "siamese-c4"}) {
    const double v = ba(d, protocol::leave_place_out, m, 1);
    const bool in = v >= b.lo && v <= b.hi;
    ok = ok && in;
    detail += fmt("%s=%.3f%s ", m, v, in ? "" : "(out)");
  }
  return {ok, detail};
}

outcome learners() {
  const auto xor_set = oracle::xor_fixture(200, 0.2, 1);
  forest_config fc;
  fc.seed = 1;
  const double oob = fit_forest(xor_set, fc).oob_accuracy;

  const auto blobs = oracle::blob_fixture(50, 1);
  gbt_config gc;
  gc.rounds = 50;
  const auto g = train_gbt(blobs, gc);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < blobs.size(); ++i)
    correct += predict(g, make_feature_vector(blobs.rows[i], blobs.schema, feature_source::statistical)).label ==
               blobs.labels[i];
  const double gbt_acc = static_cast<double>(correct) / static_cast<double>(blobs.size());

  auto rng = make_rng(11);
  std::uniform_real_distribution<double> u(-2.0, 6.0);
  std::size_t disagree = 0;
  for (int q = 0; q < 1000; ++q) {
    const std::vector<double> x = {u(rng), u(rng)};
    if (knn_classify(blobs, x, 5).label != oracle::knn_exhaustive(blobs, x, 5)) ++disagree;
  }
  return {oob >= 0.9 && gbt_acc >= 0.95 && disagree == 0,
          fmt("rf oob %.3f, gbt train %.3f, knn oracle disagreements %zu/1000", oob, gbt_acc, disagree)};
}

outcome persistence(const fs::path& work) {
  const auto d = generate(default_synth_spec(1));
  bool same = true;
  std::string detail;
  for (const char* m : {"shapelet:rf", "combined:gbt", "stats:knn", "match-dtw", "siamese-c2"}) {
    const auto p = fit_on_dataset(d, parse_method(m), signal_domain::time, {}, 1);
    const auto path = work / "pipeline.json";
    io::save_pipeline(path, p);
    const auto back = io::load_pipeline(path);
    const auto model_path = work / "model.json";
    io::save_model(model_path, p.model);
    const auto model_back = io::load_model(model_path);
    bool ok = true;
    const auto segs = segment_dataset(d, p.config.window);
    for (std::size_t i = 0; i < segs.size(); i += 7) {
      const auto a = predict_segment(p, segs[i].values);
      ok = ok && a.probabilities == predict_segment(back, segs[i].values).probabilities;
      auto copy = p;
      copy.model = model_back;
      ok = ok && a.probabilities == predict_segment(copy, segs[i].values).probabilities;
    }
    same = same && ok;
    detail += fmt("%s %s ", m, ok ? "identical" : "DIFFERS");
  }
  const auto p = fit_on_dataset(d, parse_method("shapelet:rf"), signal_domain::time, {}, 1);
  const auto dict_path = work / "dictionary.json";
  io::save_dictionary(dict_path, *p.dictionary);
  const auto dict_back = io::load_dictionary(dict_path);
  bool dict_same = true;
  for (std::size_t i = 0; i < d.size(); i += 5)
    dict_same = dict_same && shapelet_transform(d[i].values(), dict_back).values ==
                                 shapelet_transform(d[i].values(), *p.dictionary).values;
  const auto bytes = fs::file_size(dict_path);
  return {same && dict_same && bytes <= 50 * 1024,
          detail + fmt("| dictionary %s, %zu shapelets, %ju bytes", dict_same ? "identical" : "DIFFERS",
                       p.dictionary->entries.size(), static_cast<std::uintmax_t>(bytes))};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

outcome determinism(const std::string& cli, const fs::path& work) {
  bool ok = true;
  std::string detail;
  const std::vector<std::string> runs = {"--method shapelet:rf --protocol lpo --seed 7",
                                         "--method siamese-c3 --protocol ldo --seed 3",
                                         "--method stats:gbt --protocol all --domain frequency --seed 2"};
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto out = work / ("run" + std::to_string(i));
    std::string first;
    bool run_ok = true;
    for (int rep = 0; rep < 2; ++rep) {
      const auto cmd = "\"" + cli + "\" evaluate " + runs[i] + " --out \"" + out.string() + "\" > /dev/null";
      run_ok = run_ok && std::system(cmd.c_str()) == 0;
      const auto text = slurp(out / "report.json");
      if (rep == 0) first = text;
      else run_ok = run_ok && !text.empty() && text == first;
    }
    ok = ok && run_ok;
    detail += fmt("[%s] %s  ", runs[i].c_str(), run_ok ? "identical" : "DIFFERS");
  }
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: acceptance <magloc-cli> <work-dir>\n");
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path work = argv[2];
  fs::create_directories(work);

  struct criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<outcome()> run;
  };
  const std::vector<criterion> criteria = {
      {1, "dtw oracle equivalence", 10, dtw_oracle},
      {2, "distance axioms", 30, distance_axioms},
      {3, "spectral correctness", 10, spectral},
      {4, "siamese gradient check", 120, gradient},
      {5, "shapelet recovery", 120, shapelet_recovery},
      {6, "protocol structure", 30, protocol_structure},
      {7, "all-places separability", 300, separability},
      {8, "qualitative ordering (lpo, 5 seeds)", 900, ordering},
      {9, "leave-a-device-out robustness", 600, device_robustness},
      {10, "null-data calibration", 600, null_calibration},
      {11, "classifier sanity", 120, learners},
      {12, "persistence", 30, [&] { return persistence(work); }},
      {13, "determinism", 300, [&] { return determinism(cli, work); }},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.limit_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("criterion %2d %s: %s  %s (%.1f s of %.0f s%s)\n", c.id, c.name, pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs, c.limit_s, in_time ? "" : ", over limit");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
