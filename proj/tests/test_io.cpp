#include <filesystem>

#include <gtest/gtest.h>

#include "magloc/eval.hpp"
#include "magloc/io/csv.hpp"
#include "magloc/io/files.hpp"
#include "magloc/io/json.hpp"
#include "magloc/synthgen.hpp"
#include "oracles.hpp"

using namespace magloc;
namespace fs = std::filesystem;

namespace {

synth_spec small_spec(std::uint64_t seed) {
  auto s = default_synth_spec(seed);
  s.classes = 3;
  s.motifs = default_motifs(3);
  s.trace_length = 300;
  s.occurrences = 5;
  return s;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::path(testing::TempDir()) / "magloc_io";
  fs::create_directories(dir);
  return dir / name;
}

errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return errc::data;
}

std::vector<std::map<std::string, double>> probability_map(const pipeline& p, const dataset& d) {
  std::vector<std::map<std::string, double>> out;
  for (const auto& s : segment_dataset(d, p.config.window)) out.push_back(predict_segment(p, s.values).probabilities);
  return out;
}

}  // namespace

TEST(Csv, RoundTrip) {
  const auto d = generate(small_spec(1));
  const auto text = io::emit_csv(d);
  const auto back = io::ingest_csv_text(text);
  EXPECT_TRUE(back.warnings.empty());
  EXPECT_TRUE(back.data == d);
  EXPECT_EQ(io::emit_csv(back.data), text);
}

TEST(Csv, MalformedFieldNamesLine) {
  std::string text = std::string(io::csv_header) + "\n0,d,l,t,1,2,3\n1,d,l,t,oops,2,3\n";
  try {
    io::ingest_csv_text(text);
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::parse);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("bx"), std::string::npos);
  }
  EXPECT_EQ(code_of([] { io::ingest_csv_text("time,x\n"); }), errc::parse);
  EXPECT_EQ(code_of([&] { io::ingest_csv_text(std::string(io::csv_header) + "\n0,d,l,t,1,2\n"); }), errc::parse);
}

TEST(Csv, SingleTraceAndGaps) {
  std::string text(io::csv_header);
  text += "\n";
  for (int t = 0; t < 600; ++t) text += std::to_string(100 + t) + ",dev,loc,office,1,2,2\n";
  const auto one = io::ingest_csv_text(text);
  ASSERT_EQ(one.data.size(), 1u);
  EXPECT_EQ(one.data[0].size(), 600u);
  EXPECT_EQ(one.data[0].start_time(), 100);
  EXPECT_DOUBLE_EQ(one.data[0].values()[0], 3.0);

  std::string gapped(io::csv_header);
  gapped += "\n";
  for (int t = 0; t < 130; ++t)
    if (t != 70) gapped += std::to_string(t) + ",dev,loc,office,1,2,2\n";
  const auto split = io::ingest_csv_text(gapped);
  ASSERT_EQ(split.data.size(), 1u);  // the 59-sample tail is dropped
  EXPECT_EQ(split.data[0].size(), 70u);
  EXPECT_EQ(split.warnings.size(), 2u);
}

TEST(Csv, DuplicateTimestampRejected) {
  std::string text(io::csv_header);
  text += "\n";
  for (int t = 0; t < 60; ++t) text += std::to_string(t) + ",dev,loc,office,1,2,2\n";
  text += "5,dev,loc,office,1,2,2\n";
  EXPECT_EQ(code_of([&] { io::ingest_csv_text(text); }), errc::data);
}

TEST(Json, ConfigUnknownKeyRejected) {
  json j = pipeline_config{};
  EXPECT_NO_THROW(j.get<pipeline_config>());
  j["windw"] = 60;
  EXPECT_EQ(code_of([&] { (void)j.get<pipeline_config>(); }), errc::configuration);
  json s = shapelet_config{};
  s["lenghts"] = {1};
  EXPECT_EQ(code_of([&] { (void)s.get<shapelet_config>(); }), errc::configuration);
}

TEST(Json, NonFiniteNumbersSurvive) {
  forest_state f;
  f.oob_accuracy = std::nan("");
  trained_model m;
  m.kind = model_kind::random_forest;
  m.state = f;
  const auto back = json(m).get<trained_model>();
  EXPECT_TRUE(std::isnan(std::get<forest_state>(back.state).oob_accuracy));
  EXPECT_TRUE(std::isinf(io::detail::number_from(io::detail::number(-std::numeric_limits<double>::infinity()))));
}

TEST(Files, VersionAndTruncation) {
  const auto s = oracle::blob_fixture(10, 1);
  const auto m = train_knn(s, 3);
  const auto path = scratch("model.json");
  io::save_model(path, m);
  const auto text = io::read_file(path);

  auto j = json::parse(text);
  j["version"] = 99;
  io::write_file_atomic(path, io::dump(j));
  EXPECT_EQ(code_of([&] { io::load_model(path); }), errc::version);

  j["version"] = format_version;
  j["format"] = "magloc-network";
  io::write_file_atomic(path, io::dump(j));
  EXPECT_EQ(code_of([&] { io::load_model(path); }), errc::version);

  io::write_file_atomic(path, text.substr(0, text.size() / 2));
  EXPECT_EQ(code_of([&] { io::load_model(path); }), errc::parse);

  EXPECT_EQ(code_of([&] { io::load_model(scratch("missing.json")); }), errc::data);
}

TEST(Files, ModelRoundTripBitIdentical) {
  const auto s = oracle::blob_fixture(20, 2);
  forest_config fc;
  fc.trees = 10;
  const std::vector<trained_model> models = {train_knn(s, 5), train_random_forest(s, fc), train_gbt(s, {}),
                                             train_matcher({{1, 2, 3}, {4, 5, 6}}, {"x", "y"},
                                                           {distance_tag::dtw, 2, 16})};
  auto rng = make_rng(3);
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto path = scratch("m" + std::to_string(i) + ".json");
    io::save_model(path, models[i]);
    const auto back = io::load_model(path);
    for (int q = 0; q < 20; ++q) {
      feature_vector fv;
      fv.values = oracle::random_series(rng, i == 3 ? 3 : 2, -1, 5);
      if (i != 3) fv.schema = s.schema;
      EXPECT_EQ(predict(models[i], fv).probabilities, predict(back, fv).probabilities);
    }
  }
}

TEST(Files, PipelineRoundTripBitIdentical) {
  const auto d = generate(small_spec(4));
  for (const char* method : {"shapelet:rf", "combined:gbt", "stats:knn", "match-bhatt", "siamese-c2"}) {
    auto cfg = pipeline_config{};
    cfg.network.epochs = 2;
    const auto p = fit_on_dataset(d, parse_method(method), signal_domain::time, cfg, 5);
    const auto path = scratch("pipeline.json");
    io::save_pipeline(path, p);
    const auto back = io::load_pipeline(path);
    EXPECT_EQ(probability_map(p, d), probability_map(back, d)) << method;
    io::save_pipeline(path, back);
    EXPECT_EQ(io::read_file(path), io::dump(io::envelope("magloc-pipeline", p))) << method;
  }
}

TEST(Files, DictionaryRoundTrip) {
  const auto d = generate(small_spec(6));
  const auto p = fit_on_dataset(d, parse_method("shapelet:rf"), signal_domain::time, {}, 1);
  ASSERT_TRUE(p.dictionary);
  const auto path = scratch("dictionary.json");
  io::save_dictionary(path, *p.dictionary);
  const auto back = io::load_dictionary(path);
  ASSERT_EQ(back.entries.size(), p.dictionary->entries.size());
  const auto x = d[0].values();
  EXPECT_EQ(shapelet_transform(x, back).values, shapelet_transform(x, *p.dictionary).values);
  EXPECT_EQ(io::dictionary_text(back), io::dictionary_text(*p.dictionary));
}

TEST(Report, JsonReaggregates) {
  const auto d = generate(small_spec(7));
  const auto r = run_protocol(d, protocol::leave_device_out, parse_method("match-cosine"), signal_domain::time, {}, 2);
  const auto j = report_json(r, json::object());
  const auto back = report_from_json(json::parse(io::dump(j)));
  EXPECT_EQ(back.balanced_accuracy, r.balanced_accuracy);
  EXPECT_EQ(back.observation_confusion.counts, r.observation_confusion.counts);
  EXPECT_EQ(render_confusion(back.observation_confusion), render_confusion(r.observation_confusion));
}
