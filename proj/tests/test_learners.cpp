#include <cmath>

#include <gtest/gtest.h>

#include "magloc/learners/forest.hpp"
#include "magloc/learners/gbt.hpp"
#include "magloc/learners/knn.hpp"
#include "magloc/learners/matcher.hpp"
#include "magloc/learners/model.hpp"
#include "oracles.hpp"

using namespace magloc;

namespace {

labeled_set line_fixture() {
  labeled_set s;
  s.schema = {"x"};
  const double xs[] = {0, 1, 2, 10, 11, 12};
  for (int i = 0; i < 6; ++i) {
    s.rows.push_back({xs[i]});
    s.labels.push_back(i < 3 ? "low" : "high");
  }
  return s;
}

feature_vector as_fv(const std::vector<double>& v, const std::vector<std::string>& schema) {
  return make_feature_vector(v, schema, feature_source::statistical);
}

double sum_probs(const prediction& p) {
  double s = 0;
  for (const auto& [_, v] : p.probabilities) s += v;
  return s;
}

}  // namespace

TEST(Knn, Examples) {
  const auto s = line_fixture();
  EXPECT_EQ(knn_classify(s, std::vector<double>{1.4}, 3).label, "low");
  EXPECT_EQ(knn_classify(s, std::vector<double>{9.0}, 3).label, "high");
  const auto p = knn_classify(s, std::vector<double>{0.0}, 1);
  EXPECT_EQ(*p.distance, 0.0);
  EXPECT_DOUBLE_EQ(p.probabilities.at("low"), 1.0);
  EXPECT_THROW(knn_classify(s, std::vector<double>{0.0}, 7), error);
  EXPECT_THROW(knn_classify(s, std::vector<double>{0.0, 1.0}, 1), error);
}

TEST(Knn, TieGoesToSmallerSummedDistance) {
  labeled_set s;
  s.schema = {"x"};
  s.rows = {{-1.0}, {-3.0}, {2.0}, {2.5}};
  s.labels = {"b", "b", "a", "a"};
  // votes 2-2; b sums 1+3 = 4, a sums 2+2.5 = 4.5
  EXPECT_EQ(knn_classify(s, std::vector<double>{0.0}, 4).label, "b");
  s.rows = {{-1.0}, {1.0}};
  s.labels = {"b", "a"};
  EXPECT_EQ(knn_classify(s, std::vector<double>{0.0}, 2).label, "a");
}

TEST(Knn, MatchesExhaustiveOracle) {
  const auto train = oracle::blob_fixture(30, 3);
  auto rng = make_rng(11);
  std::uniform_real_distribution<double> u(-2.0, 6.0);
  for (int q = 0; q < 300; ++q) {
    const std::vector<double> x = {u(rng), u(rng)};
    for (std::size_t k : {1u, 4u, 7u}) EXPECT_EQ(knn_classify(train, x, k).label, oracle::knn_exhaustive(train, x, k));
  }
}

TEST(Knn, UniformScaleInvariant) {
  auto train = oracle::blob_fixture(20, 5);
  auto scaled = train;
  for (auto& r : scaled.rows)
    for (auto& v : r) v *= 7.5;
  auto rng = make_rng(12);
  std::uniform_real_distribution<double> u(-2.0, 6.0);
  for (int q = 0; q < 100; ++q) {
    const double a = u(rng), b = u(rng);
    EXPECT_EQ(knn_classify(train, std::vector<double>{a, b}, 5).label,
              knn_classify(scaled, std::vector<double>{7.5 * a, 7.5 * b}, 5).label);
  }
}

TEST(Tree, Gini) {
  EXPECT_DOUBLE_EQ(gini_impurity(std::vector<double>{3, 1}), 0.375);
  EXPECT_DOUBLE_EQ(gini_impurity(std::vector<double>{4, 0}), 0.0);
  EXPECT_DOUBLE_EQ(gini_impurity(std::vector<double>{1, 1, 1, 1}), 0.75);
}

TEST(Forest, SingleClassPredictsIt) {
  labeled_set s;
  s.schema = {"x", "y"};
  for (int i = 0; i < 10; ++i) {
    s.rows.push_back({static_cast<double>(i), 1.0});
    s.labels.push_back("only");
  }
  const auto m = train_random_forest(s, {});
  const auto p = predict(m, as_fv({3.3, 0.0}, s.schema));
  EXPECT_EQ(p.label, "only");
  EXPECT_DOUBLE_EQ(p.probabilities.at("only"), 1.0);
}

TEST(Forest, XorOutOfBag) {
  const auto s = oracle::xor_fixture(200, 0.2, 1);
  forest_config cfg;
  cfg.seed = 3;
  const auto f = fit_forest(s, cfg);
  EXPECT_GE(f.oob_accuracy, 0.9);
  EXPECT_EQ(f.trees.size(), cfg.trees);
  for (const auto& t : f.trees) EXPECT_LE(t.depth(), static_cast<int>(cfg.max_depth));
}

TEST(Forest, Deterministic) {
  const auto s = oracle::xor_fixture(80, 0.1, 2);
  forest_config cfg;
  cfg.trees = 20;
  cfg.seed = 9;
  const auto a = train_random_forest(s, cfg), b = train_random_forest(s, cfg);
  for (const auto& r : s.rows) {
    const auto pa = predict(a, as_fv(r, s.schema)), pb = predict(b, as_fv(r, s.schema));
    EXPECT_EQ(pa.probabilities, pb.probabilities);
  }
}

TEST(Forest, MonotoneFeatureTransformInvariant) {
  const auto s = oracle::xor_fixture(100, 0.2, 4);
  auto t = s;
  for (auto& r : t.rows)
    for (auto& v : r) v = std::exp(3.0 * v);
  forest_config cfg;
  cfg.trees = 30;
  const auto a = train_random_forest(s, cfg), b = train_random_forest(t, cfg);
  for (std::size_t i = 0; i < s.size(); ++i)
    EXPECT_EQ(predict(a, as_fv(s.rows[i], s.schema)).label, predict(b, as_fv(t.rows[i], t.schema)).label);
}

TEST(Gbt, InitialMarginsAreLogOdds) {
  const auto s = line_fixture();
  const auto g = fit_gbt(s, {});
  ASSERT_EQ(g.initial.size(), 2u);
  EXPECT_DOUBLE_EQ(g.initial[0], 0.0);
  EXPECT_DOUBLE_EQ(g.initial[1], 0.0);
}

TEST(Gbt, ZeroRoundsGivePriors) {
  labeled_set s;
  s.schema = {"x"};
  for (int i = 0; i < 8; ++i) {
    s.rows.push_back({static_cast<double>(i)});
    s.labels.push_back(i < 2 ? "a" : (i < 5 ? "b" : "c"));
  }
  gbt_config cfg;
  cfg.rounds = 0;
  const auto m = train_gbt(s, cfg);
  const auto p = predict(m, as_fv({100.0}, s.schema));
  EXPECT_NEAR(p.probabilities.at("a"), 2.0 / 8, 1e-12);
  EXPECT_NEAR(p.probabilities.at("b"), 3.0 / 8, 1e-12);
  EXPECT_NEAR(p.probabilities.at("c"), 3.0 / 8, 1e-12);
}

TEST(Gbt, FitsBlobs) {
  const auto s = oracle::blob_fixture(40, 6);
  gbt_config cfg;
  cfg.rounds = 50;
  const auto m = train_gbt(s, cfg);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto p = predict(m, as_fv(s.rows[i], s.schema));
    correct += p.label == s.labels[i];
    EXPECT_NEAR(sum_probs(p), 1.0, 1e-12);
  }
  EXPECT_GE(static_cast<double>(correct) / static_cast<double>(s.size()), 0.95);
}

TEST(Model, ProbabilitiesSumToOne) {
  const auto s = oracle::blob_fixture(15, 8);
  forest_config fc;
  fc.trees = 15;
  const std::vector<trained_model> models = {train_knn(s, 5), train_random_forest(s, fc), train_gbt(s, {})};
  auto rng = make_rng(13);
  std::uniform_real_distribution<double> u(-3.0, 7.0);
  for (const auto& m : models)
    for (int q = 0; q < 50; ++q) {
      const auto p = predict(m, as_fv({u(rng), u(rng)}, s.schema));
      EXPECT_NEAR(sum_probs(p), 1.0, 1e-12);
      EXPECT_EQ(p.probabilities.size(), 3u);
    }
}

TEST(Model, SchemaMismatchRejected) {
  const auto s = oracle::blob_fixture(5, 1);
  const auto m = train_knn(s, 3);
  try {
    predict(m, as_fv({0.0, 0.0}, {"x", "z"}));
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::schema_mismatch);
  }
}

TEST(Matcher, Examples) {
  const std::vector<series> train = {{0, 0, 0, 0}, {5, 5, 5, 5}, {0, 1, 0, 1}};
  const std::vector<std::string> labels = {"flat", "high", "wave"};
  const distance_kind euc{distance_tag::euclidean, std::nullopt, 16};
  const auto r = full_signal_classify(train, labels, std::vector<double>{4, 5, 6, 5}, euc);
  EXPECT_EQ(r.label, "high");
  EXPECT_EQ(r.index, 1u);
  EXPECT_NEAR(r.distance, std::sqrt(2.0), 1e-12);
  // common prefix of length 2
  EXPECT_EQ(full_signal_classify(train, labels, std::vector<double>{0, 1}, euc).label, "wave");
  // equidistant training series: earlier wins
  EXPECT_EQ(full_signal_classify({{1, 1}, {-1, -1}}, {"p", "n"}, std::vector<double>{0, 0}, euc).label, "p");

  const distance_kind dtw{distance_tag::dtw, std::nullopt, 16};
  EXPECT_EQ(full_signal_classify(train, labels, std::vector<double>{0, 0, 1, 0, 1, 1}, dtw).label, "wave");

  const auto m = train_matcher(train, labels, euc);
  EXPECT_EQ(m.class_set, (std::vector<std::string>{"flat", "high", "wave"}));
  feature_vector raw;
  raw.values = {5, 5, 5, 5};
  const auto p = predict(m, raw);
  EXPECT_EQ(p.label, "high");
  EXPECT_EQ(*p.distance, 0.0);
}
