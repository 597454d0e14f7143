#include <algorithm>
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "magloc/features.hpp"
#include "magloc/rng.hpp"
#include "oracles.hpp"

using namespace magloc;

namespace {

// The eight descriptors of one window recomputed from a naive DFT.
std::vector<double> reference_window(const series& x) {
  const std::size_t n = x.size();
  series sorted = x;
  std::sort(sorted.begin(), sorted.end());
  const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  double energy = 0;
  for (double v : x) energy += v * v;
  const auto X = oracle::naive_dft(x);
  const std::size_t top = n / 2;
  std::vector<double> p(top + 1), f(top + 1);
  for (std::size_t k = 0; k <= top; ++k) {
    p[k] = std::norm(X[k]) / static_cast<double>(n);
    f[k] = static_cast<double>(k) / static_cast<double>(n);
  }
  std::size_t peak = 1;
  double total = 0, weighted = 0;
  for (std::size_t k = 1; k <= top; ++k) {
    if (p[k] > p[peak]) peak = k;
    total += p[k];
    weighted += f[k] * p[k];
  }
  std::size_t natural = 0;
  for (std::size_t k = 1; k <= top && !natural; ++k) {
    const double l = k > 1 ? p[k - 1] : -1, r = k < top ? p[k + 1] : -1;
    if (p[k] >= l && p[k] >= r && (p[k] > l || p[k] > r)) natural = k;
  }
  return {median, sorted.back() - sorted.front(), energy, f[natural], p[natural], weighted / total, f[peak], p[peak]};
}

}  // namespace

TEST(Descriptors, ConstantSegment) {
  const series x(60, 5.0);
  descriptor_config whole;
  whole.subwindow = 60;
  whole.domain = descriptor_domain::time;
  const auto fv = extract_descriptors(x, whole);
  ASSERT_EQ(fv.size(), 8u);
  EXPECT_DOUBLE_EQ(fv.values[0], 5.0);
  EXPECT_DOUBLE_EQ(fv.values[1], 0.0);
  EXPECT_DOUBLE_EQ(fv.values[2], 1500.0);
  for (std::size_t i = 3; i < 8; ++i) EXPECT_EQ(fv.values[i], 0.0);

  const auto avg = extract_descriptors(x);  // four 15-sample subwindows, averaged
  EXPECT_DOUBLE_EQ(avg.values[2], 375.0);

  whole.on_flat_spectrum = flat_spectrum_policy::error;
  try {
    extract_descriptors(x, whole);
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::degenerate_spectrum);
  }
}

TEST(Descriptors, PureTone) {
  series x(60);
  for (std::size_t i = 0; i < 60; ++i) x[i] = std::cos(2 * std::numbers::pi * 4 * static_cast<double>(i) / 60);
  descriptor_config cfg;
  cfg.subwindow = 60;
  cfg.domain = descriptor_domain::time;
  const auto fv = extract_descriptors(x, cfg);
  EXPECT_NEAR(fv.values[3], 4.0 / 60, 1e-12);
  EXPECT_NEAR(fv.values[5], 4.0 / 60, 1e-9);
  EXPECT_NEAR(fv.values[6], 4.0 / 60, 1e-12);
}

TEST(Descriptors, MatchFormulaOracle) {
  auto rng = make_rng(31);
  for (int t = 0; t < 20; ++t) {
    const auto seg = oracle::random_series(rng, 60, 40, 60);
    const auto fv = extract_descriptors(seg);
    ASSERT_EQ(fv.size(), 16u);
    std::vector<double> time(8, 0.0);
    for (std::size_t w = 0; w < 4; ++w) {
      const auto d = reference_window(series(seg.begin() + w * 15, seg.begin() + (w + 1) * 15));
      for (std::size_t i = 0; i < 8; ++i) time[i] += d[i] / 4;
    }
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(fv.values[i], time[i], 1e-9 * (1 + std::abs(time[i]))) << i;

    const auto X = oracle::naive_dft(seg);
    series power(31);
    for (std::size_t k = 0; k <= 30; ++k) power[k] = std::norm(X[k]) / 60;
    std::vector<double> freq(8, 0.0);
    for (std::size_t w = 0; w < 2; ++w) {
      const auto d = reference_window(series(power.begin() + w * 15, power.begin() + (w + 1) * 15));
      for (std::size_t i = 0; i < 8; ++i) freq[i] += d[i] / 2;
    }
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(fv.values[8 + i], freq[i], 1e-9 * (1 + std::abs(freq[i]))) << i;
  }
}

TEST(Descriptors, TranslationBehaviour) {
  auto rng = make_rng(32);
  std::uniform_real_distribution<double> shift(-20, 20);
  for (int t = 0; t < 100; ++t) {
    const auto seg = oracle::random_series(rng, 60, 30, 50);
    const double c = shift(rng);
    series moved = seg;
    for (auto& v : moved) v += c;
    descriptor_config cfg;
    cfg.domain = descriptor_domain::time;
    const auto a = extract_descriptors(seg, cfg), b = extract_descriptors(moved, cfg);
    EXPECT_NEAR(b.values[0], a.values[0] + c, 1e-9);
    EXPECT_NEAR(b.values[1], a.values[1], 1e-9);
    double expected = 0;
    for (std::size_t w = 0; w < 4; ++w)
      for (std::size_t i = 0; i < 15; ++i) expected += moved[w * 15 + i] * moved[w * 15 + i] / 4;
    EXPECT_NEAR(b.values[2], expected, 1e-9 * expected);
  }
}

TEST(Descriptors, SchemaStable) {
  auto rng = make_rng(33);
  const auto a = extract_descriptors(oracle::random_series(rng, 60));
  const auto b = extract_descriptors(oracle::random_series(rng, 60));
  EXPECT_EQ(a.schema, b.schema);
  EXPECT_EQ(a.schema.front(), "stat.t.median");
  EXPECT_EQ(a.schema[8], "stat.f.median");
}

TEST(Descriptors, RejectsShortSegments) {
  EXPECT_THROW(extract_descriptors(series(20, 1.0)), error);
}

TEST(Combine, Examples) {
  const auto stats = make_feature_vector(std::vector<double>(16, 1.0), std::vector<std::string>(16, "s"), feature_source::statistical);
  const auto shp = make_feature_vector(std::vector<double>(12, 2.0), std::vector<std::string>(12, "h"), feature_source::shapelet);
  const auto c = combine(stats, shp);
  EXPECT_EQ(c.size(), 28u);
  EXPECT_EQ(c.source, feature_source::combined);
  EXPECT_EQ(combine(stats, feature_vector{}).values, stats.values);
  EXPECT_EQ(combine(shp, stats).schema, c.schema);
  EXPECT_EQ(combine(shp, stats).values, c.values);
}

TEST(Combine, Associative) {
  const auto a = make_feature_vector({1, 2}, {"a1", "a2"}, feature_source::statistical);
  const auto b = make_feature_vector({3}, {"b1"}, feature_source::shapelet);
  const auto e = make_feature_vector({4, 5}, {"e1", "e2"}, feature_source::embedding);
  const auto left = combine(combine(a, b), e), right = combine(a, combine(b, e));
  EXPECT_EQ(left.schema, right.schema);
  EXPECT_EQ(left.values, right.values);
}

TEST(Standardize, Examples) {
  std::vector<feature_vector> train;
  for (double v : {1.0, 2.0, 3.0}) train.push_back(make_feature_vector({v, 7.0}, {"x", "k"}, feature_source::statistical));
  const auto held = make_feature_vector({5.0, 9.0}, {"x", "k"}, feature_source::statistical);
  const auto out = standardize(train, {held});
  double mean = 0, sq = 0;
  for (const auto& fv : out.train) {
    mean += fv.values[0] / 3;
    sq += fv.values[0] * fv.values[0] / 3;
    EXPECT_EQ(fv.values[1], 0.0);
  }
  EXPECT_NEAR(mean, 0.0, 1e-12);
  EXPECT_NEAR(sq, 1.0, 1e-12);
  // Training mean 2, population sd sqrt(2/3).
  EXPECT_NEAR(out.applied[0].values[0], 3.0 / std::sqrt(2.0 / 3.0), 1e-12);
  EXPECT_EQ(out.applied[0].values[1], 0.0);
}

TEST(FeatureVector, SchemaLengthMismatch) {
  EXPECT_THROW(make_feature_vector({1, 2}, {"a"}, feature_source::statistical), error);
}
