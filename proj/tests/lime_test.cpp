#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

namespace whatif {
namespace {

TEST(Lime, ConstantModel) {
  auto f = [](std::span<const double>) { return 5.0; };
  const std::vector<double> x{1, 2, 3}, scale{1, 1, 1};
  const auto e = lime_explain(f, x, scale);
  for (double c : e.coefficients) EXPECT_NEAR(c, 0.0, 1e-9);
  EXPECT_EQ(e.prediction, 5.0);
  EXPECT_EQ(e.interval.first, 5.0);
  EXPECT_EQ(e.interval.second, 5.0);
}

TEST(Lime, RecoversLinearWeights) {
  const std::vector<double> w{3, -1, 0.5, 10, -7};
  const LinearOutcomeModel f{w, 2};
  const std::vector<double> x{1, -2, 0.5, 4, 0}, scale{1, 2, 0.5, 3, 1};
  LimeConfig cfg;
  cfg.n_samples = 5000;
  const auto e = lime_explain(f, x, scale, cfg);
  for (std::size_t j = 0; j < w.size(); ++j) EXPECT_NEAR(e.coefficients[j], w[j], 0.02 * 10);
  EXPECT_GE(e.r2, 0.99);
  EXPECT_FALSE(e.degenerate);
  EXPECT_EQ(e.n_samples, 5000u);
  EXPECT_LE(e.interval.first, e.prediction);
  EXPECT_GE(e.interval.second, e.prediction);
}

TEST(Lime, SeededDeterminism) {
  auto f = [](std::span<const double> x) { return x[0] * x[0] + std::sin(x[1]); };
  const std::vector<double> x{0.4, 1.0}, scale{1, 1};
  LimeConfig cfg;
  cfg.seed = 9;
  const auto a = lime_explain(f, x, scale, cfg);
  const auto b = lime_explain(f, x, scale, cfg);
  EXPECT_EQ(a.coefficients, b.coefficients);
  EXPECT_EQ(a.interval, b.interval);
  cfg.seed = 10;
  EXPECT_NE(lime_explain(f, x, scale, cfg).coefficients, a.coefficients);
}

TEST(Lime, ZeroScaleFeatureIsDegenerate) {
  const LinearOutcomeModel f{{1, 1}, 0};
  const std::vector<double> x{1, 1}, scale{1, 0};
  const auto e = lime_explain(f, x, scale);
  EXPECT_TRUE(e.degenerate);
  EXPECT_NEAR(e.coefficients[0], 1.0, 1e-9);
  EXPECT_NEAR(e.coefficients[1], 0.0, 1e-9);
}

TEST(Lime, Arguments) {
  auto f = [](std::span<const double> x) { return x[0]; };
  const std::vector<double> x{1, 2}, scale{1, 1};
  LimeConfig cfg;
  cfg.n_samples = 3;
  EXPECT_THROW(lime_explain(f, x, scale, cfg), Error);
  cfg.n_samples = 100;
  cfg.kernel_width = 0.0;
  EXPECT_THROW(lime_explain(f, x, scale, cfg), Error);
  EXPECT_DOUBLE_EQ(default_kernel_width(4), 1.5);
}

TEST(LimeBars, SortedByMagnitudeZerosOmitted) {
  LimeExplanation e;
  e.coefficients = {1, -2, 0, 3};
  const std::vector<double> x{1, 1, 5, 1}, ref{0, 0, 0, 1};
  const std::vector<std::string> names{"a", "b", "c", "d"};
  const auto bars = lime_bar_data(e, x, ref, names);
  ASSERT_EQ(bars.size(), 2u);
  EXPECT_EQ(bars[0].feature, "b");
  EXPECT_FALSE(bars[0].positive);
  EXPECT_EQ(bars[1].feature, "a");
  EXPECT_TRUE(bars[1].positive);
}

TEST(LimeBars, MatchesSortOracle) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> small(-3, 3);
  for (int t = 0; t < 30; ++t) {
    LimeExplanation e;
    std::vector<double> x(6), ref(6, 0.0);
    std::vector<std::string> names;
    for (int j = 0; j < 6; ++j) {
      e.coefficients.push_back(small(rng));
      x[j] = small(rng);
      names.push_back(std::string(1, static_cast<char>('a' + j)));
    }
    std::vector<std::pair<double, std::string>> want;
    for (int j = 0; j < 6; ++j) {
      const double c = e.coefficients[j] * x[j];
      if (c != 0) want.emplace_back(-std::abs(c), names[j]);
    }
    std::sort(want.begin(), want.end());
    const auto bars = lime_bar_data(e, x, ref, names);
    ASSERT_EQ(bars.size(), want.size());
    for (std::size_t i = 0; i < bars.size(); ++i) EXPECT_EQ(bars[i].feature, want[i].second);
  }
}

}  // namespace
}  // namespace whatif
