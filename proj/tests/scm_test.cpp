#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

namespace whatif {
namespace {

CausalGraph chain_graph() { return validate_graph({"A", "B", "Y"}, {{"A", "B"}, {"B", "Y"}}, std::string("Y")); }

// B = 2A, Y = 3B with zero intercepts.
FittedSCM hand_chain() {
  return FittedSCM(chain_graph(), {Equation{{}, 0, 1}, Equation{{2.0}, 0, 0}, Equation{{3.0}, 0, 0}}, {});
}

std::vector<Unit> units_from(const std::vector<std::vector<double>>& rows) {
  std::vector<Unit> out;
  for (std::size_t i = 0; i < rows.size(); ++i) out.push_back({"r" + std::to_string(i), "", rows[i]});
  return out;
}

TEST(FitScm, RecoversNoisyLine) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 1000; ++i) {
    const double a = z(rng);
    rows.push_back({a, 2.0 * a + 0.01 * z(rng)});
  }
  const auto scm = fit_scm(validate_graph({"A", "Y"}, {{"A", "Y"}}, std::string("Y")), units_from(rows));
  EXPECT_GE(scm.equations()[1].coefficients[0], 1.95);
  EXPECT_LE(scm.equations()[1].coefficients[0], 2.05);
}

TEST(FitScm, RootsGetMeanAndSd) {
  const auto rows = std::vector<std::vector<double>>{{1, 10}, {2, 30}, {6, 20}};
  const auto scm = fit_scm(validate_graph({"A", "Y"}, {}, std::string("Y")), units_from(rows));
  EXPECT_TRUE(scm.equations()[0].coefficients.empty());
  EXPECT_DOUBLE_EQ(scm.equations()[0].intercept, 3.0);
  EXPECT_NEAR(scm.equations()[0].residual_sd, std::sqrt((4.0 + 1.0 + 9.0) / 3.0), 1e-12);
  EXPECT_DOUBLE_EQ(scm.equations()[1].intercept, 20.0);
  EXPECT_NEAR(scm.equations()[1].residual_sd, std::sqrt(200.0 / 3.0), 1e-12);
}

TEST(FitScm, ExactChain) {
  const auto scm = fit_scm(chain_graph(), units_from({{0, 0, 0}, {1, 2, 6}, {2, 4, 12}, {-3, -6, -18}, {5, 10, 30}}));
  EXPECT_NEAR(scm.equations()[1].coefficients[0], 2.0, 1e-12);
  EXPECT_NEAR(scm.equations()[2].coefficients[0], 3.0, 1e-12);
  EXPECT_NEAR(scm.equations()[1].residual_sd, 0.0, 1e-9);
  EXPECT_NEAR(scm.equations()[2].residual_sd, 0.0, 1e-9);
  EXPECT_EQ(scm.fit_population().size(), 5u);
}

TEST(FitScm, InsufficientData) {
  const auto g = validate_graph({"A", "B", "Y"}, {{"A", "Y"}, {"B", "Y"}}, std::string("Y"));
  try {
    fit_scm(g, units_from({{1, 2, 3}, {2, 3, 4}, {3, 1, 2}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::kInsufficientData);
    EXPECT_NE(std::string(e.what()).find("'Y': needed 4 rows, got 3"), std::string::npos) << e.what();
  }
}

TEST(FitScm, SingularDesignGetsMinimumNorm) {
  // B duplicates A, so Y = 2A splits evenly across the two parents.
  const auto g = validate_graph({"A", "B", "Y"}, {{"A", "Y"}, {"B", "Y"}}, std::string("Y"));
  const auto scm = fit_scm(g, units_from({{1, 1, 2}, {2, 2, 4}, {3, 3, 6}, {5, 5, 10}}));
  const auto& eq = scm.equations()[2];
  EXPECT_TRUE(eq.rank_deficient);
  EXPECT_NEAR(eq.coefficients[0], 1.0, 1e-9);
  EXPECT_NEAR(eq.coefficients[1], 1.0, 1e-9);

  // A constant parent gets a zero coefficient.
  const auto scm2 = fit_scm(g, units_from({{1, 7, 2}, {2, 7, 4}, {3, 7, 6}, {5, 7, 10}}));
  EXPECT_NEAR(scm2.equations()[2].coefficients[1], 0.0, 1e-12);
  EXPECT_NEAR(scm2.equations()[2].coefficients[0], 2.0, 1e-12);
}

TEST(FitScm, Deterministic) {
  std::mt19937_64 rng(3);
  const auto r = testing::random_scm(rng, 8, 200);
  const auto a = fit_scm(r.graph, r.units);
  const auto b = fit_scm(r.graph, r.units);
  for (std::size_t i = 0; i < r.graph.size(); ++i) {
    EXPECT_EQ(a.equations()[i].coefficients, b.equations()[i].coefficients);
    EXPECT_EQ(a.equations()[i].intercept, b.equations()[i].intercept);
    EXPECT_EQ(a.equations()[i].residual_sd, b.equations()[i].residual_sd);
  }
}

TEST(PredictOutcome, DirectEvaluation) {
  const auto scm = FittedSCM(validate_graph({"B", "Y"}, {{"B", "Y"}}, std::string("Y")),
                             {Equation{{}, 0, 1}, Equation{{3.0}, 1.0, 0}}, {});
  EXPECT_EQ(predict_outcome(scm, std::vector<double>{2.0}), 7.0);
  EXPECT_THROW(predict_outcome(scm, std::vector<double>{1, 2, 3}), Error);
  EXPECT_THROW(predict_outcome(FittedSCM{}, std::vector<double>{1}), Error);
}

TEST(PredictOutcome, PassesThroughSubgroupMeans) {
  const auto ds = testing::load_fixture("opioid");
  const auto g = testing::load_graph("opioid", ds.schema());
  const std::vector<Unit> sub(ds.units().begin(), ds.units().begin() + 40);
  const auto scm = fit_scm(g, sub);
  const auto st = compute_stats(sub, ds.schema().attribute_count());
  EXPECT_NEAR(predict_outcome(scm, std::span<const double>(st.mean).first(10)), st.mean[10], 1e-6);
}

TEST(PredictOutcome, MatchesDotProductOracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int t = 0; t < 20; ++t) {
    const auto r = testing::random_scm(rng, 6, 0);
    const std::size_t y = *r.graph.outcome();
    std::vector<double> x(y);
    for (auto& v : x) v = u(rng);
    double expect = r.model.equations()[y].intercept;
    const auto& ps = r.graph.parents(y);
    for (std::size_t k = 0; k < ps.size(); ++k) expect += r.model.equations()[y].coefficients[k] * x[ps[k]];
    EXPECT_NEAR(predict_outcome(r.model, x), expect, 1e-12);
    EXPECT_NEAR(outcome_model(r.model)(x), expect, 1e-12);
  }
}

TEST(Intervene, ObservedValueIsIdentity) {
  const Unit u{"x", "x", {1.0, 2.5, 8.0}};
  const auto r = intervene(hand_chain(), u, std::string_view("A"), 1.0);
  EXPECT_EQ(r.counterfactual, r.factual);
  EXPECT_TRUE(r.changed.empty());
}

TEST(Intervene, HandRunChain) {
  const Unit u{"x", "x", {1.0, 2.5, 8.0}};
  const auto r = intervene(hand_chain(), u, std::string_view("A"), 2.0);
  EXPECT_NEAR(r.residuals[1], 0.5, 1e-12);
  EXPECT_NEAR(r.residuals[2], 0.5, 1e-12);
  EXPECT_NEAR(r.counterfactual[1], 4.5, 1e-12);
  EXPECT_NEAR(r.counterfactual[2], 14.0, 1e-12);
  EXPECT_EQ(r.changed, (std::vector<std::string>{"A", "B", "Y"}));
  EXPECT_EQ(r.factual, u.values);
}

TEST(Intervene, ChainFixtureFitReproducesHandCase) {
  const auto ds = testing::load_fixture("chain");
  const auto scm = fit_scm(testing::load_graph("chain", ds.schema()), ds.units());
  EXPECT_NEAR(scm.equations()[1].coefficients[0], 2.0, 1e-12);
  EXPECT_NEAR(scm.equations()[2].coefficients[0], 3.0, 1e-12);
  const auto r = intervene(scm, ds.unit("u1"), std::string_view("A"), 2.0);
  EXPECT_NEAR(r.counterfactual[2], 14.0, 1e-9);
}

TEST(Intervene, NonDescendantUnchanged) {
  const auto g = validate_graph({"A", "B", "Y"}, {{"A", "Y"}, {"B", "Y"}}, std::string("Y"));
  const auto scm = FittedSCM(g, {Equation{{}, 0, 1}, Equation{{}, 0, 1}, Equation{{1.5, -2.0}, 3, 1}}, {});
  const Unit u{"x", "x", {0.3, 0.7, 1.1}};
  for (double v : {-100.0, 0.0, 42.0}) {
    const auto r = intervene(scm, u, std::string_view("B"), v);
    EXPECT_EQ(r.counterfactual[0], u.values[0]);
  }
}

TEST(Intervene, Errors) {
  const Unit u{"x", "x", {1.0, 2.5, 8.0}};
  auto code = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return std::string("none");
  };
  EXPECT_EQ(code([&] { intervene(hand_chain(), u, std::string_view("Y"), 1.0); }), errc::kNotATreatment);
  EXPECT_EQ(code([&] { intervene(hand_chain(), u, std::string_view("Q"), 1.0); }), errc::kNotATreatment);
  EXPECT_EQ(code([&] { intervene(FittedSCM{}, u, std::string_view("A"), 1.0); }), errc::kUnfittedModel);
  EXPECT_EQ(code([&] { intervene(hand_chain(), u, std::string_view("A"), std::nan("")); }), errc::kInvalidArgument);
}

TEST(Intervene, RandomModelProperties) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> shift(-5, 5);
  for (int t = 0; t < 40; ++t) {
    const auto r = testing::random_scm(rng, 3 + t % 10, 10);
    const auto scm = fit_scm(r.graph, r.units);
    const std::size_t y = *r.graph.outcome();
    for (const auto& u : r.units) {
      for (std::size_t a = 0; a < y; ++a) {
        // Consistency.
        const auto same = intervene(scm, u, a, u.values[a]);
        for (std::size_t i = 0; i < u.values.size(); ++i) EXPECT_NEAR(same.counterfactual[i], u.values[i], 1e-9);
        // Confinement.
        const auto moved = intervene(scm, u, a, u.values[a] + shift(rng));
        const auto desc = descendants(r.graph, a);
        for (const auto& name : moved.changed) {
          const auto idx = *r.graph.index_of(name);
          EXPECT_TRUE(idx == a || std::find(desc.begin(), desc.end(), idx) != desc.end()) << name;
        }
        // Affine in the intervention value.
        const double v1 = u.values[a] - 1.3, v3 = u.values[a] + 2.1;
        const double y1 = intervene(scm, u, a, v1).counterfactual[y];
        const double y2 = intervene(scm, u, a, 0.5 * (v1 + v3)).counterfactual[y];
        const double y3 = intervene(scm, u, a, v3).counterfactual[y];
        EXPECT_NEAR(y2, 0.5 * (y1 + y3), 1e-6);
      }
    }
  }
}

TEST(Recommend, OwnOutcomeTargetGivesZero) {
  const auto ds = testing::load_fixture("opioid");
  const auto g = testing::load_graph("opioid", ds.schema());
  const std::vector<Unit> sub(ds.units().begin(), ds.units().begin() + 60);
  const auto scm = fit_scm(g, sub);
  const Unit& u = sub[7];
  const auto recs = recommend_interventions(scm, u, subgroup_ranges(sub), u.values.back(), 7);
  ASSERT_EQ(recs.size(), 10u);
  EXPECT_EQ(recs.front().distance, 0.0);
  for (const auto& r : recs) EXPECT_GE(r.distance, recs.front().distance);
}

TEST(Recommend, HandGrid) {
  const auto g = validate_graph({"A", "Y"}, {{"A", "Y"}}, std::string("Y"));
  const auto scm = FittedSCM(g, {Equation{{}, 2, 1}, Equation{{2.0}, 0, 0}}, {});
  const Unit u{"p1", "p1", {1.0, 2.0}};
  const std::vector<std::pair<double, double>> ranges{{0, 4}, {0, 8}};
  const auto recs = recommend_interventions(scm, u, ranges, 8.0, 5);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].attribute, "A");
  EXPECT_EQ(recs[0].value, 4.0);
  EXPECT_EQ(recs[0].predicted_outcome, 8.0);
  EXPECT_EQ(recs[0].distance, 0.0);
}

TEST(Recommend, NonAncestorKeepsFactualDistance) {
  const auto g = validate_graph({"A", "B", "Y"}, {{"A", "Y"}}, std::string("Y"));
  const auto scm = FittedSCM(g, {Equation{{}, 0, 1}, Equation{{}, 0, 1}, Equation{{2.0}, 0, 0}}, {});
  const Unit u{"x", "x", {1.0, 5.0, 2.0}};
  const std::vector<std::pair<double, double>> ranges{{0, 4}, {0, 10}, {0, 8}};
  const auto recs = recommend_interventions(scm, u, ranges, 7.0, 5);
  const auto b = std::find_if(recs.begin(), recs.end(), [](const Recommendation& r) { return r.attribute == "B"; });
  ASSERT_NE(b, recs.end());
  EXPECT_EQ(b->distance, 5.0);
  EXPECT_EQ(b->value, 5.0);  // ties resolve to the smallest change: no-op
}

TEST(Recommend, TieBrokenByAttributeName) {
  const auto ds = testing::load_fixture("chain");
  const auto scm = fit_scm(testing::load_graph("chain", ds.schema()), ds.units());
  const auto recs = recommend_interventions(scm, ds.unit("u5"), subgroup_ranges(ds.units()), 8.0, 5);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_NEAR(recs[0].distance, 2.0, 1e-9);
  EXPECT_NEAR(recs[1].distance, 2.0, 1e-9);
  EXPECT_EQ(recs[0].attribute, "A");
  EXPECT_EQ(recs[1].attribute, "B");
}

TEST(Recommend, Errors) {
  const Unit u{"x", "x", {1.0, 2.5, 8.0}};
  const std::vector<std::pair<double, double>> ranges(3, {0.0, 1.0});
  EXPECT_THROW(recommend_interventions(FittedSCM{}, u, ranges, 1.0, 5), Error);
  EXPECT_THROW(recommend_interventions(hand_chain(), u, ranges, 1.0, 1), Error);
}

}  // namespace
}  // namespace whatif
