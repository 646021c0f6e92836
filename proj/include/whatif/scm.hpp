#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "whatif/causal_graph.hpp"
#include "whatif/dataset.hpp"
#include "whatif/error.hpp"
#include "whatif/least_squares.hpp"

namespace whatif {

/// node = intercept + sum(coefficients[k] * parent_k) + noise, noise ~ N(0, residual_sd^2).
/// Coefficients follow the order of `CausalGraph::parents(node)`.
struct Equation {
  std::vector<double> coefficients;
  double intercept = 0.0;
  double residual_sd = 0.0;
  bool rank_deficient = false;
};

/// Linear-Gaussian SCM fitted on one population. Node indices follow the
/// graph, which `bind_graph` aligns with the schema attribute order.
class FittedSCM {
 public:
  FittedSCM() = default;
  FittedSCM(CausalGraph graph, std::vector<Equation> equations, std::vector<std::string> fit_population)
      : graph_(std::move(graph)), equations_(std::move(equations)), fit_population_(std::move(fit_population)) {}

  bool fitted() const { return !equations_.empty() && equations_.size() == graph_.size(); }
  const CausalGraph& graph() const { return graph_; }
  const std::vector<Equation>& equations() const { return equations_; }
  const std::vector<std::string>& fit_population() const { return fit_population_; }

  /// Structural part of `node`'s equation evaluated at `values` (indexed by node).
  double evaluate(std::size_t node, std::span<const double> values) const {
    const auto& eq = equations_[node];
    const auto& ps = graph_.parents(node);
    double acc = eq.intercept;
    for (std::size_t k = 0; k < ps.size(); ++k) acc += eq.coefficients[k] * values[ps[k]];
    return acc;
  }

  void require_fitted() const {
    if (!fitted()) throw Error(errc::kUnfittedModel, "structural causal model has not been fitted");
  }

 private:
  CausalGraph graph_;
  std::vector<Equation> equations_;
  std::vector<std::string> fit_population_;
};

/// Ordinary least squares per node on its parents over `units`. Roots get
/// (no coefficients, mean, population sd).
inline FittedSCM fit_scm(const CausalGraph& graph, std::span<const Unit> units) {
  const std::size_t width = graph.size();
  for (std::size_t node : graph.topo_order()) {
    const std::size_t needed = graph.parents(node).size() + 2;
    if (units.size() < needed) {
      throw Error(errc::kInsufficientData, "insufficient data for node '" + graph.nodes()[node] + "': needed " +
                                               std::to_string(needed) + " rows, got " + std::to_string(units.size()));
    }
  }
  for (const auto& u : units) {
    if (u.values.size() != width) throw Error(errc::kShapeMismatch, "unit '" + u.id + "' does not match the graph");
  }

  std::vector<Equation> equations(width);
  std::vector<double> design;
  std::vector<double> response(units.size());
  for (std::size_t node = 0; node < width; ++node) {
    const auto& ps = graph.parents(node);
    design.assign(units.size() * ps.size(), 0.0);
    for (std::size_t i = 0; i < units.size(); ++i) {
      for (std::size_t k = 0; k < ps.size(); ++k) design[i * ps.size() + k] = units[i].values[ps[k]];
      response[i] = units[i].values[node];
    }
    const LinearFit fit = fit_linear(design, ps.size(), response);
    equations[node] = Equation{fit.coefficients, fit.intercept, fit.residual_sd, fit.rank_deficient};
  }

  std::vector<std::string> ids;
  ids.reserve(units.size());
  for (const auto& u : units) ids.push_back(u.id);
  return FittedSCM(graph, std::move(equations), std::move(ids));
}

/// Outcome equation evaluated at the supplied treatment values. Accepts the
/// treatment vector or a full attribute vector (the outcome slot is ignored).
inline double predict_outcome(const FittedSCM& scm, std::span<const double> values) {
  scm.require_fitted();
  const auto outcome = scm.graph().outcome();
  if (!outcome) throw Error(errc::kInvalidGraph, "graph has no outcome node");
  if (values.size() != *outcome && values.size() != scm.graph().size()) {
    throw Error(errc::kShapeMismatch, "expected " + std::to_string(*outcome) + " treatment values, got " +
                                          std::to_string(values.size()));
  }
  return scm.evaluate(*outcome, values);
}

/// The outcome equation as a dense affine map over the treatment vector.
struct LinearOutcomeModel {
  std::vector<double> weights;
  double intercept = 0.0;

  double operator()(std::span<const double> x) const {
    double acc = intercept;
    for (std::size_t j = 0; j < weights.size(); ++j) acc += weights[j] * x[j];
    return acc;
  }
};

inline LinearOutcomeModel outcome_model(const FittedSCM& scm) {
  scm.require_fitted();
  const std::size_t oi = *scm.graph().outcome();
  LinearOutcomeModel m{std::vector<double>(oi, 0.0), scm.equations()[oi].intercept};
  const auto& ps = scm.graph().parents(oi);
  for (std::size_t k = 0; k < ps.size(); ++k) m.weights[ps[k]] = scm.equations()[oi].coefficients[k];
  return m;
}

struct CounterfactualResult {
  std::string unit_id;
  std::string intervened_attribute;
  double intervention_value = 0.0;
  std::vector<double> factual;
  std::vector<double> counterfactual;
  std::vector<double> residuals;     // abducted exogenous terms, per node
  std::vector<std::string> changed;  // in attribute order
};

/// Exogenous residuals u = observed - equation(observed parents).
inline std::vector<double> abduct(const FittedSCM& scm, std::span<const double> observed) {
  scm.require_fitted();
  std::vector<double> u(scm.graph().size());
  for (std::size_t node = 0; node < u.size(); ++node) u[node] = observed[node] - scm.evaluate(node, observed);
  return u;
}

/// Counterfactual under do(attribute := value) by abduction, action and
/// prediction. A node outside {attribute} and its descendants keeps its
/// observed value bit-for-bit. A downstream node is re-predicted as
/// equation(counterfactual parents) + u, evaluated in the algebraically equal
/// form observed + sum(coef * (cf_parent - observed_parent)), so that an
/// unchanged parent set reproduces the observation exactly.
inline CounterfactualResult intervene(const FittedSCM& scm, const Unit& unit, std::size_t attribute, double value) {
  scm.require_fitted();
  const auto& g = scm.graph();
  if (attribute >= g.size()) throw Error(errc::kUnknownNode, "unknown attribute index");
  if (g.outcome() && attribute == *g.outcome()) {
    throw Error(errc::kNotATreatment, "'" + g.nodes()[attribute] + "' is the outcome, not a treatment");
  }
  if (!std::isfinite(value)) throw Error(errc::kInvalidArgument, "intervention value must be finite");
  if (unit.values.size() != g.size()) throw Error(errc::kShapeMismatch, "unit does not match the model");

  CounterfactualResult r;
  r.unit_id = unit.id;
  r.intervened_attribute = g.nodes()[attribute];
  r.intervention_value = value;
  r.factual = unit.values;
  r.residuals = abduct(scm, unit.values);
  r.counterfactual = unit.values;
  r.counterfactual[attribute] = value;

  std::vector<bool> affected(g.size(), false);
  for (std::size_t d : descendants(g, attribute)) affected[d] = true;

  for (std::size_t node : g.topo_order()) {
    if (node == attribute || !affected[node]) continue;
    const auto& ps = g.parents(node);
    const auto& eq = scm.equations()[node];
    double shift = 0.0;
    for (std::size_t k = 0; k < ps.size(); ++k) {
      const double delta = r.counterfactual[ps[k]] - r.factual[ps[k]];
      if (delta != 0.0) shift += eq.coefficients[k] * delta;
    }
    r.counterfactual[node] = r.factual[node] + shift;
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (r.counterfactual[i] != r.factual[i]) r.changed.push_back(g.nodes()[i]);
  }
  return r;
}

inline CounterfactualResult intervene(const FittedSCM& scm, const Unit& unit, std::string_view attribute,
                                      double value) {
  scm.require_fitted();
  auto idx = scm.graph().index_of(attribute);
  if (!idx) throw Error(errc::kNotATreatment, "'" + std::string(attribute) + "' is not a treatment");
  return intervene(scm, unit, *idx, value);
}

struct Recommendation {
  std::string attribute;
  double value = 0.0;
  double predicted_outcome = 0.0;
  double distance = 0.0;
};

/// Single-attribute intervention search. For every treatment, scans
/// `grid_size` evenly spaced values over `ranges[attribute]` plus the unit's
/// own value (the no-op intervention) and keeps the value whose
/// counterfactual outcome is closest to `target`; ties prefer the smaller
/// change, then the smaller value. Results are sorted by distance, then name.
inline std::vector<Recommendation> recommend_interventions(const FittedSCM& scm, const Unit& unit,
                                                           std::span<const std::pair<double, double>> ranges,
                                                           double target, std::size_t grid_size) {
  scm.require_fitted();
  if (grid_size < 2) throw Error(errc::kInvalidArgument, "grid_size must be at least 2");
  if (!std::isfinite(target)) throw Error(errc::kInvalidArgument, "target must be finite");
  const auto& g = scm.graph();
  const auto outcome = g.outcome();
  if (!outcome) throw Error(errc::kInvalidGraph, "graph has no outcome node");
  if (ranges.size() < *outcome) throw Error(errc::kShapeMismatch, "ranges do not cover every treatment");

  std::vector<Recommendation> out;
  for (std::size_t a = 0; a < *outcome; ++a) {
    const auto [lo, hi] = ranges[a];
    std::vector<double> candidates;
    candidates.reserve(grid_size + 1);
    for (std::size_t k = 0; k < grid_size; ++k) {
      candidates.push_back(k + 1 == grid_size ? hi
                                              : lo + (hi - lo) * static_cast<double>(k) /
                                                         static_cast<double>(grid_size - 1));
    }
    candidates.push_back(unit.values[a]);

    const double observed = unit.values[a];
    Recommendation best;
    bool have = false;
    for (double v : candidates) {
      const auto cf = intervene(scm, unit, a, v);
      const double y = cf.counterfactual[*outcome];
      const double dist = std::abs(y - target);
      const bool better = !have || dist < best.distance ||
                          (dist == best.distance && (std::abs(v - observed) < std::abs(best.value - observed) ||
                                                     (std::abs(v - observed) == std::abs(best.value - observed) &&
                                                      v < best.value)));
      if (better) {
        best = Recommendation{g.nodes()[a], v, y, dist};
        have = true;
      }
    }
    out.push_back(best);
  }
  std::stable_sort(out.begin(), out.end(), [](const Recommendation& x, const Recommendation& y) {
    if (x.distance != y.distance) return x.distance < y.distance;
    return x.attribute < y.attribute;
  });
  return out;
}

}  // namespace whatif
