#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "whatif/error.hpp"

namespace whatif {

/// Anything that maps a feature vector to a scalar prediction.
template <class M>
concept Predictor = requires(const M& m, std::span<const double> x) {
  { m(x) } -> std::convertible_to<double>;
};

using Matrix = std::vector<std::vector<double>>;

struct ShapExplanation {
  double baseline = 0.0;  // mean prediction over the background
  std::vector<double> attributions;
  double prediction = 0.0;
  std::vector<double> feature_values;
};

inline constexpr std::size_t kMaxShapFeatures = 15;

namespace detail {

// Shapley kernel s!(d-s-1)!/d! for s = 0..d-1.
inline std::vector<double> shapley_weights(std::size_t d) {
  std::vector<double> fact(d + 1, 1.0);
  for (std::size_t i = 1; i <= d; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
  std::vector<double> w(d);
  for (std::size_t s = 0; s < d; ++s) w[s] = fact[s] * fact[d - s - 1] / fact[d];
  return w;
}

}  // namespace detail

/// Exact Shapley values by enumerating all 2^d coalitions with the
/// interventional value function v(S) = mean_b f(x_S, b_rest).
template <Predictor Model>
ShapExplanation shap_exact(const Model& model, std::span<const double> x, const Matrix& background) {
  const std::size_t d = x.size();
  if (d > kMaxShapFeatures) {
    throw Error(errc::kTooManyFeatures, "exact Shapley supports at most " + std::to_string(kMaxShapFeatures) +
                                            " features, got " + std::to_string(d));
  }
  if (background.empty()) throw Error(errc::kEmptyBackground, "background set is empty");
  for (const auto& b : background) {
    if (b.size() != d) throw Error(errc::kShapeMismatch, "background row width differs from the unit");
  }

  const std::size_t subsets = std::size_t{1} << d;
  std::vector<double> value(subsets);
  std::vector<double> hybrid(d);
  const double nb = static_cast<double>(background.size());
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    double acc = 0.0;
    for (const auto& b : background) {
      for (std::size_t j = 0; j < d; ++j) hybrid[j] = (mask >> j) & 1U ? x[j] : b[j];
      acc += static_cast<double>(model(std::span<const double>(hybrid)));
    }
    value[mask] = acc / nb;
  }

  const auto weight = detail::shapley_weights(d);
  ShapExplanation out;
  out.attributions.assign(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    double phi = 0.0;
    for (std::size_t mask = 0; mask < subsets; ++mask) {
      if (mask & bit) continue;
      phi += weight[static_cast<std::size_t>(std::popcount(mask))] * (value[mask | bit] - value[mask]);
    }
    out.attributions[i] = phi;
  }
  out.baseline = value[0];
  out.prediction = value[subsets - 1];
  out.feature_values.assign(x.begin(), x.end());
  return out;
}

struct WaterfallStep {
  std::string feature;
  double start = 0.0;
  double end = 0.0;
};

/// Cumulative steps from baseline to prediction, largest |attribution| first.
inline std::vector<WaterfallStep> waterfall_data(const ShapExplanation& e, std::span<const std::string> names) {
  if (names.size() != e.attributions.size()) throw Error(errc::kShapeMismatch, "feature name count mismatch");
  std::vector<std::size_t> order(names.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ma = std::abs(e.attributions[a]);
    const double mb = std::abs(e.attributions[b]);
    if (ma != mb) return ma > mb;
    return names[a] < names[b];
  });
  std::vector<WaterfallStep> steps;
  double at = e.baseline;
  for (std::size_t i : order) {
    steps.push_back({names[i], at, at + e.attributions[i]});
    at += e.attributions[i];
  }
  return steps;
}

struct GlobalShap {
  Matrix matrix;                       // rows follow the input rows
  std::vector<double> mean_abs;        // per feature
  std::vector<std::size_t> feature_order;  // mean |phi| descending, ties by name
  Matrix feature_values;
  double baseline = 0.0;
};

/// shap_exact for every row. Rows may be evaluated on several threads; the
/// assembled matrix is always in input order.
template <Predictor Model>
GlobalShap shap_global(const Model& model, const Matrix& rows, const Matrix& background,
                       std::span<const std::string> names, unsigned threads = 0) {
  const std::size_t d = names.size();
  GlobalShap g;
  g.matrix.assign(rows.size(), {});
  g.feature_values = rows;
  std::vector<double> baselines(rows.size(), 0.0);

  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(rows.size(), 1)));
  std::vector<std::exception_ptr> failures(threads);
  auto work = [&](unsigned t) {
    try {
      for (std::size_t r = t; r < rows.size(); r += threads) {
        if (rows[r].size() != d) throw Error(errc::kShapeMismatch, "row width differs from feature names");
        auto e = shap_exact(model, rows[r], background);
        g.matrix[r] = std::move(e.attributions);
        baselines[r] = e.baseline;
      }
    } catch (...) {
      failures[t] = std::current_exception();
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  g.mean_abs.assign(d, 0.0);
  for (const auto& row : g.matrix) {
    for (std::size_t j = 0; j < d; ++j) g.mean_abs[j] += std::abs(row[j]);
  }
  if (!rows.empty()) {
    for (auto& m : g.mean_abs) m /= static_cast<double>(rows.size());
    g.baseline = baselines.front();
  }
  g.feature_order.resize(d);
  for (std::size_t j = 0; j < d; ++j) g.feature_order[j] = j;
  std::sort(g.feature_order.begin(), g.feature_order.end(), [&](std::size_t a, std::size_t b) {
    if (g.mean_abs[a] != g.mean_abs[b]) return g.mean_abs[a] > g.mean_abs[b];
    return names[a] < names[b];
  });
  return g;
}

}  // namespace whatif
