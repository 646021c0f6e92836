#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "whatif/error.hpp"
#include "whatif/least_squares.hpp"
#include "whatif/shap.hpp"

namespace whatif {

struct LimeConfig {
  std::size_t n_samples = 1000;
  std::optional<double> kernel_width;  // default 0.75 * sqrt(d)
  std::uint64_t seed = 42;
};

inline double default_kernel_width(std::size_t features) { return 0.75 * std::sqrt(static_cast<double>(features)); }

struct LimeExplanation {
  double prediction = 0.0;
  std::pair<double, double> interval;  // weighted 2.5th / 97.5th percentile of perturbed predictions
  std::vector<double> coefficients;
  double intercept = 0.0;
  double r2 = 1.0;  // weighted fit quality on the perturbation sample
  bool degenerate = false;
  std::size_t n_samples = 0;
  double kernel_width = 0.0;
  std::uint64_t seed = 0;
};

namespace detail {

// Smallest value whose cumulative weight reaches q of the total.
inline double weighted_quantile(std::vector<std::pair<double, double>> value_weight, double q) {
  std::sort(value_weight.begin(), value_weight.end());
  double total = 0.0;
  for (const auto& vw : value_weight) total += vw.second;
  double acc = 0.0;
  for (const auto& [v, w] : value_weight) {
    acc += w;
    if (acc >= q * total) return v;
  }
  return value_weight.back().first;
}

}  // namespace detail

/// Local linear surrogate around `x`. Perturbations are x + scale * N(0, I);
/// each is weighted by exp(-|(z - x) / scale|^2 / width^2), with zero-scale
/// coordinates contributing nothing to the distance.
template <Predictor Model>
LimeExplanation lime_explain(const Model& model, std::span<const double> x, std::span<const double> scale,
                             const LimeConfig& config = {}) {
  const std::size_t d = x.size();
  if (scale.size() != d) throw Error(errc::kShapeMismatch, "scale width differs from the unit");
  if (config.n_samples < d + 2) {
    throw Error(errc::kInvalidArgument, "n_samples must be at least features + 2 (" + std::to_string(d + 2) + ")");
  }
  const double width = config.kernel_width.value_or(default_kernel_width(d));
  if (!(width > 0.0) || !std::isfinite(width)) throw Error(errc::kInvalidArgument, "kernel_width must be positive");

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = config.n_samples;
  std::vector<double> design(n * d);
  std::vector<double> response(n);
  std::vector<double> weights(n);
  std::vector<std::pair<double, double>> scored(n);
  for (std::size_t i = 0; i < n; ++i) {
    double dist2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double e = normal(rng);
      design[i * d + j] = x[j] + scale[j] * e;
      if (scale[j] > 0.0) dist2 += e * e;
    }
    response[i] = static_cast<double>(model(std::span<const double>(design.data() + i * d, d)));
    weights[i] = std::exp(-dist2 / (width * width));
    scored[i] = {response[i], weights[i]};
  }

  const LinearFit fit = fit_linear(design, d, response, weights);
  LimeExplanation out;
  out.prediction = static_cast<double>(model(x));
  out.interval = {detail::weighted_quantile(scored, 0.025), detail::weighted_quantile(scored, 0.975)};
  out.coefficients = fit.coefficients;
  out.intercept = fit.intercept;
  out.r2 = fit.r2;
  out.degenerate = fit.rank_deficient;
  out.n_samples = n;
  out.kernel_width = width;
  out.seed = config.seed;
  return out;
}

struct LimeBar {
  std::string feature;
  double contribution = 0.0;  // coefficient * (value - reference)
  bool positive = false;
};

/// Display contributions sorted by magnitude; exact zeros are omitted.
inline std::vector<LimeBar> lime_bar_data(const LimeExplanation& e, std::span<const double> x,
                                          std::span<const double> reference, std::span<const std::string> names) {
  const std::size_t d = e.coefficients.size();
  if (x.size() != d || reference.size() != d || names.size() != d) {
    throw Error(errc::kShapeMismatch, "lime_bar_data: width mismatch");
  }
  std::vector<LimeBar> bars;
  for (std::size_t j = 0; j < d; ++j) {
    const double c = e.coefficients[j] * (x[j] - reference[j]);
    if (c == 0.0) continue;
    bars.push_back({names[j], c, c > 0.0});
  }
  std::sort(bars.begin(), bars.end(), [](const LimeBar& a, const LimeBar& b) {
    if (std::abs(a.contribution) != std::abs(b.contribution)) return std::abs(a.contribution) > std::abs(b.contribution);
    return a.feature < b.feature;
  });
  return bars;
}

}  // namespace whatif
