#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "whatif/error.hpp"

namespace whatif {

struct LinearFit {
  std::vector<double> coefficients;
  double intercept = 0.0;
  double residual_sd = 0.0;  // sqrt(weighted SSR / total weight)
  double r2 = 1.0;           // 1 when the response has no variance
  bool rank_deficient = false;
};

/// Weighted least squares of `y` on the columns of `x` plus an intercept.
///
/// The problem is solved on (weighted-)mean-centered data, so the fitted
/// plane passes exactly through the weighted means. Rank-deficient designs
/// get the minimum-norm solution (complete orthogonal decomposition), which
/// assigns zero weight to constant columns.
///
/// `x` is row-major with `cols` columns; `weights` may be empty (all ones).
inline LinearFit fit_linear(std::span<const double> x, std::size_t cols, std::span<const double> y,
                            std::span<const double> weights = {}) {
  const std::size_t n = y.size();
  if (x.size() != n * cols) throw Error(errc::kShapeMismatch, "fit_linear: design shape mismatch");
  if (!weights.empty() && weights.size() != n) throw Error(errc::kShapeMismatch, "fit_linear: weight count mismatch");
  if (n == 0) throw Error(errc::kInsufficientData, "fit_linear: no rows");

  auto w = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };
  double wsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) wsum += w(i);
  if (!(wsum > 0.0)) throw Error(errc::kInsufficientData, "fit_linear: total weight is zero");

  std::vector<double> xmean(cols, 0.0);
  double ymean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < cols; ++j) xmean[j] += w(i) * x[i * cols + j];
    ymean += w(i) * y[i];
  }
  for (auto& m : xmean) m /= wsum;
  ymean /= wsum;

  LinearFit fit;
  fit.coefficients.assign(cols, 0.0);
  if (cols > 0) {
    Eigen::MatrixXd a(n, cols);
    Eigen::VectorXd b(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double sw = std::sqrt(w(i));
      for (std::size_t j = 0; j < cols; ++j) a(i, j) = sw * (x[i * cols + j] - xmean[j]);
      b(i) = sw * (y[i] - ymean);
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
    const Eigen::VectorXd beta = cod.solve(b);
    fit.rank_deficient = static_cast<std::size_t>(cod.rank()) < cols;
    for (std::size_t j = 0; j < cols; ++j) fit.coefficients[j] = beta(j);
  }

  fit.intercept = ymean;
  for (std::size_t j = 0; j < cols; ++j) fit.intercept -= fit.coefficients[j] * xmean[j];

  double ssr = 0.0;
  double sst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double pred = ymean;
    for (std::size_t j = 0; j < cols; ++j) pred += fit.coefficients[j] * (x[i * cols + j] - xmean[j]);
    const double r = y[i] - pred;
    ssr += w(i) * r * r;
    sst += w(i) * (y[i] - ymean) * (y[i] - ymean);
  }
  fit.residual_sd = std::sqrt(ssr / wsum);
  fit.r2 = sst > 0.0 ? 1.0 - ssr / sst : 1.0;
  return fit;
}

}  // namespace whatif
