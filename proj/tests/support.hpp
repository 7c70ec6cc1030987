#pragma once

// Synthetic data whose true components lie inside the estimator's spline
// spaces, for noiseless recovery checks.

#include "vcam/estimation.hpp"

#include <vector>

namespace vcam::testing {

/// T x p covariates drawn uniformly on [-1, 1].
inline Matrix uniform_covariates(int length, int covariates, std::uint64_t seed) {
  RngStream rng(seed, 0);
  Matrix x(length, covariates);
  for (int t = 0; t < length; ++t) {
    for (int k = 0; k < covariates; ++k) x(t, k) = 2.0 * rng.uniform() - 1.0;
  }
  return x;
}

/// Random additive components on the bases the estimator builds from `x`,
/// pinned to zero at the resolved anchors.
inline std::vector<ComponentFunction> in_space_beta(const TimeSeriesDataset& shape, int order, int interior_count,
                                                    std::uint64_t seed) {
  RngStream rng(seed, 1);
  const auto bases = covariate_bases(shape, order, interior_count);
  const auto anchors = resolve_anchors(shape, 0.0);
  std::vector<ComponentFunction> out;
  for (std::size_t k = 0; k < bases.size(); ++k) {
    Vector c(bases[k].dimension());
    for (auto& v : c) v = rng.normal();
    out.push_back(additive(bases[k], c, anchors[k]));
  }
  return out;
}

/// Random varying coefficient on a uniform time basis with unit L2 norm and
/// positive integral.
inline ComponentFunction in_space_alpha(const SplineBasis& basis, std::uint64_t seed, std::uint64_t stream) {
  RngStream rng(seed, stream);
  Vector c(basis.dimension());
  for (auto& v : c) v = 1.0 + 0.4 * rng.normal();
  ComponentFunction f = varying_coefficient(basis, c);
  f.coeffs /= f.l2_norm();
  return f;
}

inline Vector response(const TimeSeriesDataset& shape, std::span<const ComponentFunction> alpha,
                       std::span<const ComponentFunction> beta) {
  Vector y(shape.length());
  for (int t = 0; t < shape.length(); ++t) {
    const auto row = shape.covariates().row(t);
    std::vector<double> xs(static_cast<std::size_t>(row.size()));
    for (Eigen::Index k = 0; k < row.size(); ++k) xs[static_cast<std::size_t>(k)] = row(k);
    y[t] = evaluate(alpha, beta, shape.rescaled_time(t), xs);
  }
  return y;
}

inline double max_abs_difference(const ComponentFunction& a, const ComponentFunction& b, int n = 201) {
  double worst = 0.0;
  const double lo = a.basis.lower(), hi = a.basis.upper();
  for (int i = 0; i < n; ++i) {
    const double x = i + 1 == n ? hi : lo + (hi - lo) * i / (n - 1);
    worst = std::max(worst, std::abs(a(x) - b(x)));
  }
  return worst;
}

}  // namespace vcam::testing
