#pragma once

// Internal helpers for assembling regression designs from spline bases.

#include "vcam/model.hpp"

namespace vcam::detail {

/// T x J matrix of sqrt(J) B(t / T).
inline Matrix time_design(const TimeSeriesDataset& data, const SplineBasis& basis) {
  Matrix out(data.length(), basis.dimension());
  for (int t = 0; t < data.length(); ++t) out.row(t) = basis.eval_scaled(data.rescaled_time(t)).transpose();
  return out;
}

/// T x (J - 1) matrix of centered scaled values psi_l(x_t) - psi_l(anchor),
/// l = 1..J-1. The dropped last column equals minus the sum of the others
/// (partition of unity), so the span is unchanged and the columns are free of
/// that exact collinearity.
inline Matrix centered_design(std::span<const double> x, const SplineBasis& basis, double anchor) {
  const int J = basis.dimension();
  Matrix out(static_cast<Eigen::Index>(x.size()), J - 1);
  const Vector at_anchor = basis.eval_scaled(anchor);
  for (std::size_t t = 0; t < x.size(); ++t) {
    const Vector v = basis.eval_scaled(x[t]) - at_anchor;
    out.row(static_cast<Eigen::Index>(t)) = v.head(J - 1).transpose();
  }
  return out;
}

inline std::vector<double> column(const TimeSeriesDataset& data, int k) {
  const auto& c = data.covariates().col(k);
  return std::vector<double>(c.data(), c.data() + c.size());
}

/// Reduced (J - 1) coefficient vector to the full J vector with trailing zero.
inline Vector expand_reduced(const Vector& reduced) {
  Vector full = Vector::Zero(reduced.size() + 1);
  full.head(reduced.size()) = reduced;
  return full;
}

/// Full centered coefficient vector to its reduced equivalent (same function).
inline Vector reduce_centered(const Vector& full) {
  const auto n = full.size();
  return (full.head(n - 1).array() - full[n - 1]).matrix();
}

/// Values of a component at every rescaled time t / T.
inline Vector eval_over_time(const TimeSeriesDataset& data, const ComponentFunction& f) {
  Vector out(data.length());
  for (int t = 0; t < data.length(); ++t) out[t] = f(data.rescaled_time(t));
  return out;
}

/// Values of a component at every observation of covariate k.
inline Vector eval_over_covariate(const TimeSeriesDataset& data, int k, const ComponentFunction& f) {
  Vector out(data.length());
  for (int t = 0; t < data.length(); ++t) out[t] = f(data.covariates()(t, k));
  return out;
}

}  // namespace vcam::detail
