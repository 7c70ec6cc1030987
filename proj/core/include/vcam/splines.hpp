#pragma once

/// Clamped B-spline bases: knot construction, Cox-de Boor evaluation,
/// sqrt(J)-scaled and centered variants, derivative Gram matrices.

#include "vcam/numerics.hpp"

#include <optional>
#include <span>
#include <vector>

namespace vcam {

enum class KnotPlacement { uniform, quantile };

/// Largest admissible ratio between the widest and narrowest knot span.
inline constexpr double kMaxMeshRatio = 10.0;

struct SplineSpec {
  int order = 3;           ///< m; polynomial degree m - 1
  int interior_count = 0;  ///< K
  double lower = 0.0;
  double upper = 1.0;
  KnotPlacement placement = KnotPlacement::uniform;
  std::vector<double> sample;  ///< only read for quantile placement
};

/// Immutable clamped B-spline basis of dimension J = K + m on [lower, upper].
///
/// Knot vector: m copies of lower, K strictly increasing interior knots, m
/// copies of upper. Evaluation at `upper` uses the left-continuous extension
/// so the last basis function equals 1 there.
class SplineBasis {
 public:
  /// Builds the basis. Throws std::invalid_argument for m < 1, K < 0,
  /// lower >= upper, or a quantile sample with fewer than K + 2 distinct
  /// values.
  ///
  /// Quantile placement puts interior knots at the empirical quantiles
  /// l / (K + 1), l = 1..K. If duplicates collapse them to fewer than K
  /// distinct interior values, or the resulting mesh ratio exceeds
  /// kMaxMeshRatio, placement falls back to uniform.
  explicit SplineBasis(SplineSpec spec);

  static SplineBasis uniform(int order, int interior_count, double lower = 0.0, double upper = 1.0);

  /// Builds a basis from an explicit knot vector (used when deserializing a
  /// stored fit). The vector must be clamped and nondecreasing.
  static SplineBasis from_knots(int order, std::vector<double> knots);

  int order() const { return order_; }
  int interior_count() const { return interior_count_; }
  int dimension() const { return interior_count_ + order_; }
  double lower() const { return knots_.front(); }
  double upper() const { return knots_.back(); }
  bool contains(double x) const { return x >= lower() && x <= upper(); }
  std::span<const double> knots() const { return knots_; }
  std::span<const double> interior_knots() const {
    return std::span<const double>(knots_).subspan(order_, interior_count_);
  }
  /// True when quantile placement was requested but uniform was used.
  bool fell_back_to_uniform() const { return fell_back_; }
  double mesh_ratio() const;

  /// Raw B-spline values B_1..B_J at x. Throws std::domain_error outside
  /// [lower, upper].
  Vector eval_raw(double x) const;

  /// sqrt(J) * B(x), minus sqrt(J) * B(center) when a center is given.
  Vector eval_scaled(double x, std::optional<double> center = std::nullopt) const;

  /// d-th derivative of the raw basis at x (d >= m gives zeros).
  Vector eval_derivative(double x, int d) const;

  /// Integral of each raw basis function over the domain: (t_{l+m} - t_l) / m.
  Vector integrals() const;

  /// Greville abscissae; sum_l greville_l B_l(x) = x for m >= 2.
  Vector greville() const;

  /// Index i of the knot span [t_i, t_{i+1}) holding x, with m - 1 <= i <= m - 1 + K.
  int find_span(double x) const;

 private:
  SplineBasis() = default;
  void check_point(double x) const;
  /// Nonzero basis values and derivatives up to order n at x in span i.
  /// Row k holds the k-th derivative of B_{i-m+1}..B_i.
  Matrix local_derivatives(int span, double x, int n) const;

  int order_ = 1;
  int interior_count_ = 0;
  std::vector<double> knots_;
  bool fell_back_ = false;
};

struct GramMatrix {
  int derivative_order = 0;
  Matrix values;
};

/// Entry (j, j') = integral over the domain of D^d b_j * D^d b_j', computed by
/// m-point Gauss-Legendre on every nondegenerate knot span (exact for the
/// piecewise-polynomial integrand). `scaled` uses b = sqrt(J) B. d >= m yields
/// the zero matrix.
GramMatrix derivative_gram(const SplineBasis& basis, int d, bool scaled);

/// sqrt(c' G c) for G = derivative_gram(basis, d, scaled). Quadratic forms
/// in (-1e-12, 0) are clamped to zero; larger negative values throw.
double spline_l2_norm(const Vector& coeffs, const SplineBasis& basis, int d, bool scaled);

/// Same, reusing a precomputed Gram matrix.
double spline_l2_norm(const Vector& coeffs, const GramMatrix& gram);

}  // namespace vcam
