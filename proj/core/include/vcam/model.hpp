#pragma once

/// Varying-coefficient additive model
///
///   m(u, x) = alpha_0(u) + sum_k alpha_k(u) * beta_k(x_k),   u = t / T,
///
/// identified by ||alpha_k||_L2 = 1, beta_k(anchor) = 0 and the sign
/// convention integral(alpha_k) >= 0.

#include "vcam/splines.hpp"

#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vcam {

/// Observed sample {(t / T, y_t, x_t)}, t = 1..T.
class TimeSeriesDataset {
 public:
  TimeSeriesDataset() = default;
  /// x is T x p. Throws std::invalid_argument on shape mismatch, T < 1 or
  /// non-finite values.
  TimeSeriesDataset(Vector y, Matrix x);

  int length() const { return static_cast<int>(y_.size()); }
  int covariate_count() const { return static_cast<int>(x_.cols()); }
  const Vector& response() const { return y_; }
  const Matrix& covariates() const { return x_; }
  /// Rescaled time of 0-based row i: (i + 1) / T.
  double rescaled_time(int row) const { return static_cast<double>(row + 1) / length(); }
  /// Observed [min, max] of covariate k (0-based).
  std::pair<double, double> covariate_range(int k) const { return ranges_.at(k); }

  /// Copy with covariate columns permuted: column j of the result is
  /// column order[j] of this dataset.
  TimeSeriesDataset permuted(std::span<const int> order) const;

  bool operator==(const TimeSeriesDataset& other) const;

 private:
  Vector y_;
  Matrix x_;
  std::vector<std::pair<double, double>> ranges_;
};

enum class ComponentKind { varying_coefficient, additive };

/// Exact structural shape of a component. Flagged identification outputs are
/// stored as exact constants (alpha) or exact lines through the anchor
/// (beta); their higher derivatives vanish identically.
enum class ComponentShape { spline, constant, linear };

/// One fitted component function on a spline basis.
///
/// varying_coefficient: f(u) = c' phi(u), phi = sqrt(J) B.
/// additive:            f(x) = c' [psi(x) - psi(anchor)], so f(anchor) = 0
///                      holds exactly.
struct ComponentFunction {
  SplineBasis basis;
  Vector coeffs;
  ComponentKind kind = ComponentKind::varying_coefficient;
  double anchor = 0.0;
  ComponentShape shape = ComponentShape::spline;

  double operator()(double x) const;
  /// L2 norm over the basis domain of the d-th derivative.
  double derivative_norm(int d) const;
  double l2_norm() const { return derivative_norm(0); }
  /// Integral over the basis domain.
  double integral() const;
};

ComponentFunction varying_coefficient(SplineBasis basis, Vector coeffs);
ComponentFunction additive(SplineBasis basis, Vector coeffs, double anchor);

/// Row vector of centered scaled basis values psi(x) - psi(anchor).
Vector centered_basis(const SplineBasis& basis, double x, double anchor);

/// Raised when a varying-coefficient component has (numerically) zero norm
/// and cannot be normalized.
class DegenerateComponentError : public std::runtime_error {
 public:
  DegenerateComponentError(int component, const std::string& where);
  int component() const { return component_; }

 private:
  int component_;
};

struct FitDiagnostics {
  double rss = 0.0;
  double bic = 0.0;
  int segment_length = 0;    ///< I_T
  int interior_knots = 0;    ///< K
  int group_count = 0;       ///< N_T
  int rank_deficient_groups = 0;
  int rounds = 1;            ///< Step II/III passes
};

/// A fitted model with identifiability normalization applied.
struct VcamFit {
  std::vector<ComponentFunction> alpha;  ///< p + 1 entries; alpha[0] is the intercept curve
  std::vector<ComponentFunction> beta;   ///< p entries
  Vector scales;                         ///< signed ||delta_k|| absorbed during normalization
  FitDiagnostics diagnostics;

  int covariate_count() const { return static_cast<int>(beta.size()); }
};

/// alpha_0(u) + sum_k alpha_k(u) beta_k(x_k).
double evaluate(const VcamFit& fit, double u, std::span<const double> x);
double evaluate(std::span<const ComponentFunction> alpha, std::span<const ComponentFunction> beta,
                double u, std::span<const double> x);

/// In-sample residual sum of squares.
double residual_sum_of_squares(const TimeSeriesDataset& data, std::span<const ComponentFunction> alpha,
                               std::span<const ComponentFunction> beta);

struct NormalizedCoefficients {
  std::vector<ComponentFunction> alpha;
  Vector scales;  ///< signed: negative when the sign convention flipped alpha_k
};

/// alpha_0 = delta_0; alpha_k = delta_k / scale_k with scale_k = +-||delta_k||
/// chosen so that integral(alpha_k) >= 0. The paired beta_k absorbs scale_k.
/// Throws DegenerateComponentError when ||delta_k|| <= 1e-10.
NormalizedCoefficients normalize(std::span<const ComponentFunction> delta);

/// n_points equally spaced (x, f(x)) pairs over the basis domain, endpoints
/// included exactly.
std::vector<std::pair<double, double>> function_grid(const ComponentFunction& f, int n_points);

}  // namespace vcam
