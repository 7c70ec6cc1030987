#pragma once

/// Three-step spline estimation of the varying-coefficient additive model and
/// BIC selection of the segment length I_T and the shared knot count K.
///
///   Step I   split time into N_T = T / I_T consecutive groups, fit a
///            per-group additive model, average the spline coefficients to
///            get gamma_k = w_k beta_k.
///   Step II  plug gamma_k in; fit the varying-coefficient model in time and
///            normalize to get alpha_k.
///   Step III plug alpha_k in; refit the additive functions beta_k.

#include "vcam/model.hpp"

#include <span>
#include <vector>

namespace vcam {

struct EstimationConfig {
  int order_step1 = 3;  ///< m1: covariate bases in Step I
  int order_step2 = 3;  ///< m2: time bases in Step II
  int order_step3 = 3;  ///< m3: covariate bases in Step III
  std::vector<int> K_grid{3, 4, 5, 6, 7, 8};
  std::vector<int> I_grid{20, 25, 30, 40, 50};
  double anchor = 0.0;
  /// Additional Step II / Step III passes after the first. Off by default.
  int extra_rounds = 0;
  /// Relative pivot tolerance of the per-group Step I solves. Directions the
  /// group barely excites (typically edge basis functions outside the group's
  /// covariate range) are dropped to the minimum-norm solution.
  double group_rank_tolerance = 1e-2;
};

/// Anchor actually used for covariate k: the configured anchor when it lies in
/// the observed range, otherwise the range midpoint.
double resolve_anchor(const TimeSeriesDataset& data, int k, double anchor);
std::vector<double> resolve_anchors(const TimeSeriesDataset& data, double anchor);

/// Quantile-knot basis of the given order on the observed range of covariate k.
SplineBasis covariate_basis(const TimeSeriesDataset& data, int k, int order, int interior_count);
std::vector<SplineBasis> covariate_bases(const TimeSeriesDataset& data, int order, int interior_count);

/// Uniform-knot bases on [0, 1] for alpha_0..alpha_p.
std::vector<SplineBasis> time_bases(int covariates, int order, int interior_count);

/// Whether (I, K) can be fitted: I divides T and 1 + p (K + m1) < I.
bool admissible(const TimeSeriesDataset& data, const EstimationConfig& config, int segment_length,
                int interior_count);

struct Step1Result {
  std::vector<ComponentFunction> gamma;  ///< centered at the anchors
  int group_count = 0;
  Vector group_intercepts;               ///< C_0s estimates
  std::vector<Vector> group_coefficients;  ///< h^(s), concatenated over k (full J per k)
  int rank_deficient_groups = 0;
};

/// Step I. Throws std::invalid_argument if I does not divide T or a group has
/// no more rows than 1 + sum_k J_k.
Step1Result step1_gamma(const TimeSeriesDataset& data, int segment_length, std::span<const SplineBasis> bases,
                        std::span<const double> anchors, double rank_tolerance = 1e-2);

struct Step2Result {
  std::vector<ComponentFunction> alpha;  ///< normalized, p + 1 entries
  std::vector<ComponentFunction> delta;  ///< unnormalized
  Vector scales;
};

/// Step II. gamma are the plug-in additive functions (any additive
/// components). Throws DegenerateComponentError if some ||gamma_k|| <= 1e-10
/// or the fitted delta_k vanishes.
Step2Result step2_alpha(const TimeSeriesDataset& data, std::span<const ComponentFunction> gamma,
                        std::span<const SplineBasis> time_bases);

/// Step III: least squares of y - alpha_0 on alpha_k(u) psi_bar_k(x).
std::vector<ComponentFunction> step3_beta(const TimeSeriesDataset& data, std::span<const ComponentFunction> alpha,
                                          std::span<const SplineBasis> bases, std::span<const double> anchors);

/// Runs Steps I-III once (plus config.extra_rounds of II/III) with shared K.
VcamFit fit_three_step(const TimeSeriesDataset& data, const EstimationConfig& config, int segment_length,
                       int interior_count);

/// log(RSS / T) + p * (J / T) * log(T / J), with J = K + m3.
double estimation_bic(double rss, int length, int covariates, int basis_dimension);

struct BicEntry {
  int segment_length = 0;
  int interior_count = 0;
  double rss = 0.0;
  double bic = 0.0;
};

struct BicSelection {
  int segment_length = 0;
  int interior_count = 0;
  VcamFit fit;
  std::vector<BicEntry> table;
};

/// Fits every admissible (I, K) in the config grids and returns the BIC
/// minimizer; ties go to the smaller K, then the smaller I. Throws
/// std::invalid_argument if no pair is admissible.
BicSelection select_by_bic(const TimeSeriesDataset& data, const EstimationConfig& config);

}  // namespace vcam
