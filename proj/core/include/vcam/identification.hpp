#pragma once

/// Two-stage SCAD-penalized structure identification.
///
/// Stage 1 penalizes ||alpha_k'|| with beta fixed at the three-step estimate
/// and flags terms whose varying coefficient is constant (pure additive
/// terms). Stage 2 penalizes ||beta_k''|| with the stage-1 alpha fixed and
/// flags terms whose additive function is linear (pure varying-coefficient
/// terms). Both are solved by local quadratic approximation: repeated ridge
/// solves (D'D + T Omega) pi = D'y.

#include "vcam/model.hpp"

#include <span>
#include <vector>

namespace vcam {

/// n log-spaced points from lo to hi inclusive.
std::vector<double> log_spaced_grid(double lo, double hi, int n);

struct PenaltyConfig {
  double a = 3.7;
  std::vector<double> lambda_grid = log_spaced_grid(1e-3, 1.0, 20);
  std::vector<double> mu_grid = log_spaced_grid(1e-3, 1.0, 20);
  double zero_threshold = 1e-6;  ///< norms at or below this are flagged zero
  double lqa_floor = 1e-8;       ///< denominator floor in the LQA weights
  int max_iter = 50;
  double coef_tol = 1e-4;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// SCAD first derivative: lambda for theta <= lambda, (a lambda - theta)_+ / (a - 1)
/// above. Throws std::invalid_argument for theta < 0.
double scad_derivative(double theta, double lambda, double a);

/// SCAD penalty, the integral of scad_derivative from 0 to theta.
double scad_penalty(double theta, double lambda, double a);

struct LqaTrace {
  int iterations = 0;
  bool converged = false;
  /// Penalized objective 0.5 RSS + T sum_k p(c norm_k) / c after the initial
  /// fit and after every ridge update (c = K^{-3/2}).
  std::vector<double> objective;
  /// Per-iteration penalized norms, one entry per covariate.
  std::vector<std::vector<double>> norms;
};

struct Stage1Result {
  double lambda = 0.0;
  std::vector<ComponentFunction> alpha_p;  ///< p + 1; k >= 1 normalized
  std::vector<bool> alpha_constant;        ///< p flags
  std::vector<double> derivative_norms;    ///< final ||(pi_k' Phi_k)'||, p entries
  double rss = 0.0;                        ///< RSS_1 with normalized alpha_p and the plug-in beta
  int flagged = 0;                         ///< d_1
  LqaTrace trace;
};

/// Stage 1 at a single lambda. time_bases holds p + 1 bases for alpha_0..alpha_p.
Stage1Result stage1_alpha(const TimeSeriesDataset& data, std::span<const ComponentFunction> beta_hat, double lambda,
                          std::span<const SplineBasis> time_bases, const PenaltyConfig& cfg);

struct Stage2Result {
  double mu = 0.0;
  std::vector<ComponentFunction> beta_p;  ///< p entries, centered at the anchors
  std::vector<bool> beta_linear;
  std::vector<double> curvature_norms;    ///< final ||beta_k''||
  double rss = 0.0;                       ///< RSS_2
  int flagged = 0;                        ///< d_2
  LqaTrace trace;
};

/// Stage 2 at a single mu. Throws std::invalid_argument when a covariate basis
/// has order < 3 (its second-derivative Gram matrix would vanish).
Stage2Result stage2_beta(const TimeSeriesDataset& data, std::span<const ComponentFunction> alpha_p, double mu,
                         std::span<const SplineBasis> bases, std::span<const double> anchors,
                         const PenaltyConfig& cfg);

/// log(RSS / T) + flagged log(T) / T + (p - flagged) log(T / J) / (T / J).
double identification_bic(double rss, int length, int covariates, int flagged, int basis_dimension);

struct LambdaSelection {
  double lambda = 0.0;
  Stage1Result stage;
  std::vector<double> bic;  ///< aligned with the grid
};

/// BIC_1 over cfg.lambda_grid with J = time basis dimension; ties go to the
/// larger lambda.
LambdaSelection select_lambda(const TimeSeriesDataset& data, std::span<const ComponentFunction> beta_hat,
                              std::span<const SplineBasis> time_bases, const PenaltyConfig& cfg);

struct MuSelection {
  double mu = 0.0;
  Stage2Result stage;
  std::vector<double> bic;
};

/// BIC_2 over cfg.mu_grid with J = covariate basis dimension; ties go to the
/// larger mu.
MuSelection select_mu(const TimeSeriesDataset& data, std::span<const ComponentFunction> alpha_p,
                      std::span<const SplineBasis> bases, std::span<const double> anchors,
                      const PenaltyConfig& cfg);

struct IdentificationResult {
  std::vector<ComponentFunction> alpha_p;
  std::vector<ComponentFunction> beta_p;
  std::vector<bool> alpha_constant;  ///< term k is a pure additive term
  std::vector<bool> beta_linear;     ///< term k is a pure varying-coefficient term
  double lambda = 0.0;
  double mu = 0.0;
  int d1 = 0;
  int d2 = 0;
  std::vector<double> lambda_bic;
  std::vector<double> mu_bic;
  LqaTrace stage1_trace;
  LqaTrace stage2_trace;
  double rss1 = 0.0;
  double rss2 = 0.0;
};

/// select_lambda followed by select_mu on a completed three-step fit. Bases
/// and anchors are taken from the fit.
IdentificationResult identify(const TimeSeriesDataset& data, const VcamFit& fit, const PenaltyConfig& cfg);

enum class FitOutcome { correct, over, under };

/// Compares a flag vector against the truth mask of truly simple terms.
/// correct: identical sets. under: some truly nonparametric term was
/// simplified (the fitted model is too small). over: no wrong
/// simplification but some truly simple term was missed (the fitted model
/// keeps unneeded flexibility).
FitOutcome classify_flags(const std::vector<bool>& flagged, const std::vector<bool>& truth);

/// True-model outcome from both categories: correct when both are correct,
/// under when either is under, over otherwise.
FitOutcome classify_model(FitOutcome additive_terms, FitOutcome varying_terms);

const char* to_string(FitOutcome outcome);

}  // namespace vcam
