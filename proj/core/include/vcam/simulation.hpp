#pragma once

/// Simulation designs, comparison estimators and the Monte Carlo harness.

#include "vcam/estimation.hpp"
#include "vcam/identification.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vcam {

using UnivariateFunction = std::function<double(double)>;

/// Time-varying AR(2) covariate recursion
///   X_t = lag1(t / T) X_{t-1} + lag2(t / T) X_{t-2} + innovation_scale * zeta_t
/// started from X_0 = X_{-1} = 0.
struct ArRecursion {
  UnivariateFunction lag1;
  UnivariateFunction lag2;
  double innovation_scale = 0.5;
};

/// Data-generating process of a varying-coefficient additive model.
struct ScenarioModel {
  std::string name;
  std::vector<UnivariateFunction> alpha;  ///< p + 1 curves on [0, 1]
  std::vector<UnivariateFunction> beta;   ///< p additive functions with beta_k(0) = 0
  std::vector<ArRecursion> covariates;    ///< p recursions
  std::vector<bool> alpha_constant;       ///< truth mask: pure additive terms
  std::vector<bool> beta_linear;          ///< truth mask: pure varying-coefficient terms
  double sigma = 1.0;
  /// Optional heteroscedastic scale sigma(u, x); overrides `sigma` when set.
  std::function<double(double, std::span<const double>)> sigma_function;
  /// Leading observations generated and then discarded (0 = none).
  int burn_in = 0;

  int covariate_count() const { return static_cast<int>(beta.size()); }
  /// Throws std::invalid_argument if the pieces disagree on p.
  void validate() const;
};

/// Truth handle of one simulated dataset.
struct Truth {
  ScenarioModel model;
  Vector noise;  ///< standardized response noise eps_t
};

struct SimulatedData {
  TimeSeriesDataset data;
  Truth truth;
};

/// L2 norm on [0, 1] by 64-node Gauss-Legendre.
double l2_norm_unit_interval(const UnivariateFunction& f);

ScenarioModel example1_model();
ScenarioModel example2_model();

/// Simulates T observations. Draw order on the stream: all covariate
/// innovations row by row (t-major, k-minor, burn-in rows first), then the T
/// response noises. Throws std::invalid_argument for T < 10.
SimulatedData simulate(const ScenarioModel& model, int length, RngStream& rng);
SimulatedData generate_example1(int length, RngStream& rng);
SimulatedData generate_example2(int length, RngStream& rng);

/// y_t = m(t / T, x_t) + sigma(t / T, x_t) noise_t; reproduces the stored
/// response exactly.
Vector regenerate_response(const Truth& truth, const Matrix& x);

/// Composite-trapezoid integral of (estimate - truth)^2 over [a, b] on
/// n_points equally spaced nodes.
double mise(const UnivariateFunction& estimate, const UnivariateFunction& truth, double a, double b,
            int n_points = 201);
double mise(const ComponentFunction& estimate, const UnivariateFunction& truth, double a, double b,
            int n_points = 201);

/// [2.5%, 97.5%] empirical quantile range of covariate k.
std::pair<double, double> trimmed_range(const TimeSeriesDataset& data, int k);

/// Step-II fit with the true additive functions plugged in, then normalized.
std::vector<ComponentFunction> oracle_alpha(const TimeSeriesDataset& data, std::span<const UnivariateFunction> true_beta,
                                            std::span<const SplineBasis> time_bases);

/// Step-III fit with the true varying coefficients plugged in.
std::vector<ComponentFunction> oracle_beta(const TimeSeriesDataset& data, std::span<const UnivariateFunction> true_alpha,
                                           std::span<const SplineBasis> bases, std::span<const double> anchors);

/// y = a_0(u) + sum_k a_k(u) x_k. a_k, k >= 1, are scaled to unit L2 norm
/// without a sign convention.
std::vector<ComponentFunction> fit_misspecified_vc(const TimeSeriesDataset& data,
                                                   std::span<const SplineBasis> time_bases);

struct MisspecifiedAdditiveFit {
  ComponentFunction time_curve;               ///< f_0(u), compared against alpha_0
  std::vector<ComponentFunction> additive;    ///< f_k(x), anchored like beta_k
};

/// y = f_0(u) + sum_k f_k(x_k).
MisspecifiedAdditiveFit fit_misspecified_additive(const TimeSeriesDataset& data, const SplineBasis& time_basis,
                                                  std::span<const SplineBasis> bases,
                                                  std::span<const double> anchors);

enum class Example { ex1, ex2, custom };

const char* to_string(Example example);
/// Throws std::invalid_argument for unknown names.
Example parse_example(const std::string& name);

struct ScenarioSpec {
  Example example = Example::ex1;
  int length = 600;        ///< T
  int replications = 100;  ///< Q
  std::uint64_t base_seed = 20240601;
  EstimationConfig estimation;
  PenaltyConfig penalty;
  /// Fixed (I, K); when either is unset the pair is chosen by BIC over the
  /// estimation grids.
  std::optional<int> segment_length;
  std::optional<int> interior_count;
  bool identify = false;     ///< run two-stage identification per replicate
  bool comparisons = true;   ///< oracle and misspecified estimators
  double sigma = 1.0;
  std::optional<ScenarioModel> custom_model;

  ScenarioModel model() const;
  void validate() const;
};

struct MiseSummary {
  std::string estimator;
  std::string function;
  double mean = 0.0;
  double sd = 0.0;
  int count = 0;
};

struct OutcomeCounts {
  int correct = 0;
  int over = 0;
  int under = 0;
  int total() const { return correct + over + under; }
  void add(FitOutcome outcome);
};

struct ReplicateFailure {
  int replicate = 0;
  std::string message;
};

struct MonteCarloReport {
  std::string scenario;
  int length = 0;
  int replications = 0;
  std::uint64_t base_seed = 0;
  int succeeded = 0;
  std::vector<ReplicateFailure> failures;
  std::vector<MiseSummary> mise;  ///< estimator-major, function-minor
  bool identification = false;
  OutcomeCounts additive_terms;
  OutcomeCounts varying_terms;
  OutcomeCounts true_model;
  /// Histograms keyed by "I=25,K=4", "lambda=0.05", "mu=0.1".
  std::map<std::string, int> chosen_parameters;
  double wall_seconds = 0.0;

  /// nullptr when absent.
  const MiseSummary* find(const std::string& estimator, const std::string& function) const;
};

/// Runs spec.replications independent replicates; replicate q (1-based) uses
/// RngStream(base_seed, q). Results are reduced in replicate order, so the
/// report (except wall_seconds) does not depend on `threads`. Replicates that
/// throw are excluded and listed in `failures`.
MonteCarloReport run_monte_carlo(const ScenarioSpec& spec, int threads = 1);

}  // namespace vcam
