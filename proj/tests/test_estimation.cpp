#include "vcam/estimation.hpp"
#include "vcam/simulation.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace vcam;
using vcam::testing::max_abs_difference;

namespace {

ComponentFunction constant_curve(const SplineBasis& basis, double level) {
  return varying_coefficient(basis, Vector::Constant(basis.dimension(), level / std::sqrt(double(basis.dimension()))));
}

struct Noiseless {
  TimeSeriesDataset data;
  std::vector<ComponentFunction> alpha;
  std::vector<ComponentFunction> beta;
};

// sigma = 0, constant varying coefficients, additive parts in the covariate
// spline space of order 3 with K interior knots.
Noiseless noiseless_constant_alpha(int length, int p, int K, std::uint64_t seed) {
  const Matrix x = testing::uniform_covariates(length, p, seed);
  const TimeSeriesDataset shape(Vector::Zero(length), x);
  Noiseless out;
  out.beta = testing::in_space_beta(shape, 3, K, seed);
  const auto time = SplineBasis::uniform(3, K);
  out.alpha.push_back(constant_curve(time, 0.8));
  for (int k = 0; k < p; ++k) out.alpha.push_back(constant_curve(time, 1.0));
  out.data = TimeSeriesDataset(testing::response(shape, out.alpha, out.beta), x);
  return out;
}

// Plain additive regression y ~ 1 + sum_k psi_bar_k on the whole sample,
// assembled here independently of the estimator's design helpers.
std::vector<ComponentFunction> pooled_additive_fit(const TimeSeriesDataset& data, const Vector& y,
                                                   std::span<const SplineBasis> bases,
                                                   std::span<const double> anchors) {
  const int p = data.covariate_count();
  int cols = 1;
  for (const auto& b : bases) cols += b.dimension();
  Matrix X(data.length(), cols);
  for (int t = 0; t < data.length(); ++t) {
    X(t, 0) = 1.0;
    int c = 1;
    for (int k = 0; k < p; ++k) {
      const Vector v = centered_basis(bases[k], data.covariates()(t, k), anchors[k]);
      X.row(t).segment(c, v.size()) = v.transpose();
      c += static_cast<int>(v.size());
    }
  }
  const Vector h = least_squares(X, y);
  std::vector<ComponentFunction> out;
  int c = 1;
  for (int k = 0; k < p; ++k) {
    out.push_back(additive(bases[k], h.segment(c, bases[k].dimension()), anchors[k]));
    c += bases[k].dimension();
  }
  return out;
}

}  // namespace

TEST_CASE("admissibility and step I preconditions") {
  RngStream rng(1, 1);
  const auto sim = generate_example1(600, rng);
  EstimationConfig cfg;
  CHECK(admissible(sim.data, cfg, 25, 4));
  CHECK_FALSE(admissible(sim.data, cfg, 35, 4));   // does not divide T
  CHECK_FALSE(admissible(sim.data, cfg, 15, 4));   // 1 + 2 * 7 = 15 columns
  const auto bases = covariate_bases(sim.data, 3, 4);
  const auto anchors = resolve_anchors(sim.data, 0.0);
  CHECK_THROWS_AS(step1_gamma(sim.data, 7, bases, anchors), std::invalid_argument);
  CHECK_THROWS_AS(step1_gamma(sim.data, 15, bases, anchors), std::invalid_argument);
}

TEST_CASE("anchor resolution falls back to the range midpoint") {
  Matrix x(4, 2);
  x << 1, -1, 2, 0, 3, 1, 4, 2;
  const TimeSeriesDataset data(Vector::Zero(4), x);
  CHECK(resolve_anchor(data, 0, 0.0) == 2.5);
  CHECK(resolve_anchor(data, 1, 0.0) == 0.0);
}

TEST_CASE("a single group reduces to one plain additive fit") {
  RngStream rng(2, 1);
  const auto sim = generate_example1(300, rng);
  const auto bases = covariate_bases(sim.data, 3, 4);
  const auto anchors = resolve_anchors(sim.data, 0.0);
  const auto step1 = step1_gamma(sim.data, 300, bases, anchors);
  CHECK(step1.group_count == 1);
  const auto pooled = pooled_additive_fit(sim.data, sim.data.response(), bases, anchors);
  for (int k = 0; k < 2; ++k) CHECK(max_abs_difference(step1.gamma[k], pooled[k]) < 1e-8);
}

TEST_CASE("step I grouping covers every observation once") {
  RngStream rng(3, 1);
  const auto sim = generate_example1(600, rng);
  const auto bases = covariate_bases(sim.data, 3, 4);
  const auto anchors = resolve_anchors(sim.data, 0.0);
  const auto step1 = step1_gamma(sim.data, 25, bases, anchors);
  CHECK(step1.group_count * 25 == 600);
  CHECK(step1.group_coefficients.size() == 24u);
  CHECK(step1.group_intercepts.size() == 24);
  for (int k = 0; k < 2; ++k) CHECK(step1.gamma[k](anchors[k]) == 0.0);
}

TEST_CASE("noiseless step I recovers scaled additive functions") {
  const auto truth = noiseless_constant_alpha(1200, 2, 3, 21);
  const auto bases = covariate_bases(truth.data, 3, 3);
  const auto anchors = resolve_anchors(truth.data, 0.0);
  const auto step1 = step1_gamma(truth.data, 100, bases, anchors);
  for (int k = 0; k < 2; ++k) CHECK(max_abs_difference(step1.gamma[k], truth.beta[k]) < 1e-6);
}

TEST_CASE("group averaging equals the mean multiplier times the pooled fit") {
  const int T = 1200, I = 100, p = 2, K = 3;
  const Matrix x = testing::uniform_covariates(T, p, 31);
  const TimeSeriesDataset shape(Vector::Zero(T), x);
  const auto beta = testing::in_space_beta(shape, 3, K, 31);
  const auto bases = covariate_bases(shape, 3, K);
  const auto anchors = resolve_anchors(shape, 0.0);

  RngStream rng(32, 0);
  const int groups = T / I;
  Matrix C(groups, p + 1);
  for (auto& v : C.reshaped()) v = 0.5 + rng.uniform();
  Vector y(T), y_unit(T);
  for (int t = 0; t < T; ++t) {
    const int s = t / I;
    y[t] = C(s, 0);
    y_unit[t] = 0.0;
    for (int k = 0; k < p; ++k) {
      y[t] += C(s, k + 1) * beta[k](x(t, k));
      y_unit[t] += beta[k](x(t, k));
    }
  }
  const auto step1 = step1_gamma(TimeSeriesDataset(y, x), I, bases, anchors);
  const auto pooled = pooled_additive_fit(shape, y_unit, bases, anchors);
  for (int k = 0; k < p; ++k) {
    const double mean_multiplier = C.col(k + 1).mean();
    ComponentFunction expected = pooled[k];
    expected.coeffs *= mean_multiplier;
    CHECK(max_abs_difference(step1.gamma[k], expected) < 1e-8);
  }
  for (int s = 0; s < groups; ++s) CHECK(step1.group_intercepts[s] == doctest::Approx(C(s, 0)).epsilon(1e-8));
}

TEST_CASE("noiseless step II recovers varying coefficients") {
  const int T = 900, p = 2;
  const Matrix x = testing::uniform_covariates(T, p, 41);
  const TimeSeriesDataset shape(Vector::Zero(T), x);
  const auto beta = testing::in_space_beta(shape, 3, 4, 41);
  const auto time = time_bases(p, 3, 5);
  std::vector<ComponentFunction> alpha{testing::in_space_alpha(time[0], 42, 0)};
  for (int k = 1; k <= p; ++k) alpha.push_back(testing::in_space_alpha(time[k], 42, k));
  const TimeSeriesDataset data(testing::response(shape, alpha, beta), x);

  const auto step2 = step2_alpha(data, beta, time);
  for (int k = 0; k <= p; ++k) CHECK(max_abs_difference(step2.alpha[k], alpha[k]) < 1e-6);
  for (int k = 1; k <= p; ++k) {
    CHECK(std::abs(step2.alpha[k].l2_norm() - 1.0) < 1e-8);
    CHECK(step2.scales[k - 1] == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("step II without covariates is a spline regression on time") {
  RngStream rng(5, 0);
  const int T = 200;
  const Vector y = standard_normal(rng, T);
  const TimeSeriesDataset data(y, Matrix(T, 0));
  const auto time = time_bases(0, 3, 4);
  const auto step2 = step2_alpha(data, {}, time);
  Matrix X(T, time[0].dimension());
  for (int t = 0; t < T; ++t) X.row(t) = time[0].eval_scaled(data.rescaled_time(t)).transpose();
  const Vector c = least_squares(X, y);
  CHECK((step2.alpha[0].coeffs - c).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("step II rejects a vanishing plug-in") {
  RngStream rng(6, 1);
  const auto sim = generate_example1(300, rng);
  const auto bases = covariate_bases(sim.data, 3, 4);
  std::vector<ComponentFunction> gamma{additive(bases[0], Vector::Zero(7), 0.0),
                                       additive(bases[1], Vector::Ones(7), 0.0)};
  CHECK_THROWS_AS(step2_alpha(sim.data, gamma, time_bases(2, 3, 4)), DegenerateComponentError);
}

TEST_CASE("noiseless step III recovers additive functions") {
  const int T = 900, p = 3;
  const Matrix x = testing::uniform_covariates(T, p, 51);
  const TimeSeriesDataset shape(Vector::Zero(T), x);
  const auto beta = testing::in_space_beta(shape, 3, 4, 51);
  const auto time = time_bases(p, 3, 4);
  std::vector<ComponentFunction> alpha{testing::in_space_alpha(time[0], 52, 0)};
  for (int k = 1; k <= p; ++k) alpha.push_back(testing::in_space_alpha(time[k], 52, k));
  const TimeSeriesDataset data(testing::response(shape, alpha, beta), x);

  const auto bases = covariate_bases(data, 3, 4);
  const auto anchors = resolve_anchors(data, 0.0);
  const auto fitted = step3_beta(data, alpha, bases, anchors);
  for (int k = 0; k < p; ++k) {
    CHECK(max_abs_difference(fitted[k], beta[k]) < 1e-6);
    CHECK(fitted[k](anchors[k]) == 0.0);
  }

  // Pure intercept response leaves nothing for the additive parts.
  Vector y0(T);
  for (int t = 0; t < T; ++t) y0[t] = alpha[0](data.rescaled_time(t));
  const auto none = step3_beta(TimeSeriesDataset(y0, x), alpha, bases, anchors);
  for (const auto& f : none) CHECK(f.coeffs.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("noiseless three-step fit is exact") {
  const auto truth = noiseless_constant_alpha(1200, 2, 3, 61);
  EstimationConfig cfg;
  const VcamFit fit = fit_three_step(truth.data, cfg, 100, 3);
  CHECK(fit.diagnostics.rss < 1e-10 * 1200);
  CHECK(fit.diagnostics.rounds == 1);
  for (int k = 0; k <= 2; ++k) CHECK(max_abs_difference(fit.alpha[k], truth.alpha[k]) < 1e-6);
  for (int k = 0; k < 2; ++k) CHECK(max_abs_difference(fit.beta[k], truth.beta[k]) < 1e-6);
}

TEST_CASE("three-step fit invariants on simulated data") {
  for (std::uint64_t q = 1; q <= 3; ++q) {
    RngStream rng(7, q);
    const auto sim = generate_example1(600, rng);
    const VcamFit fit = fit_three_step(sim.data, EstimationConfig{}, 25, 4);
    for (int k = 1; k <= 2; ++k) {
      CHECK(std::abs(fit.alpha[k].l2_norm() - 1.0) < 1e-8);
      CHECK(fit.alpha[k].integral() >= 0.0);
      CHECK(fit.beta[k - 1](fit.beta[k - 1].anchor) == 0.0);
    }
    CHECK(fit.diagnostics.rss == doctest::Approx(residual_sum_of_squares(sim.data, fit.alpha, fit.beta)));
    CHECK(fit.diagnostics.bic == doctest::Approx(estimation_bic(fit.diagnostics.rss, 600, 2, 7)));
  }
}

TEST_CASE("step III refit never loses to the step II plug-in") {
  for (std::uint64_t q = 1; q <= 5; ++q) {
    RngStream rng(8, q);
    const auto sim = generate_example1(600, rng);
    const auto bases = covariate_bases(sim.data, 3, 4);
    const auto anchors = resolve_anchors(sim.data, 0.0);
    const auto time = time_bases(2, 3, 4);
    const auto step1 = step1_gamma(sim.data, 25, bases, anchors);
    const auto step2 = step2_alpha(sim.data, step1.gamma, time);
    const auto beta = step3_beta(sim.data, step2.alpha, bases, anchors);

    // The same fitted surface written as (delta, gamma) and as (alpha, scale * gamma).
    std::vector<ComponentFunction> rescaled = step1.gamma;
    for (int k = 0; k < 2; ++k) rescaled[k].coeffs *= step2.scales[k];
    for (int t = 0; t < 600; t += 7) {
      const std::vector<double> x{sim.data.covariates()(t, 0), sim.data.covariates()(t, 1)};
      const double u = sim.data.rescaled_time(t);
      CHECK(std::abs(evaluate(step2.delta, step1.gamma, u, x) - evaluate(step2.alpha, rescaled, u, x)) < 1e-8);
    }
    const double plug_in = residual_sum_of_squares(sim.data, step2.alpha, rescaled);
    CHECK(residual_sum_of_squares(sim.data, step2.alpha, beta) <= plug_in * (1 + 1e-12));
  }
}

TEST_CASE("permuting covariates permutes the fit") {
  RngStream rng(9, 1);
  const auto sim = generate_example1(600, rng);
  const std::vector<int> order{1, 0};
  const VcamFit a = fit_three_step(sim.data, EstimationConfig{}, 25, 4);
  const VcamFit b = fit_three_step(sim.data.permuted(order), EstimationConfig{}, 25, 4);
  CHECK(max_abs_difference(a.alpha[0], b.alpha[0]) < 1e-10);
  for (int k = 0; k < 2; ++k) {
    CHECK(max_abs_difference(a.alpha[k + 1], b.alpha[order[k] + 1]) < 1e-10);
    CHECK(max_abs_difference(a.beta[k], b.beta[order[k]]) < 1e-10);
  }
}

TEST_CASE("BIC selection") {
  RngStream rng(10, 1);
  const auto sim = generate_example1(600, rng);
  EstimationConfig single;
  single.K_grid = {4};
  single.I_grid = {25};
  const auto one = select_by_bic(sim.data, single);
  CHECK(one.segment_length == 25);
  CHECK(one.interior_count == 4);
  CHECK(one.table.size() == 1u);

  // With equal RSS the penalty grows with the basis dimension while T / J > e.
  CHECK(estimation_bic(500.0, 600, 2, 6) < estimation_bic(500.0, 600, 2, 7));

  EstimationConfig cfg;
  const auto sel = select_by_bic(sim.data, cfg);
  for (const auto& e : sel.table) CHECK(sel.fit.diagnostics.bic <= e.bic);
  CHECK(sel.fit.diagnostics.segment_length == sel.segment_length);

  EstimationConfig impossible;
  impossible.I_grid = {7};
  CHECK_THROWS_AS(select_by_bic(sim.data, impossible), std::invalid_argument);
}

TEST_CASE("extra rounds are opt-in") {
  RngStream rng(11, 1);
  const auto sim = generate_example1(600, rng);
  EstimationConfig cfg;
  cfg.extra_rounds = 2;
  const VcamFit fit = fit_three_step(sim.data, cfg, 25, 4);
  CHECK(fit.diagnostics.rounds == 3);
  CHECK(std::abs(fit.alpha[1].l2_norm() - 1.0) < 1e-8);
}
