#include "vcam/model.hpp"

#include <doctest.h>

#include <cmath>

using namespace vcam;

namespace {

ComponentFunction random_vc(const SplineBasis& basis, RngStream& rng, double offset) {
  Vector c(basis.dimension());
  for (auto& v : c) v = offset + rng.normal();
  return varying_coefficient(basis, c);
}

ComponentFunction random_additive(const SplineBasis& basis, RngStream& rng, double anchor) {
  Vector c(basis.dimension());
  for (auto& v : c) v = rng.normal();
  return additive(basis, c, anchor);
}

VcamFit random_fit(int p, std::uint64_t seed) {
  RngStream rng(seed, 0);
  const auto time = SplineBasis::uniform(3, 4);
  VcamFit fit;
  fit.alpha.push_back(random_vc(time, rng, 0.0));
  for (int k = 0; k < p; ++k) {
    ComponentFunction a = random_vc(time, rng, 0.5);
    a.coeffs /= a.l2_norm();
    fit.alpha.push_back(a);
    fit.beta.push_back(random_additive(SplineBasis::uniform(3, 3 + k, -2.0, 2.5), rng, 0.0));
  }
  fit.scales = Vector::Ones(p);
  return fit;
}

// Direct re-expansion with raw B-splines: sqrt(J) sum_l c_l B_l(x).
double expand(const ComponentFunction& f, double x) {
  const double root = std::sqrt(static_cast<double>(f.basis.dimension()));
  double v = root * f.coeffs.dot(f.basis.eval_raw(x));
  if (f.kind == ComponentKind::additive) v -= root * f.coeffs.dot(f.basis.eval_raw(f.anchor));
  return v;
}

}  // namespace

TEST_CASE("dataset validation") {
  CHECK_THROWS_AS(TimeSeriesDataset(Vector(0), Matrix(0, 1)), std::invalid_argument);
  CHECK_THROWS_AS(TimeSeriesDataset(Vector::Ones(3), Matrix::Ones(2, 1)), std::invalid_argument);
  Matrix x = Matrix::Ones(3, 1);
  x(1, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(TimeSeriesDataset(Vector::Ones(3), x), std::invalid_argument);

  Matrix ok(3, 2);
  ok << 1, -1, 2, 5, 0, 3;
  const TimeSeriesDataset data(Vector::Ones(3), ok);
  CHECK(data.covariate_range(0) == std::pair<double, double>{0, 2});
  CHECK(data.covariate_range(1) == std::pair<double, double>{-1, 5});
  CHECK(data.rescaled_time(2) == 1.0);
  const std::vector<int> swap{1, 0};
  CHECK(data.permuted(swap).covariates().col(0) == ok.col(1));
}

TEST_CASE("additive components vanish at the anchor") {
  RngStream rng(3, 0);
  for (int i = 0; i < 10; ++i) {
    const double anchor = -0.7 + 0.2 * i;
    const auto f = random_additive(SplineBasis::uniform(3, 5, -1, 1.5), rng, anchor);
    CHECK(f(anchor) == 0.0);
  }
  CHECK_THROWS_AS(additive(SplineBasis::uniform(3, 2), Vector::Ones(5), 2.0), std::invalid_argument);
}

TEST_CASE("evaluate examples") {
  VcamFit fit = random_fit(2, 4);
  const std::vector<double> at_anchor{0.0, 0.0};
  CHECK(evaluate(fit, 0.3, at_anchor) == fit.alpha[0](0.3));
  for (auto& b : fit.beta) b.coeffs.setZero();
  const std::vector<double> x{1.2, -0.4};
  CHECK(evaluate(fit, 0.8, x) == fit.alpha[0](0.8));
  CHECK_THROWS(evaluate(fit, 0.5, std::vector<double>{1.0}));
  CHECK_THROWS_AS(evaluate(fit, 0.5, std::vector<double>{1.0, 9.0}), std::domain_error);
}

TEST_CASE("evaluate matches an independent basis re-expansion") {
  RngStream rng(6, 0);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const VcamFit fit = random_fit(3, 50 + s);
    for (int i = 0; i < 20; ++i) {
      const double u = rng.uniform();
      std::vector<double> x(3);
      for (auto& v : x) v = -2.0 + 4.5 * rng.uniform();
      double direct = expand(fit.alpha[0], u);
      for (int k = 0; k < 3; ++k) direct += expand(fit.alpha[k + 1], u) * expand(fit.beta[k], x[k]);
      CHECK(std::abs(evaluate(fit, u, x) - direct) < 1e-12 * std::max(1.0, std::abs(direct)));
    }
  }
}

TEST_CASE("evaluate is invariant to joint sign and scale changes") {
  RngStream rng(7, 0);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const VcamFit fit = random_fit(3, 80 + s);
    for (double c : {-3.0, -1.0, -1e-3, 0.25, 7.5}) {
      for (int k = 0; k < 3; ++k) {
        VcamFit moved = fit;
        moved.alpha[k + 1].coeffs *= c;
        moved.beta[k].coeffs /= c;
        for (int i = 0; i < 10; ++i) {
          const double u = rng.uniform();
          std::vector<double> x(3);
          for (auto& v : x) v = -2.0 + 4.5 * rng.uniform();
          CHECK(std::abs(evaluate(moved, u, x) - evaluate(fit, u, x)) < 1e-10);
        }
      }
    }
  }
}

TEST_CASE("normalize examples") {
  const auto basis = SplineBasis::uniform(3, 4);
  RngStream rng(8, 0);
  ComponentFunction unit = random_vc(basis, rng, 2.0);
  unit.coeffs /= unit.l2_norm();
  REQUIRE(unit.integral() > 0.0);
  const ComponentFunction intercept = random_vc(basis, rng, 0.0);

  std::vector<ComponentFunction> delta{intercept, unit};
  auto out = normalize(delta);
  CHECK(out.alpha[1].coeffs == unit.coeffs);
  CHECK(out.scales[0] == 1.0);
  CHECK(out.alpha[0].coeffs == intercept.coeffs);

  delta[1].coeffs = -2.0 * unit.coeffs;
  out = normalize(delta);
  CHECK((out.alpha[1].coeffs - unit.coeffs).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(out.scales[0] == doctest::Approx(-2.0).epsilon(1e-14));

  delta[1].coeffs.setZero();
  CHECK_THROWS_AS(normalize(delta), DegenerateComponentError);
  try {
    normalize(delta);
  } catch (const DegenerateComponentError& e) {
    CHECK(e.component() == 1);
  }
}

TEST_CASE("normalize gives unit norm, positive integral, and is idempotent") {
  const auto basis = SplineBasis::uniform(3, 6);
  RngStream rng(10, 0);
  for (int i = 0; i < 50; ++i) {
    std::vector<ComponentFunction> delta{random_vc(basis, rng, 0.0)};
    for (int k = 0; k < 3; ++k) delta.push_back(random_vc(basis, rng, 0.3 * rng.normal()));
    const auto once = normalize(delta);
    for (int k = 1; k <= 3; ++k) {
      CHECK(std::abs(once.alpha[k].l2_norm() - 1.0) < 1e-8);
      CHECK(once.alpha[k].integral() >= 0.0);
      CHECK(std::abs(std::abs(once.scales[k - 1]) - delta[k].l2_norm()) < 1e-12 * delta[k].l2_norm());
    }
    const auto twice = normalize(once.alpha);
    for (int k = 0; k <= 3; ++k) CHECK((twice.alpha[k].coeffs - once.alpha[k].coeffs).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("additive norm and integral agree with quadrature") {
  const auto basis = SplineBasis::uniform(3, 4, -1, 2);
  RngStream rng(12, 0);
  const auto f = random_additive(basis, rng, 0.3);
  // Gauss rule per knot span, where the integrand is a polynomial.
  double sq = 0.0, in = 0.0;
  const auto knots = basis.knots();
  for (std::size_t s = 0; s + 1 < knots.size(); ++s) {
    if (!(knots[s] < knots[s + 1])) continue;
    const auto rule = gauss_legendre(8, knots[s], knots[s + 1]);
    for (int i = 0; i < 8; ++i) {
      sq += rule.weights[i] * f(rule.nodes[i]) * f(rule.nodes[i]);
      in += rule.weights[i] * f(rule.nodes[i]);
    }
  }
  CHECK(f.l2_norm() == doctest::Approx(std::sqrt(sq)).epsilon(1e-10));
  CHECK(f.integral() == doctest::Approx(in).epsilon(1e-10));
}

TEST_CASE("function grid") {
  const auto basis = SplineBasis::uniform(3, 4);
  const Vector one = Vector::Constant(basis.dimension(), 1.0 / std::sqrt(7.0));
  const auto grid = function_grid(varying_coefficient(basis, one), 3);
  REQUIRE(grid.size() == 3);
  CHECK(grid[0].first == 0.0);
  CHECK(grid[1].first == 0.5);
  CHECK(grid[2].first == 1.0);
  for (const auto& [x, v] : grid) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));

  RngStream rng(13, 0);
  const auto f = random_additive(SplineBasis::uniform(3, 4, -1, 1), rng, 0.0);
  const auto g = function_grid(f, 201);
  CHECK(g[100].first == 0.0);
  CHECK(g[100].second == 0.0);
  CHECK(g.back().first == 1.0);
  CHECK_THROWS(function_grid(f, 1));
}
