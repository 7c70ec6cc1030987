#include "vcam/simulation.hpp"

#include "design.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <thread>

namespace vcam {

namespace {

constexpr double kPi = std::numbers::pi;

double ex1_alpha1_raw(double u) { return 2.0 * u * std::sin(2.0 * kPi * u) + 1.0; }
double ex1_alpha2_raw(double u) { return 3.0 * (1.0 - u) * (1.0 - u) * std::cos(2.0 * kPi * u) + 1.0; }
double ex2_alpha4_raw(double u) { return 3.0 * u * (1.0 - u) * (1.0 - u) + 1.0; }

UnivariateFunction normalized(double (*raw)(double)) {
  const double norm = l2_norm_unit_interval(raw);
  return [raw, norm](double u) { return raw(u) / norm; };
}

UnivariateFunction constant(double c) {
  return [c](double) { return c; };
}

UnivariateFunction linear_in_u(double slope) {
  return [slope](double u) { return slope * u; };
}

UnivariateFunction quadratic_in_u(double slope) {
  return [slope](double u) { return slope * u * u; };
}

std::vector<UnivariateFunction> example1_alpha() {
  return {[](double u) { return 1.5 * u + 2.0 * std::cos(2.0 * kPi * u); }, normalized(ex1_alpha1_raw),
          normalized(ex1_alpha2_raw)};
}

double ex1_beta1(double x) { return 0.7 * std::sin(0.5 * kPi * x) - 0.5 * x * (2.0 - x) * (2.0 - x); }

double quantile_sorted(const std::vector<double>& sorted, double prob) {
  const double pos = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double sample_sd(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

double l2_norm_unit_interval(const UnivariateFunction& f) {
  const QuadratureRule rule = gauss_legendre(64, 0.0, 1.0);
  double sum = 0.0;
  for (int i = 0; i < 64; ++i) sum += rule.weights[i] * f(rule.nodes[i]) * f(rule.nodes[i]);
  return std::sqrt(sum);
}

void ScenarioModel::validate() const {
  const auto p = beta.size();
  if (alpha.size() != p + 1 || covariates.size() != p || alpha_constant.size() != p || beta_linear.size() != p) {
    throw std::invalid_argument("scenario '" + name + "': alpha needs p + 1 curves and beta, covariate "
                                "recursions and truth masks need p entries");
  }
  for (const auto& r : covariates) {
    if (!r.lag1 || !r.lag2) throw std::invalid_argument("scenario '" + name + "': AR recursion missing a lag function");
  }
  if (burn_in < 0) throw std::invalid_argument("scenario burn-in must be >= 0");
}

ScenarioModel example1_model() {
  ScenarioModel m;
  m.name = "ex1";
  m.alpha = example1_alpha();
  m.beta = {ex1_beta1, [](double x) { return 2.0 * x * std::cos(0.5 * kPi * x) - 3.5 * std::sin(0.5 * kPi * x); }};
  m.covariates = {{linear_in_u(0.6), constant(0.0), 0.5}, {linear_in_u(0.9), quadratic_in_u(-0.6), 0.5}};
  m.alpha_constant = {false, false};
  m.beta_linear = {false, false};
  return m;
}

ScenarioModel example2_model() {
  ScenarioModel m;
  m.name = "ex2";
  m.alpha = example1_alpha();
  m.alpha.push_back(constant(1.0));
  m.alpha.push_back(normalized(ex2_alpha4_raw));
  m.beta = {ex1_beta1,
            [](double x) { return 3.0 * x * std::cos(0.5 * kPi * x) - 0.8 * std::sin(0.5 * kPi * x); },
            [](double x) { return 2.0 * x * (1.0 + x); }, [](double x) { return x; }};
  m.covariates = {{linear_in_u(0.7), quadratic_in_u(-0.5), 0.5},
                  {linear_in_u(0.8), quadratic_in_u(-0.2), 0.5},
                  {linear_in_u(0.6), quadratic_in_u(-0.3), 0.5},
                  {linear_in_u(0.6), constant(0.0), 0.5}};
  m.alpha_constant = {false, false, true, false};
  m.beta_linear = {false, false, false, true};
  return m;
}

Vector regenerate_response(const Truth& truth, const Matrix& x) {
  const ScenarioModel& m = truth.model;
  const int T = static_cast<int>(x.rows());
  const int p = m.covariate_count();
  if (truth.noise.size() != T || x.cols() != p) throw std::invalid_argument("regenerate_response: shape mismatch");
  Vector y(T);
  std::vector<double> row(p);
  for (int t = 0; t < T; ++t) {
    const double u = static_cast<double>(t + 1) / T;
    double mean = m.alpha[0](u);
    for (int k = 0; k < p; ++k) {
      row[k] = x(t, k);
      mean += m.alpha[k + 1](u) * m.beta[k](row[k]);
    }
    const double scale = m.sigma_function ? m.sigma_function(u, row) : m.sigma;
    y[t] = mean + scale * truth.noise[t];
  }
  return y;
}

SimulatedData simulate(const ScenarioModel& model, int length, RngStream& rng) {
  model.validate();
  if (length < 10) throw std::invalid_argument("simulate: T must be >= 10, got " + std::to_string(length));
  const int p = model.covariate_count();
  const int total = length + model.burn_in;
  Matrix innovations(total, p);
  for (int t = 0; t < total; ++t) {
    for (int k = 0; k < p; ++k) innovations(t, k) = rng.normal();
  }
  Matrix x(length, p);
  for (int k = 0; k < p; ++k) {
    const ArRecursion& ar = model.covariates[k];
    double lag1 = 0.0;
    double lag2 = 0.0;
    for (int t = 0; t < total; ++t) {
      const int kept = t - model.burn_in;
      const double u = kept >= 0 ? static_cast<double>(kept + 1) / length : 0.0;
      const double value = ar.lag1(u) * lag1 + ar.lag2(u) * lag2 + ar.innovation_scale * innovations(t, k);
      lag2 = lag1;
      lag1 = value;
      if (kept >= 0) x(kept, k) = value;
    }
  }
  Truth truth{model, standard_normal(rng, length)};
  Vector y = regenerate_response(truth, x);
  return {TimeSeriesDataset(std::move(y), std::move(x)), std::move(truth)};
}

SimulatedData generate_example1(int length, RngStream& rng) { return simulate(example1_model(), length, rng); }
SimulatedData generate_example2(int length, RngStream& rng) { return simulate(example2_model(), length, rng); }

double mise(const UnivariateFunction& estimate, const UnivariateFunction& truth, double a, double b, int n_points) {
  if (n_points < 2) throw std::invalid_argument("mise: need at least 2 grid points");
  const double h = (b - a) / (n_points - 1);
  double sum = 0.0;
  for (int i = 0; i < n_points; ++i) {
    const double x = (i == n_points - 1) ? b : a + h * i;
    const double d = estimate(x) - truth(x);
    const double w = (i == 0 || i == n_points - 1) ? 0.5 : 1.0;
    sum += w * d * d;
  }
  return sum * h;
}

double mise(const ComponentFunction& estimate, const UnivariateFunction& truth, double a, double b, int n_points) {
  return mise([&estimate](double x) { return estimate(x); }, truth, a, b, n_points);
}

std::pair<double, double> trimmed_range(const TimeSeriesDataset& data, int k) {
  std::vector<double> v = detail::column(data, k);
  std::sort(v.begin(), v.end());
  return {quantile_sorted(v, 0.025), quantile_sorted(v, 0.975)};
}

std::vector<ComponentFunction> oracle_alpha(const TimeSeriesDataset& data, std::span<const UnivariateFunction> true_beta,
                                            std::span<const SplineBasis> bases) {
  const int p = data.covariate_count();
  if (static_cast<int>(true_beta.size()) != p || static_cast<int>(bases.size()) != p + 1) {
    throw std::invalid_argument("oracle_alpha: need p true beta functions and p + 1 time bases");
  }
  Eigen::Index cols = 0;
  for (const auto& b : bases) cols += b.dimension();
  DesignMatrix X(data.length(), cols);
  Eigen::Index c = 0;
  for (int k = 0; k <= p; ++k) {
    const Matrix phi = detail::time_design(data, bases[k]);
    if (k == 0) {
      X.middleCols(c, phi.cols()) = phi;
    } else {
      Vector b(data.length());
      for (int t = 0; t < data.length(); ++t) b[t] = true_beta[k - 1](data.covariates()(t, k - 1));
      X.middleCols(c, phi.cols()) = b.asDiagonal() * phi;
    }
    c += phi.cols();
  }
  const Vector coeffs = least_squares(X, data.response());
  std::vector<ComponentFunction> delta;
  c = 0;
  for (int k = 0; k <= p; ++k) {
    delta.push_back(varying_coefficient(bases[k], coeffs.segment(c, bases[k].dimension())));
    c += bases[k].dimension();
  }
  return normalize(delta).alpha;
}

std::vector<ComponentFunction> oracle_beta(const TimeSeriesDataset& data, std::span<const UnivariateFunction> true_alpha,
                                           std::span<const SplineBasis> bases, std::span<const double> anchors) {
  const int p = data.covariate_count();
  if (static_cast<int>(true_alpha.size()) != p + 1 || static_cast<int>(bases.size()) != p ||
      static_cast<int>(anchors.size()) != p) {
    throw std::invalid_argument("oracle_beta: need p + 1 true alpha curves, p bases and p anchors");
  }
  std::vector<ComponentFunction> out;
  if (p == 0) return out;
  Eigen::Index cols = 0;
  for (const auto& b : bases) cols += b.dimension() - 1;
  DesignMatrix X(data.length(), cols);
  Vector target = data.response();
  for (int t = 0; t < data.length(); ++t) target[t] -= true_alpha[0](data.rescaled_time(t));
  Eigen::Index c = 0;
  for (int k = 0; k < p; ++k) {
    const Matrix psi = detail::centered_design(detail::column(data, k), bases[k], anchors[k]);
    Vector a(data.length());
    for (int t = 0; t < data.length(); ++t) a[t] = true_alpha[k + 1](data.rescaled_time(t));
    X.middleCols(c, psi.cols()) = a.asDiagonal() * psi;
    c += psi.cols();
  }
  const Vector f = least_squares(X, target);
  c = 0;
  for (int k = 0; k < p; ++k) {
    const int J = bases[k].dimension();
    out.push_back(additive(bases[k], detail::expand_reduced(f.segment(c, J - 1)), anchors[k]));
    c += J - 1;
  }
  return out;
}

std::vector<ComponentFunction> fit_misspecified_vc(const TimeSeriesDataset& data,
                                                   std::span<const SplineBasis> bases) {
  const int p = data.covariate_count();
  if (static_cast<int>(bases.size()) != p + 1) throw std::invalid_argument("fit_misspecified_vc: need p + 1 time bases");
  Eigen::Index cols = 0;
  for (const auto& b : bases) cols += b.dimension();
  DesignMatrix X(data.length(), cols);
  Eigen::Index c = 0;
  for (int k = 0; k <= p; ++k) {
    const Matrix phi = detail::time_design(data, bases[k]);
    if (k == 0) {
      X.middleCols(c, phi.cols()) = phi;
    } else {
      X.middleCols(c, phi.cols()) = data.covariates().col(k - 1).asDiagonal() * phi;
    }
    c += phi.cols();
  }
  const Vector coeffs = least_squares(X, data.response());
  std::vector<ComponentFunction> out;
  c = 0;
  for (int k = 0; k <= p; ++k) {
    ComponentFunction f = varying_coefficient(bases[k], coeffs.segment(c, bases[k].dimension()));
    if (k > 0) {
      const double norm = f.l2_norm();
      if (!(norm > 1e-10)) throw DegenerateComponentError(k, "fit_misspecified_vc");
      f.coeffs /= norm;
    }
    out.push_back(std::move(f));
    c += bases[k].dimension();
  }
  return out;
}

MisspecifiedAdditiveFit fit_misspecified_additive(const TimeSeriesDataset& data, const SplineBasis& time_basis,
                                                  std::span<const SplineBasis> bases,
                                                  std::span<const double> anchors) {
  const int p = data.covariate_count();
  if (static_cast<int>(bases.size()) != p || static_cast<int>(anchors.size()) != p) {
    throw std::invalid_argument("fit_misspecified_additive: need p bases and p anchors");
  }
  Eigen::Index cols = time_basis.dimension();
  for (const auto& b : bases) cols += b.dimension() - 1;
  DesignMatrix X(data.length(), cols);
  X.leftCols(time_basis.dimension()) = detail::time_design(data, time_basis);
  Eigen::Index c = time_basis.dimension();
  for (int k = 0; k < p; ++k) {
    const Matrix psi = detail::centered_design(detail::column(data, k), bases[k], anchors[k]);
    X.middleCols(c, psi.cols()) = psi;
    c += psi.cols();
  }
  const Vector coeffs = least_squares(X, data.response());
  MisspecifiedAdditiveFit out{varying_coefficient(time_basis, coeffs.head(time_basis.dimension())), {}};
  c = time_basis.dimension();
  for (int k = 0; k < p; ++k) {
    const int J = bases[k].dimension();
    out.additive.push_back(additive(bases[k], detail::expand_reduced(coeffs.segment(c, J - 1)), anchors[k]));
    c += J - 1;
  }
  return out;
}

const char* to_string(Example example) {
  switch (example) {
    case Example::ex1: return "ex1";
    case Example::ex2: return "ex2";
    case Example::custom: return "custom";
  }
  return "unknown";
}

Example parse_example(const std::string& name) {
  if (name == "ex1") return Example::ex1;
  if (name == "ex2") return Example::ex2;
  if (name == "custom") return Example::custom;
  throw std::invalid_argument("unknown example '" + name + "' (expected ex1, ex2 or custom)");
}

ScenarioModel ScenarioSpec::model() const {
  ScenarioModel m;
  switch (example) {
    case Example::ex1: m = example1_model(); break;
    case Example::ex2: m = example2_model(); break;
    case Example::custom:
      if (!custom_model) throw std::invalid_argument("custom scenario needs a model");
      return *custom_model;
  }
  m.sigma = sigma;
  return m;
}

void ScenarioSpec::validate() const {
  if (replications < 1) throw std::invalid_argument("Q must be >= 1");
  if (length < 10) throw std::invalid_argument("T must be >= 10");
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
  if (example == Example::custom) {
    if (!custom_model) throw std::invalid_argument("custom scenario needs a model");
    custom_model->validate();
  }
  if (identify) penalty.validate();
}

void OutcomeCounts::add(FitOutcome outcome) {
  switch (outcome) {
    case FitOutcome::correct: ++correct; break;
    case FitOutcome::over: ++over; break;
    case FitOutcome::under: ++under; break;
  }
}

const MiseSummary* MonteCarloReport::find(const std::string& estimator, const std::string& function) const {
  for (const auto& m : mise) {
    if (m.estimator == estimator && m.function == function) return &m;
  }
  return nullptr;
}

namespace {

const std::vector<std::string> kEstimators{"three_step", "penalized", "oracle", "misspecified_vc",
                                           "misspecified_additive"};

struct ReplicateResult {
  bool ok = false;
  std::string error;
  // estimator index -> function index -> MISE (NaN when not applicable)
  std::vector<std::vector<double>> mise;
  std::string chosen_pair;
  double lambda = 0.0;
  double mu = 0.0;
  FitOutcome additive_terms = FitOutcome::correct;
  FitOutcome varying_terms = FitOutcome::correct;
  FitOutcome model = FitOutcome::correct;
};

std::string format_parameter(const char* name, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s=%.6g", name, value);
  return buf;
}

ReplicateResult run_replicate(const ScenarioSpec& spec, const ScenarioModel& model, int replicate) {
  ReplicateResult out;
  const int p = model.covariate_count();
  const int n_functions = 2 * p + 1;
  out.mise.assign(kEstimators.size(), std::vector<double>(n_functions, std::nan("")));

  RngStream rng(spec.base_seed, static_cast<std::uint64_t>(replicate));
  const SimulatedData sim = simulate(model, spec.length, rng);
  const TimeSeriesDataset& data = sim.data;

  VcamFit fit;
  if (spec.segment_length && spec.interior_count) {
    fit = fit_three_step(data, spec.estimation, *spec.segment_length, *spec.interior_count);
  } else {
    fit = select_by_bic(data, spec.estimation).fit;
  }
  const int K = fit.diagnostics.interior_knots;
  out.chosen_pair = "I=" + std::to_string(fit.diagnostics.segment_length) + ",K=" + std::to_string(K);

  std::vector<std::pair<double, double>> ranges;
  for (int k = 0; k < p; ++k) ranges.push_back(trimmed_range(data, k));

  const auto score = [&](std::size_t estimator, std::span<const ComponentFunction> alpha,
                         std::span<const ComponentFunction> beta) {
    for (std::size_t k = 0; k < alpha.size(); ++k) {
      out.mise[estimator][k] = mise(alpha[k], model.alpha[k], 0.0, 1.0);
    }
    for (std::size_t k = 0; k < beta.size(); ++k) {
      out.mise[estimator][p + 1 + k] = mise(beta[k], model.beta[k], ranges[k].first, ranges[k].second);
    }
  };
  score(0, fit.alpha, fit.beta);

  if (spec.identify && p > 0) {
    const IdentificationResult id = identify(data, fit, spec.penalty);
    score(1, id.alpha_p, id.beta_p);
    out.lambda = id.lambda;
    out.mu = id.mu;
    out.additive_terms = classify_flags(id.alpha_constant, model.alpha_constant);
    out.varying_terms = classify_flags(id.beta_linear, model.beta_linear);
    out.model = classify_model(out.additive_terms, out.varying_terms);
  }

  if (spec.comparisons) {
    std::vector<SplineBasis> time;
    for (const auto& a : fit.alpha) time.push_back(a.basis);
    std::vector<SplineBasis> covariate;
    std::vector<double> anchors;
    for (const auto& b : fit.beta) {
      covariate.push_back(b.basis);
      anchors.push_back(b.anchor);
    }
    const auto oa = oracle_alpha(data, model.beta, time);
    const auto ob = oracle_beta(data, model.alpha, covariate, anchors);
    score(2, oa, ob);
    const auto vc = fit_misspecified_vc(data, time);
    score(3, vc, {});
    const auto add = fit_misspecified_additive(data, time.front(), covariate, anchors);
    out.mise[4][0] = mise(add.time_curve, model.alpha[0], 0.0, 1.0);
    for (int k = 0; k < p; ++k) {
      out.mise[4][p + 1 + k] = mise(add.additive[k], model.beta[k], ranges[k].first, ranges[k].second);
    }
  }
  out.ok = true;
  return out;
}

}  // namespace

MonteCarloReport run_monte_carlo(const ScenarioSpec& spec, int threads) {
  spec.validate();
  const auto started = std::chrono::steady_clock::now();
  const ScenarioModel model = spec.model();
  const int Q = spec.replications;
  const int p = model.covariate_count();

  std::vector<ReplicateResult> results(Q);
  std::atomic<int> next{0};
  const auto worker = [&]() {
    for (int q = next.fetch_add(1); q < Q; q = next.fetch_add(1)) {
      try {
        results[q] = run_replicate(spec, model, q + 1);
      } catch (const std::exception& e) {
        results[q].ok = false;
        results[q].error = e.what();
      }
    }
  };
  const int n_threads = std::clamp(threads, 1, Q);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  MonteCarloReport report;
  report.scenario = model.name.empty() ? to_string(spec.example) : model.name;
  report.length = spec.length;
  report.replications = Q;
  report.base_seed = spec.base_seed;
  report.identification = spec.identify && p > 0;

  std::vector<std::string> functions;
  for (int k = 0; k <= p; ++k) functions.push_back("alpha" + std::to_string(k));
  for (int k = 1; k <= p; ++k) functions.push_back("beta" + std::to_string(k));

  for (int q = 0; q < Q; ++q) {
    const ReplicateResult& r = results[q];
    if (!r.ok) {
      report.failures.push_back({q + 1, r.error});
      continue;
    }
    ++report.succeeded;
    ++report.chosen_parameters[r.chosen_pair];
    if (report.identification) {
      ++report.chosen_parameters[format_parameter("lambda", r.lambda)];
      ++report.chosen_parameters[format_parameter("mu", r.mu)];
      report.additive_terms.add(r.additive_terms);
      report.varying_terms.add(r.varying_terms);
      report.true_model.add(r.model);
    }
  }

  for (std::size_t e = 0; e < kEstimators.size(); ++e) {
    for (std::size_t f = 0; f < functions.size(); ++f) {
      std::vector<double> values;
      for (const auto& r : results) {
        if (r.ok && !std::isnan(r.mise[e][f])) values.push_back(r.mise[e][f]);
      }
      if (values.empty()) continue;
      double sum = 0.0;
      for (double v : values) sum += v;
      const double mean = sum / static_cast<double>(values.size());
      report.mise.push_back({kEstimators[e], functions[f], mean, sample_sd(values, mean),
                             static_cast<int>(values.size())});
    }
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace vcam
