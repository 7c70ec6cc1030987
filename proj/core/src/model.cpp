#include "vcam/model.hpp"

#include <cmath>
#include <sstream>

namespace vcam {

TimeSeriesDataset::TimeSeriesDataset(Vector y, Matrix x) : y_(std::move(y)), x_(std::move(x)) {
  if (y_.size() < 1) throw std::invalid_argument("dataset needs at least one observation");
  if (x_.rows() != y_.size()) {
    throw std::invalid_argument("dataset covariate rows (" + std::to_string(x_.rows()) +
                                ") do not match response length (" + std::to_string(y_.size()) + ")");
  }
  if (!y_.allFinite() || !x_.allFinite()) throw std::invalid_argument("dataset contains non-finite values");
  ranges_.reserve(x_.cols());
  for (Eigen::Index k = 0; k < x_.cols(); ++k) {
    ranges_.emplace_back(x_.col(k).minCoeff(), x_.col(k).maxCoeff());
  }
}

TimeSeriesDataset TimeSeriesDataset::permuted(std::span<const int> order) const {
  if (static_cast<int>(order.size()) != covariate_count()) {
    throw std::invalid_argument("permutation length does not match covariate count");
  }
  Matrix x(x_.rows(), x_.cols());
  for (std::size_t j = 0; j < order.size(); ++j) x.col(static_cast<Eigen::Index>(j)) = x_.col(order[j]);
  return TimeSeriesDataset(y_, std::move(x));
}

bool TimeSeriesDataset::operator==(const TimeSeriesDataset& other) const {
  return y_.size() == other.y_.size() && x_.rows() == other.x_.rows() && x_.cols() == other.x_.cols() &&
         y_ == other.y_ && x_ == other.x_;
}

Vector centered_basis(const SplineBasis& basis, double x, double anchor) {
  return basis.eval_scaled(x, anchor);
}

double ComponentFunction::operator()(double x) const {
  if (coeffs.size() != basis.dimension()) {
    throw std::invalid_argument("component coefficient length does not match its basis");
  }
  if (kind == ComponentKind::additive) return coeffs.dot(basis.eval_scaled(x, anchor));
  return coeffs.dot(basis.eval_scaled(x));
}

double ComponentFunction::derivative_norm(int d) const {
  if (d >= 1 && shape == ComponentShape::constant) return 0.0;
  if (d >= 2 && shape == ComponentShape::linear) return 0.0;
  if (kind == ComponentKind::additive && d == 0) {
    // Centering shifts by the constant c' psi(anchor); fold it into the
    // coefficients via partition of unity: sum_l B_l = 1.
    const double shift = coeffs.dot(basis.eval_scaled(anchor));
    const double root = std::sqrt(static_cast<double>(basis.dimension()));
    const Vector shifted = coeffs.array() - shift / root;
    return spline_l2_norm(shifted, basis, 0, true);
  }
  return spline_l2_norm(coeffs, basis, d, true);
}

double ComponentFunction::integral() const {
  const double root = std::sqrt(static_cast<double>(basis.dimension()));
  double value = root * coeffs.dot(basis.integrals());
  if (kind == ComponentKind::additive) {
    value -= coeffs.dot(basis.eval_scaled(anchor)) * (basis.upper() - basis.lower());
  }
  return value;
}

ComponentFunction varying_coefficient(SplineBasis basis, Vector coeffs) {
  ComponentFunction f{std::move(basis), std::move(coeffs), ComponentKind::varying_coefficient, 0.0,
                      ComponentShape::spline};
  if (f.coeffs.size() != f.basis.dimension()) {
    throw std::invalid_argument("coefficient length does not match basis dimension");
  }
  return f;
}

ComponentFunction additive(SplineBasis basis, Vector coeffs, double anchor) {
  if (!basis.contains(anchor)) {
    std::ostringstream msg;
    msg << "anchor " << anchor << " outside basis domain [" << basis.lower() << ", " << basis.upper() << "]";
    throw std::invalid_argument(msg.str());
  }
  ComponentFunction f{std::move(basis), std::move(coeffs), ComponentKind::additive, anchor,
                      ComponentShape::spline};
  if (f.coeffs.size() != f.basis.dimension()) {
    throw std::invalid_argument("coefficient length does not match basis dimension");
  }
  return f;
}

DegenerateComponentError::DegenerateComponentError(int component, const std::string& where)
    : std::runtime_error(where + ": varying-coefficient component " + std::to_string(component) +
                         " has numerically zero L2 norm"),
      component_(component) {}

double evaluate(std::span<const ComponentFunction> alpha, std::span<const ComponentFunction> beta, double u,
                std::span<const double> x) {
  if (alpha.size() != beta.size() + 1 || x.size() != beta.size()) {
    throw std::invalid_argument("evaluate: expected " + std::to_string(beta.size()) + " covariates, got " +
                                std::to_string(x.size()));
  }
  double value = alpha[0](u);
  for (std::size_t k = 0; k < beta.size(); ++k) value += alpha[k + 1](u) * beta[k](x[k]);
  return value;
}

double evaluate(const VcamFit& fit, double u, std::span<const double> x) {
  return evaluate(fit.alpha, fit.beta, u, x);
}

double residual_sum_of_squares(const TimeSeriesDataset& data, std::span<const ComponentFunction> alpha,
                               std::span<const ComponentFunction> beta) {
  const int p = data.covariate_count();
  std::vector<double> row(p);
  double rss = 0.0;
  for (int t = 0; t < data.length(); ++t) {
    for (int k = 0; k < p; ++k) row[k] = data.covariates()(t, k);
    const double r = data.response()[t] - evaluate(alpha, beta, data.rescaled_time(t), row);
    rss += r * r;
  }
  return rss;
}

NormalizedCoefficients normalize(std::span<const ComponentFunction> delta) {
  if (delta.empty()) throw std::invalid_argument("normalize: need at least the intercept component");
  NormalizedCoefficients out;
  out.alpha.assign(delta.begin(), delta.end());
  out.scales = Vector::Zero(static_cast<Eigen::Index>(delta.size()) - 1);
  for (std::size_t k = 1; k < delta.size(); ++k) {
    const ComponentFunction& d = delta[k];
    if (d.shape == ComponentShape::constant) {
      // Exact constant: level lives in every coefficient equally.
      const double level = d.coeffs.mean() * std::sqrt(static_cast<double>(d.basis.dimension()));
      if (std::abs(level) <= 1e-10) throw DegenerateComponentError(static_cast<int>(k), "normalize");
      out.alpha[k].coeffs.setConstant(1.0 / std::sqrt(static_cast<double>(d.basis.dimension())));
      out.scales[k - 1] = level;
      continue;
    }
    const double norm = d.l2_norm();
    if (!(norm > 1e-10)) throw DegenerateComponentError(static_cast<int>(k), "normalize");
    const double sign = d.integral() < 0.0 ? -1.0 : 1.0;
    const double scale = sign * norm;
    // Already unit norm with the right sign: keep coefficients bit-identical.
    if (scale != 1.0) out.alpha[k].coeffs = d.coeffs / scale;
    out.scales[k - 1] = scale;
  }
  return out;
}

std::vector<std::pair<double, double>> function_grid(const ComponentFunction& f, int n_points) {
  if (n_points < 2) throw std::invalid_argument("function_grid needs at least 2 points");
  const double a = f.basis.lower();
  const double b = f.basis.upper();
  std::vector<std::pair<double, double>> out;
  out.reserve(n_points);
  for (int i = 0; i < n_points; ++i) {
    double x = (i == n_points - 1) ? b : a + (b - a) * i / (n_points - 1);
    out.emplace_back(x, f(x));
  }
  return out;
}

}  // namespace vcam
