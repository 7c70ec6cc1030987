#include "vcam/splines.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

namespace vcam {

namespace {

void validate_spec(const SplineSpec& spec) {
  if (spec.order < 1) {
    throw std::invalid_argument("spline order must be >= 1, got " + std::to_string(spec.order));
  }
  if (spec.interior_count < 0) {
    throw std::invalid_argument("interior knot count must be >= 0, got " +
                                std::to_string(spec.interior_count));
  }
  if (!(spec.lower < spec.upper) || !std::isfinite(spec.lower) || !std::isfinite(spec.upper)) {
    std::ostringstream msg;
    msg << "invalid spline domain [" << spec.lower << ", " << spec.upper << "]";
    throw std::invalid_argument(msg.str());
  }
}

std::vector<double> uniform_interior(int K, double a, double b) {
  std::vector<double> out(K);
  for (int l = 1; l <= K; ++l) out[l - 1] = a + (b - a) * l / (K + 1);
  return out;
}

// Linear-interpolation empirical quantile of sorted data.
double empirical_quantile(const std::vector<double>& sorted, double prob) {
  const double pos = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double spacing_ratio(const std::vector<double>& breaks) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (std::size_t i = 1; i < breaks.size(); ++i) {
    const double d = breaks[i] - breaks[i - 1];
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return hi / lo;
}

}  // namespace

SplineBasis::SplineBasis(SplineSpec spec) {
  validate_spec(spec);
  order_ = spec.order;
  interior_count_ = spec.interior_count;
  const int K = spec.interior_count;
  const double a = spec.lower;
  const double b = spec.upper;

  std::vector<double> interior;
  if (spec.placement == KnotPlacement::quantile && K > 0) {
    std::set<double> distinct(spec.sample.begin(), spec.sample.end());
    if (static_cast<int>(distinct.size()) < K + 2) {
      throw std::invalid_argument("quantile knot placement needs at least " + std::to_string(K + 2) +
                                  " distinct sample values, got " + std::to_string(distinct.size()));
    }
    std::vector<double> sorted = spec.sample;
    std::sort(sorted.begin(), sorted.end());
    for (int l = 1; l <= K; ++l) {
      const double q = empirical_quantile(sorted, static_cast<double>(l) / (K + 1));
      if (q > a && q < b && (interior.empty() || q > interior.back())) interior.push_back(q);
    }
    if (static_cast<int>(interior.size()) == K) {
      std::vector<double> breaks{a};
      breaks.insert(breaks.end(), interior.begin(), interior.end());
      breaks.push_back(b);
      if (spacing_ratio(breaks) > kMaxMeshRatio) interior.clear();
    }
    if (static_cast<int>(interior.size()) != K) {
      interior = uniform_interior(K, a, b);
      fell_back_ = true;
    }
  } else {
    interior = uniform_interior(K, a, b);
  }

  knots_.reserve(K + 2 * order_);
  knots_.insert(knots_.end(), order_, a);
  knots_.insert(knots_.end(), interior.begin(), interior.end());
  knots_.insert(knots_.end(), order_, b);
}

SplineBasis SplineBasis::uniform(int order, int interior_count, double lower, double upper) {
  SplineSpec spec;
  spec.order = order;
  spec.interior_count = interior_count;
  spec.lower = lower;
  spec.upper = upper;
  return SplineBasis(std::move(spec));
}

SplineBasis SplineBasis::from_knots(int order, std::vector<double> knots) {
  if (order < 1) throw std::invalid_argument("spline order must be >= 1");
  const auto n = static_cast<int>(knots.size());
  if (n < 2 * order) throw std::invalid_argument("knot vector too short for the order");
  if (!std::is_sorted(knots.begin(), knots.end())) {
    throw std::invalid_argument("knot vector must be nondecreasing");
  }
  for (int i = 1; i < order; ++i) {
    if (knots[i] != knots[0] || knots[n - 1 - i] != knots[n - 1]) {
      throw std::invalid_argument("knot vector is not clamped");
    }
  }
  const int K = n - 2 * order;
  for (int i = order; i < order + K; ++i) {
    if (!(knots[i] > knots[0] && knots[i] < knots[n - 1]) || (i > order && !(knots[i] > knots[i - 1]))) {
      throw std::invalid_argument("interior knots must be strictly increasing inside the domain");
    }
  }
  if (!(knots.front() < knots.back())) throw std::invalid_argument("degenerate knot vector domain");
  SplineBasis basis;
  basis.order_ = order;
  basis.interior_count_ = K;
  basis.knots_ = std::move(knots);
  return basis;
}

double SplineBasis::mesh_ratio() const {
  std::vector<double> breaks(knots_.begin() + order_ - 1, knots_.end() - order_ + 1);
  return spacing_ratio(breaks);
}

void SplineBasis::check_point(double x) const {
  if (!(x >= lower() && x <= upper())) {
    std::ostringstream msg;
    msg << "evaluation point " << x << " outside spline domain [" << lower() << ", " << upper() << "]";
    throw std::domain_error(msg.str());
  }
}

int SplineBasis::find_span(double x) const {
  const int last = order_ - 1 + interior_count_;
  if (x >= knots_[last + 1]) return last;
  // First knot strictly greater than x, among t_m .. t_{m-1+K+1}.
  const auto it = std::upper_bound(knots_.begin() + order_, knots_.begin() + last + 1, x);
  return static_cast<int>(it - knots_.begin()) - 1;
}

Matrix SplineBasis::local_derivatives(int span, double x, int n) const {
  // Piegl & Tiller, algorithm A2.3, with degree p = m - 1.
  const int p = order_ - 1;
  const auto& U = knots_;
  Matrix ndu(p + 1, p + 1);
  std::vector<double> left(p + 1), right(p + 1);
  ndu(0, 0) = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - U[span + 1 - j];
    right[j] = U[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu(j, r) = right[r + 1] + left[j - r];
      const double temp = ndu(r, j - 1) / ndu(j, r);
      ndu(r, j) = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu(j, j) = saved;
  }

  const int nd = std::min(n, p);
  Matrix ders = Matrix::Zero(n + 1, p + 1);
  for (int j = 0; j <= p; ++j) ders(0, j) = ndu(j, p);

  Matrix a(2, p + 1);
  for (int r = 0; r <= p; ++r) {
    int s1 = 0;
    int s2 = 1;
    a(0, 0) = 1.0;
    for (int k = 1; k <= nd; ++k) {
      double d = 0.0;
      const int rk = r - k;
      const int pk = p - k;
      if (r >= k) {
        a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
        d = a(s2, 0) * ndu(rk, pk);
      }
      const int j1 = (rk >= -1) ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
        d += a(s2, j) * ndu(rk + j, pk);
      }
      if (r <= pk) {
        a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
        d += a(s2, k) * ndu(r, pk);
      }
      ders(k, r) = d;
      std::swap(s1, s2);
    }
  }
  double factor = p;
  for (int k = 1; k <= nd; ++k) {
    ders.row(k) *= factor;
    factor *= (p - k);
  }
  return ders;
}

Vector SplineBasis::eval_raw(double x) const { return eval_derivative(x, 0); }

Vector SplineBasis::eval_scaled(double x, std::optional<double> center) const {
  const double root = std::sqrt(static_cast<double>(dimension()));
  Vector out = root * eval_raw(x);
  if (center) out -= root * eval_raw(*center);
  return out;
}

Vector SplineBasis::eval_derivative(double x, int d) const {
  check_point(x);
  if (d < 0) throw std::invalid_argument("derivative order must be >= 0");
  Vector out = Vector::Zero(dimension());
  if (d >= order_) return out;
  const int span = find_span(x);
  const Matrix ders = local_derivatives(span, x, d);
  const int first = span - order_ + 1;
  for (int j = 0; j < order_; ++j) out[first + j] = ders(d, j);
  return out;
}

Vector SplineBasis::integrals() const {
  Vector out(dimension());
  for (int l = 0; l < dimension(); ++l) {
    out[l] = (knots_[l + order_] - knots_[l]) / order_;
  }
  return out;
}

Vector SplineBasis::greville() const {
  Vector out(dimension());
  if (order_ == 1) {
    for (int l = 0; l < dimension(); ++l) out[l] = 0.5 * (knots_[l] + knots_[l + 1]);
    return out;
  }
  for (int l = 0; l < dimension(); ++l) {
    double sum = 0.0;
    for (int i = 1; i < order_; ++i) sum += knots_[l + i];
    out[l] = sum / (order_ - 1);
  }
  return out;
}

GramMatrix derivative_gram(const SplineBasis& basis, int d, bool scaled) {
  if (d < 0) throw std::invalid_argument("derivative order must be >= 0");
  const int J = basis.dimension();
  const int m = basis.order();
  GramMatrix gram{d, Matrix::Zero(J, J)};
  if (d >= m) return gram;

  const auto knots = basis.knots();
  const QuadratureRule unit = gauss_legendre(m, 0.0, 1.0);
  for (int span = m - 1; span <= m - 1 + basis.interior_count(); ++span) {
    const double lo = knots[span];
    const double hi = knots[span + 1];
    if (!(hi > lo)) continue;
    for (int q = 0; q < m; ++q) {
      const double x = lo + (hi - lo) * unit.nodes[q];
      const double w = (hi - lo) * unit.weights[q];
      const Vector v = basis.eval_derivative(x, d);
      const int first = span - m + 1;
      const auto local = v.segment(first, m);
      gram.values.block(first, first, m, m).noalias() += w * local * local.transpose();
    }
  }
  if (scaled) gram.values *= static_cast<double>(J);
  // Symmetrize away rounding asymmetry from the accumulation.
  gram.values = 0.5 * (gram.values + gram.values.transpose()).eval();
  return gram;
}

double spline_l2_norm(const Vector& coeffs, const GramMatrix& gram) {
  if (coeffs.size() != gram.values.rows()) {
    throw std::invalid_argument("spline_l2_norm: coefficient length " + std::to_string(coeffs.size()) +
                                " does not match basis dimension " +
                                std::to_string(gram.values.rows()));
  }
  const double quad = coeffs.dot(gram.values * coeffs);
  if (quad < 0.0) {
    if (quad > -1e-12) return 0.0;
    throw std::runtime_error("spline_l2_norm: negative quadratic form");
  }
  return std::sqrt(quad);
}

double spline_l2_norm(const Vector& coeffs, const SplineBasis& basis, int d, bool scaled) {
  return spline_l2_norm(coeffs, derivative_gram(basis, d, scaled));
}

}  // namespace vcam
