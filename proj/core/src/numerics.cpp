#include "vcam/numerics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace vcam {

namespace {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string("non-finite entries in ") + what);
  }
}

std::uint64_t splitmix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace

Vector least_squares(const DesignMatrix& X, const Vector& y, double rank_tolerance) {
  if (X.rows() != y.size()) {
    throw std::invalid_argument("least_squares: design has " + std::to_string(X.rows()) +
                                " rows but response has " + std::to_string(y.size()));
  }
  if (X.rows() < 1 || X.cols() < 1) {
    throw std::invalid_argument("least_squares: empty design");
  }
  require_finite(X, "design matrix");
  require_finite(y, "response");

  Eigen::CompleteOrthogonalDecomposition<Matrix> cod;
  cod.setThreshold(rank_tolerance);
  cod.compute(X);
  return cod.solve(y);
}

Eigen::Index numerical_rank(const DesignMatrix& X, double rank_tolerance) {
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod;
  cod.setThreshold(rank_tolerance);
  cod.compute(X);
  return cod.rank();
}

Vector ridge_solve_normal(const Matrix& xtx, const Vector& xty, const Matrix& omega, double scale) {
  const auto q = xtx.rows();
  if (xtx.cols() != q || xty.size() != q || omega.rows() != q || omega.cols() != q) {
    throw std::invalid_argument("ridge_solve: dimension mismatch");
  }
  if (!(scale >= 0.0)) {
    throw std::invalid_argument("ridge_solve: scale must be >= 0");
  }
  require_finite(xtx, "normal matrix");
  require_finite(omega, "penalty matrix");

  Matrix lhs = xtx + scale * omega;
  Eigen::LLT<Matrix> llt(lhs);
  if (llt.info() != Eigen::Success) {
    const double jitter = 1e-10 * lhs.trace() / static_cast<double>(q);
    lhs.diagonal().array() += jitter;
    llt.compute(lhs);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("ridge_solve: system is singular after diagonal jitter");
    }
  }
  // Iterative refinement: heavy penalty weights leave the system badly
  // conditioned and a single triangular solve loses digits.
  Vector c = llt.solve(xty);
  for (int i = 0; i < 2; ++i) c += llt.solve(xty - lhs * c);
  return c;
}

Vector ridge_solve(const DesignMatrix& X, const Vector& y, const Matrix& omega, double scale) {
  if (X.rows() != y.size()) {
    throw std::invalid_argument("ridge_solve: design/response row mismatch");
  }
  require_finite(X, "design matrix");
  require_finite(y, "response");
  const Matrix xtx = X.transpose() * X;
  const Vector xty = X.transpose() * y;
  return ridge_solve_normal(xtx, xty, omega, scale);
}

QuadratureRule gauss_legendre(int n_nodes, double a, double b) {
  if (n_nodes < 1 || n_nodes > 64) {
    throw std::invalid_argument("gauss_legendre: n_nodes must be in [1, 64], got " +
                                std::to_string(n_nodes));
  }
  const int n = n_nodes;
  Vector x(n);
  Vector w(n);
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  // Roots are symmetric; Newton iteration on P_n from the Chebyshev-like guess.
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) <= 1e-16) break;
    }
    if (n % 2 == 1 && i == m - 1) z = 0.0;
    // Recompute the derivative at the converged root for the weight.
    double p0 = 1.0;
    double p1 = 0.0;
    for (int j = 0; j < n; ++j) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
    }
    dp = (n == 1) ? 1.0 : n * (z * p0 - p1) / (z * z - 1.0);
    const double weight = 2.0 / ((1.0 - z * z) * dp * dp);
    x[i] = mid - half * z;
    x[n - 1 - i] = mid + half * z;
    w[i] = half * weight;
    w[n - 1 - i] = half * weight;
  }
  return {std::move(x), std::move(w)};
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_index)
    : seed_(seed), stream_(stream_index) {
  key_ = splitmix64(seed ^ splitmix64(stream_index * kGolden + 0x632be59bd9b4e019ULL));
}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return splitmix64(key_ + counter_ * kGolden);
}

double RngStream::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  return r * std::cos(theta);
}

Vector standard_normal(RngStream& rng, Eigen::Index count) {
  Vector out(count);
  for (Eigen::Index i = 0; i < count; ++i) out[i] = rng.normal();
  return out;
}

}  // namespace vcam
