#pragma once

/// Dense linear algebra, quadrature and reproducible random numbers shared by
/// every other vcam module.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>

namespace vcam {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Rows are observations, columns are regressors.
using DesignMatrix = Eigen::MatrixXd;

/// Minimum-norm least-squares solution of X c ~ y.
///
/// Uses a complete orthogonal decomposition (QR with column pivoting followed
/// by a right orthogonal factor). Pivots below rank_tolerance times the
/// largest pivot are treated as zero, so rank-deficient designs return the minimum-norm
/// solution. Throws std::invalid_argument on non-finite input or shape
/// mismatch.
Vector least_squares(const DesignMatrix& X, const Vector& y, double rank_tolerance = 1e-10);

/// Numerical rank of X under the same threshold least_squares uses.
Eigen::Index numerical_rank(const DesignMatrix& X, double rank_tolerance = 1e-10);

/// Solves (X'X + scale * omega) c = X'y.
///
/// Omega must be symmetric PSD and scale >= 0. A Cholesky factorization is
/// attempted first; if it fails the diagonal is jittered once by
/// 1e-10 * trace / q. Throws std::runtime_error if the jittered system is
/// still not positive definite.
Vector ridge_solve(const DesignMatrix& X, const Vector& y, const Matrix& omega, double scale);

/// Same as ridge_solve but starting from precomputed X'X and X'y, which the
/// iterative penalized solvers reuse across iterations.
Vector ridge_solve_normal(const Matrix& xtx, const Vector& xty, const Matrix& omega, double scale);

struct QuadratureRule {
  Vector nodes;
  Vector weights;
};

/// Gauss-Legendre rule with n_nodes points on [a, b]; exact for polynomials of
/// degree <= 2 n_nodes - 1. Valid for 1 <= n_nodes <= 64.
QuadratureRule gauss_legendre(int n_nodes, double a, double b);

/// Counter-based 64-bit generator.
///
/// Draw i of stream (seed, stream_index) is splitmix64(key + (i + 1) * golden)
/// where key mixes seed and stream_index. Output depends only on
/// (seed, stream_index, draw count), never on scheduling.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_index);

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform();
  /// Box-Muller standard normal; the second variate of each pair is cached.
  double normal();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_index() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::optional<double> spare_;
};

/// count draws of RngStream::normal().
Vector standard_normal(RngStream& rng, Eigen::Index count);

}  // namespace vcam
