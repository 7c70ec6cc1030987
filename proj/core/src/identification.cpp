#include "vcam/identification.hpp"

#include "design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace vcam {

std::vector<double> log_spaced_grid(double lo, double hi, int n) {
  if (n < 1 || !(lo > 0.0) || !(hi >= lo)) throw std::invalid_argument("log_spaced_grid: need n >= 1 and 0 < lo <= hi");
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double step = std::log(hi / lo) / (n - 1);
  for (int i = 0; i < n; ++i) out[i] = lo * std::exp(step * i);
  out.back() = hi;
  return out;
}

void PenaltyConfig::validate() const {
  if (!(a > 2.0)) throw std::invalid_argument("penalty.a must be > 2");
  const auto check_grid = [](const std::vector<double>& grid, const char* name) {
    if (grid.empty()) throw std::invalid_argument(std::string(name) + " must be nonempty");
    if (!std::is_sorted(grid.begin(), grid.end())) throw std::invalid_argument(std::string(name) + " must be sorted ascending");
    if (!(grid.front() > 0.0)) throw std::invalid_argument(std::string(name) + " entries must be positive");
  };
  check_grid(lambda_grid, "penalty.lambda_grid");
  check_grid(mu_grid, "penalty.mu_grid");
  if (!(zero_threshold > 0.0)) throw std::invalid_argument("penalty.zero_threshold must be positive");
  if (!(lqa_floor > 0.0)) throw std::invalid_argument("penalty.lqa_floor must be positive");
  if (max_iter < 1) throw std::invalid_argument("penalty.max_iter must be >= 1");
  if (!(coef_tol > 0.0)) throw std::invalid_argument("penalty.coef_tol must be positive");
}

double scad_derivative(double theta, double lambda, double a) {
  if (theta < 0.0) throw std::invalid_argument("scad_derivative: theta must be >= 0");
  if (theta <= lambda) return lambda;
  return std::max(a * lambda - theta, 0.0) / (a - 1.0);
}

double scad_penalty(double theta, double lambda, double a) {
  if (theta < 0.0) throw std::invalid_argument("scad_penalty: theta must be >= 0");
  if (theta <= lambda) return lambda * theta;
  if (theta <= a * lambda) return (2.0 * a * lambda * theta - theta * theta - lambda * lambda) / (2.0 * (a - 1.0));
  return 0.5 * (a + 1.0) * lambda * lambda;
}

namespace {

// One coefficient block of a penalized problem.
struct Block {
  Eigen::Index offset = 0;
  Eigen::Index size = 0;
  bool penalized = false;
  Matrix gram;        // penalty Gram; norm^2 = c' gram c
  Vector direction;   // spans the subspace a flagged block is restricted to
  Vector projector;   // c -> (projector . c) * direction is the L2 projection
};

struct LqaProblem {
  Matrix design;
  Vector response;
  std::vector<Block> blocks;
  double tuning = 0.0;
  double knot_scale = 1.0;  // K^{-3/2}
};

struct LqaOutcome {
  Vector coeffs;
  std::vector<bool> frozen;
  std::vector<double> norms;
  LqaTrace trace;
};

double block_norm(const Block& b, const Vector& coeffs) {
  const auto c = coeffs.segment(b.offset, b.size);
  const double quad = c.dot(b.gram * c);
  return quad > 0.0 ? std::sqrt(quad) : 0.0;
}

// Runs local quadratic approximation. Blocks whose penalized norm drops to
// the zero threshold are projected onto their restricted subspace and keep
// only that one free direction, unpenalized, in later ridge updates.
LqaOutcome run_lqa(const LqaProblem& prob, const PenaltyConfig& cfg) {
  const double T = static_cast<double>(prob.design.rows());
  const auto q = prob.design.cols();
  const Matrix xtx = prob.design.transpose() * prob.design;
  const Vector xty = prob.design.transpose() * prob.response;
  const std::size_t nb = prob.blocks.size();

  LqaOutcome out;
  out.frozen.assign(nb, false);
  out.norms.assign(nb, 0.0);
  Vector coeffs = least_squares(prob.design, prob.response);

  const auto freeze_small = [&](Vector& c) {
    bool any = false;
    for (std::size_t i = 0; i < nb; ++i) {
      const Block& b = prob.blocks[i];
      if (!b.penalized) continue;
      if (out.frozen[i]) {
        out.norms[i] = 0.0;
        continue;
      }
      out.norms[i] = block_norm(b, c);
      if (out.norms[i] <= cfg.zero_threshold) {
        const double s = b.projector.dot(c.segment(b.offset, b.size));
        c.segment(b.offset, b.size) = s * b.direction;
        out.frozen[i] = true;
        out.norms[i] = 0.0;
        any = true;
      }
    }
    return any;
  };
  const auto objective = [&](const Vector& c) {
    const double rss = (prob.response - prob.design * c).squaredNorm();
    double pen = 0.0;
    for (std::size_t i = 0; i < nb; ++i) {
      if (!prob.blocks[i].penalized || out.frozen[i]) continue;
      pen += scad_penalty(prob.knot_scale * out.norms[i], prob.tuning, cfg.a) / prob.knot_scale;
    }
    return 0.5 * rss + T * pen;
  };
  const auto record = [&](const Vector& c) {
    out.trace.objective.push_back(objective(c));
    std::vector<double> row;
    for (std::size_t i = 0; i < nb; ++i) {
      if (prob.blocks[i].penalized) row.push_back(out.norms[i]);
    }
    out.trace.norms.push_back(std::move(row));
  };

  freeze_small(coeffs);
  record(coeffs);

  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    // Columns of `basis` map the free parameters to full coefficients.
    Eigen::Index free_count = 0;
    for (std::size_t i = 0; i < nb; ++i) free_count += out.frozen[i] ? 1 : prob.blocks[i].size;
    Matrix basis = Matrix::Zero(q, free_count);
    Matrix omega = Matrix::Zero(free_count, free_count);
    Eigen::Index col = 0;
    for (std::size_t i = 0; i < nb; ++i) {
      const Block& b = prob.blocks[i];
      if (out.frozen[i]) {
        basis.block(b.offset, col, b.size, 1) = b.direction;
        ++col;
        continue;
      }
      basis.block(b.offset, col, b.size, b.size).setIdentity();
      if (b.penalized) {
        const double theta = prob.knot_scale * out.norms[i];
        const double weight = scad_derivative(theta, prob.tuning, cfg.a) / std::max(out.norms[i], cfg.lqa_floor);
        omega.block(col, col, b.size, b.size) = weight * b.gram;
      }
      col += b.size;
    }
    const Vector theta =
        ridge_solve_normal(basis.transpose() * xtx * basis, basis.transpose() * xty, omega, T);
    Vector next = basis * theta;
    const std::vector<double> previous = out.norms;
    const bool froze = freeze_small(next);
    const double change = (next - coeffs).cwiseAbs().maxCoeff();
    // A block still heading to zero keeps the iteration going even when the
    // coefficient change is already below tolerance.
    bool collapsing = false;
    for (std::size_t i = 0; i < nb; ++i) {
      if (prob.blocks[i].penalized && !out.frozen[i] && out.norms[i] < 0.5 * previous[i]) collapsing = true;
    }
    coeffs = std::move(next);
    record(coeffs);
    out.trace.iterations = iter + 1;
    if (!froze && !collapsing && change < cfg.coef_tol) {
      out.trace.converged = true;
      break;
    }
  }
  out.coeffs = std::move(coeffs);
  return out;
}

int max_interior(std::span<const SplineBasis> bases) {
  int K = 0;
  for (const auto& b : bases) K = std::max(K, b.interior_count());
  return std::max(K, 1);
}

// Maps reduced centered coefficients (J - 1) to plain scaled-basis
// coefficients (J) of the same function: c' psi - c' psi(anchor) = u' psi.
Matrix uncentering_map(const SplineBasis& basis, double anchor) {
  const int J = basis.dimension();
  Matrix expand = Matrix::Zero(J, J - 1);
  expand.topRows(J - 1).setIdentity();
  const Vector at_anchor = basis.eval_scaled(anchor);
  const double root = std::sqrt(static_cast<double>(J));
  Matrix shift = Matrix::Identity(J, J) - Vector::Ones(J) * at_anchor.transpose() / root;
  return shift * expand;
}

}  // namespace

Stage1Result stage1_alpha(const TimeSeriesDataset& data, std::span<const ComponentFunction> beta_hat, double lambda,
                          std::span<const SplineBasis> bases, const PenaltyConfig& cfg) {
  cfg.validate();
  const int p = data.covariate_count();
  if (static_cast<int>(beta_hat.size()) != p || static_cast<int>(bases.size()) != p + 1) {
    throw std::invalid_argument("stage1_alpha: need p plug-in beta functions and p + 1 time bases");
  }
  if (!(lambda > 0.0)) throw std::invalid_argument("stage1_alpha: lambda must be positive");
  const int T = data.length();

  LqaProblem prob;
  prob.tuning = lambda;
  prob.knot_scale = std::pow(static_cast<double>(max_interior(bases)), -1.5);
  prob.response = data.response();
  Eigen::Index cols = 0;
  for (const auto& b : bases) cols += b.dimension();
  prob.design.resize(T, cols);
  Eigen::Index offset = 0;
  for (int k = 0; k <= p; ++k) {
    const Matrix phi = detail::time_design(data, bases[k]);
    if (k == 0) {
      prob.design.middleCols(offset, phi.cols()) = phi;
    } else {
      const Vector b = detail::eval_over_covariate(data, k - 1, beta_hat[k - 1]);
      prob.design.middleCols(offset, phi.cols()) = b.asDiagonal() * phi;
    }
    Block block;
    block.offset = offset;
    block.size = phi.cols();
    block.penalized = k > 0;
    block.gram = derivative_gram(bases[k], 1, true).values;
    block.direction = Vector::Ones(block.size);
    block.projector = bases[k].integrals() / (bases[k].upper() - bases[k].lower());
    prob.blocks.push_back(std::move(block));
    offset += phi.cols();
  }

  const LqaOutcome lqa = run_lqa(prob, cfg);

  std::vector<ComponentFunction> pieces;
  for (int k = 0; k <= p; ++k) {
    const Block& b = prob.blocks[k];
    ComponentFunction f = varying_coefficient(bases[k], lqa.coeffs.segment(b.offset, b.size));
    if (k > 0 && lqa.frozen[k]) f.shape = ComponentShape::constant;
    pieces.push_back(std::move(f));
  }

  Stage1Result result;
  result.lambda = lambda;
  result.alpha_p = normalize(pieces).alpha;
  for (int k = 1; k <= p; ++k) {
    result.alpha_constant.push_back(lqa.frozen[k]);
    result.derivative_norms.push_back(lqa.norms[k]);
    if (lqa.frozen[k]) ++result.flagged;
  }
  result.rss = residual_sum_of_squares(data, result.alpha_p, beta_hat);
  result.trace = lqa.trace;
  return result;
}

Stage2Result stage2_beta(const TimeSeriesDataset& data, std::span<const ComponentFunction> alpha_p, double mu,
                         std::span<const SplineBasis> bases, std::span<const double> anchors,
                         const PenaltyConfig& cfg) {
  cfg.validate();
  const int p = data.covariate_count();
  if (static_cast<int>(alpha_p.size()) != p + 1 || static_cast<int>(bases.size()) != p ||
      static_cast<int>(anchors.size()) != p) {
    throw std::invalid_argument("stage2_beta: need p + 1 alpha curves, p bases and p anchors");
  }
  if (!(mu > 0.0)) throw std::invalid_argument("stage2_beta: mu must be positive");
  for (const auto& b : bases) {
    if (b.order() < 3) {
      throw std::invalid_argument("stage2_beta: additive spline order must be >= 3 (got " +
                                  std::to_string(b.order()) + "), second derivatives vanish otherwise");
    }
  }
  const int T = data.length();

  LqaProblem prob;
  prob.tuning = mu;
  prob.knot_scale = std::pow(static_cast<double>(max_interior(bases)), -1.5);
  prob.response = data.response() - detail::eval_over_time(data, alpha_p[0]);
  Eigen::Index cols = 0;
  for (const auto& b : bases) cols += b.dimension() - 1;
  prob.design.resize(T, cols);
  Eigen::Index offset = 0;
  for (int k = 0; k < p; ++k) {
    const SplineBasis& basis = bases[k];
    const int J = basis.dimension();
    const Matrix psi = detail::centered_design(detail::column(data, k), basis, anchors[k]);
    const Vector a = detail::eval_over_time(data, alpha_p[k + 1]);
    prob.design.middleCols(offset, psi.cols()) = a.asDiagonal() * psi;

    Block block;
    block.offset = offset;
    block.size = J - 1;
    block.penalized = true;
    // Centering subtracts a constant, so the curvature Gram of the reduced
    // coefficients is the leading block of the plain one.
    block.gram = derivative_gram(basis, 2, true).values.topLeftCorner(J - 1, J - 1);
    const double root = std::sqrt(static_cast<double>(J));
    // x - anchor in the centered basis: Greville abscissae / sqrt(J).
    block.direction = detail::reduce_centered(basis.greville() / root);
    const Matrix uncenter = uncentering_map(basis, anchors[k]);
    const Matrix g0 = derivative_gram(basis, 0, true).values;
    const Vector line = uncenter * block.direction;
    const double line_sq = line.dot(g0 * line);
    block.projector = uncenter.transpose() * (g0 * line) / line_sq;
    prob.blocks.push_back(std::move(block));
    offset += J - 1;
  }

  const LqaOutcome lqa = run_lqa(prob, cfg);

  Stage2Result result;
  result.mu = mu;
  for (int k = 0; k < p; ++k) {
    const Block& b = prob.blocks[k];
    ComponentFunction f =
        additive(bases[k], detail::expand_reduced(lqa.coeffs.segment(b.offset, b.size)), anchors[k]);
    if (lqa.frozen[k]) {
      f.shape = ComponentShape::linear;
      ++result.flagged;
    }
    result.beta_p.push_back(std::move(f));
    result.beta_linear.push_back(lqa.frozen[k]);
    result.curvature_norms.push_back(lqa.norms[k]);
  }
  result.rss = residual_sum_of_squares(data, alpha_p, result.beta_p);
  result.trace = lqa.trace;
  return result;
}

double identification_bic(double rss, int length, int covariates, int flagged, int basis_dimension) {
  const double T = length;
  const double ratio = T / basis_dimension;
  return std::log(rss / T) + flagged * std::log(T) / T + (covariates - flagged) * std::log(ratio) / ratio;
}

LambdaSelection select_lambda(const TimeSeriesDataset& data, std::span<const ComponentFunction> beta_hat,
                              std::span<const SplineBasis> bases, const PenaltyConfig& cfg) {
  cfg.validate();
  const int J = bases.front().dimension();
  std::optional<LambdaSelection> best;
  std::vector<double> table;
  double best_bic = std::numeric_limits<double>::infinity();
  for (double lambda : cfg.lambda_grid) {
    Stage1Result stage = stage1_alpha(data, beta_hat, lambda, bases, cfg);
    const double bic = identification_bic(stage.rss, data.length(), data.covariate_count(), stage.flagged, J);
    table.push_back(bic);
    if (!best || bic <= best_bic) {
      best_bic = bic;
      best = LambdaSelection{lambda, std::move(stage), {}};
    }
  }
  best->bic = std::move(table);
  return std::move(*best);
}

MuSelection select_mu(const TimeSeriesDataset& data, std::span<const ComponentFunction> alpha_p,
                      std::span<const SplineBasis> bases, std::span<const double> anchors,
                      const PenaltyConfig& cfg) {
  cfg.validate();
  if (bases.empty()) throw std::invalid_argument("select_mu: no covariates");
  const int J = bases.front().dimension();
  std::optional<MuSelection> best;
  std::vector<double> table;
  double best_bic = std::numeric_limits<double>::infinity();
  for (double mu : cfg.mu_grid) {
    Stage2Result stage = stage2_beta(data, alpha_p, mu, bases, anchors, cfg);
    const double bic = identification_bic(stage.rss, data.length(), data.covariate_count(), stage.flagged, J);
    table.push_back(bic);
    if (!best || bic <= best_bic) {
      best_bic = bic;
      best = MuSelection{mu, std::move(stage), {}};
    }
  }
  best->bic = std::move(table);
  return std::move(*best);
}

IdentificationResult identify(const TimeSeriesDataset& data, const VcamFit& fit, const PenaltyConfig& cfg) {
  const int p = data.covariate_count();
  if (fit.covariate_count() != p || p == 0) {
    throw std::invalid_argument("identify: fit and dataset disagree on the covariate count (or p = 0)");
  }
  std::vector<SplineBasis> time;
  for (const auto& a : fit.alpha) time.push_back(a.basis);
  std::vector<SplineBasis> covariate;
  std::vector<double> anchors;
  for (const auto& b : fit.beta) {
    covariate.push_back(b.basis);
    anchors.push_back(b.anchor);
  }

  LambdaSelection lambda = select_lambda(data, fit.beta, time, cfg);
  MuSelection mu = select_mu(data, lambda.stage.alpha_p, covariate, anchors, cfg);

  IdentificationResult out;
  out.alpha_p = std::move(lambda.stage.alpha_p);
  out.beta_p = std::move(mu.stage.beta_p);
  out.alpha_constant = std::move(lambda.stage.alpha_constant);
  out.beta_linear = std::move(mu.stage.beta_linear);
  out.lambda = lambda.lambda;
  out.mu = mu.mu;
  out.d1 = lambda.stage.flagged;
  out.d2 = mu.stage.flagged;
  out.lambda_bic = std::move(lambda.bic);
  out.mu_bic = std::move(mu.bic);
  out.stage1_trace = std::move(lambda.stage.trace);
  out.stage2_trace = std::move(mu.stage.trace);
  out.rss1 = lambda.stage.rss;
  out.rss2 = mu.stage.rss;
  return out;
}

FitOutcome classify_flags(const std::vector<bool>& flagged, const std::vector<bool>& truth) {
  if (flagged.size() != truth.size()) throw std::invalid_argument("classify_flags: size mismatch");
  bool wrong_simplification = false;
  bool missed = false;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (flagged[k] && !truth[k]) wrong_simplification = true;
    if (!flagged[k] && truth[k]) missed = true;
  }
  if (wrong_simplification) return FitOutcome::under;
  if (missed) return FitOutcome::over;
  return FitOutcome::correct;
}

FitOutcome classify_model(FitOutcome additive_terms, FitOutcome varying_terms) {
  if (additive_terms == FitOutcome::correct && varying_terms == FitOutcome::correct) return FitOutcome::correct;
  if (additive_terms == FitOutcome::under || varying_terms == FitOutcome::under) return FitOutcome::under;
  return FitOutcome::over;
}

const char* to_string(FitOutcome outcome) {
  switch (outcome) {
    case FitOutcome::correct: return "correct";
    case FitOutcome::over: return "over";
    case FitOutcome::under: return "under";
  }
  return "unknown";
}

}  // namespace vcam
