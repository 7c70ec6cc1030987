#include "vcam/estimation.hpp"

#include "design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace vcam {

double resolve_anchor(const TimeSeriesDataset& data, int k, double anchor) {
  const auto [lo, hi] = data.covariate_range(k);
  if (anchor >= lo && anchor <= hi) return anchor;
  return 0.5 * (lo + hi);
}

std::vector<double> resolve_anchors(const TimeSeriesDataset& data, double anchor) {
  std::vector<double> out(data.covariate_count());
  for (int k = 0; k < data.covariate_count(); ++k) out[k] = resolve_anchor(data, k, anchor);
  return out;
}

SplineBasis covariate_basis(const TimeSeriesDataset& data, int k, int order, int interior_count) {
  const auto [lo, hi] = data.covariate_range(k);
  SplineSpec spec;
  spec.order = order;
  spec.interior_count = interior_count;
  spec.lower = lo;
  spec.upper = hi;
  spec.placement = KnotPlacement::quantile;
  spec.sample = detail::column(data, k);
  return SplineBasis(std::move(spec));
}

std::vector<SplineBasis> covariate_bases(const TimeSeriesDataset& data, int order, int interior_count) {
  std::vector<SplineBasis> out;
  out.reserve(data.covariate_count());
  for (int k = 0; k < data.covariate_count(); ++k) out.push_back(covariate_basis(data, k, order, interior_count));
  return out;
}

std::vector<SplineBasis> time_bases(int covariates, int order, int interior_count) {
  return std::vector<SplineBasis>(covariates + 1, SplineBasis::uniform(order, interior_count));
}

bool admissible(const TimeSeriesDataset& data, const EstimationConfig& config, int segment_length,
                int interior_count) {
  if (segment_length < 1 || interior_count < 0) return false;
  if (data.length() % segment_length != 0) return false;
  const long columns = 1L + static_cast<long>(data.covariate_count()) * (interior_count + config.order_step1);
  return columns < segment_length;
}

Step1Result step1_gamma(const TimeSeriesDataset& data, int segment_length, std::span<const SplineBasis> bases,
                        std::span<const double> anchors, double rank_tolerance) {
  const int T = data.length();
  const int p = data.covariate_count();
  if (static_cast<int>(bases.size()) != p || static_cast<int>(anchors.size()) != p) {
    throw std::invalid_argument("step1_gamma: need one basis and one anchor per covariate");
  }
  if (segment_length < 1 || T % segment_length != 0) {
    throw std::invalid_argument("step1_gamma: segment length " + std::to_string(segment_length) +
                                " does not divide T = " + std::to_string(T));
  }
  int total_dim = 0;
  for (const auto& b : bases) total_dim += b.dimension();
  if (segment_length <= 1 + total_dim) {
    throw std::invalid_argument("step1_gamma: segment length " + std::to_string(segment_length) +
                                " must exceed 1 + sum_k J_k = " + std::to_string(1 + total_dim));
  }

  std::vector<Matrix> blocks;
  blocks.reserve(p);
  int cols = 1;
  for (int k = 0; k < p; ++k) {
    blocks.push_back(detail::centered_design(detail::column(data, k), bases[k], anchors[k]));
    cols += static_cast<int>(blocks.back().cols());
  }

  Step1Result result;
  result.group_count = T / segment_length;
  result.group_intercepts = Vector::Zero(result.group_count);
  Vector mean_coeffs = Vector::Zero(cols - 1);
  for (int s = 0; s < result.group_count; ++s) {
    const int start = s * segment_length;
    DesignMatrix X(segment_length, cols);
    X.col(0).setOnes();
    int c = 1;
    for (int k = 0; k < p; ++k) {
      X.block(0, c, segment_length, blocks[k].cols()) = blocks[k].middleRows(start, segment_length);
      c += static_cast<int>(blocks[k].cols());
    }
    const Vector y = data.response().segment(start, segment_length);
    const Vector h = least_squares(X, y, rank_tolerance);
    if (numerical_rank(X, rank_tolerance) < cols) ++result.rank_deficient_groups;
    result.group_intercepts[s] = h[0];
    mean_coeffs += h.tail(cols - 1);

    Vector full(total_dim);
    int src = 1;
    int dst = 0;
    for (int k = 0; k < p; ++k) {
      const int J = bases[k].dimension();
      full.segment(dst, J) = detail::expand_reduced(h.segment(src, J - 1));
      src += J - 1;
      dst += J;
    }
    result.group_coefficients.push_back(std::move(full));
  }
  mean_coeffs /= static_cast<double>(result.group_count);

  int offset = 0;
  for (int k = 0; k < p; ++k) {
    const int J = bases[k].dimension();
    result.gamma.push_back(additive(bases[k], detail::expand_reduced(mean_coeffs.segment(offset, J - 1)), anchors[k]));
    offset += J - 1;
  }
  return result;
}

Step2Result step2_alpha(const TimeSeriesDataset& data, std::span<const ComponentFunction> gamma,
                        std::span<const SplineBasis> bases) {
  const int p = data.covariate_count();
  if (static_cast<int>(gamma.size()) != p || static_cast<int>(bases.size()) != p + 1) {
    throw std::invalid_argument("step2_alpha: need p plug-in functions and p + 1 time bases");
  }
  for (int k = 0; k < p; ++k) {
    if (!(gamma[k].l2_norm() > 1e-10)) throw DegenerateComponentError(k + 1, "step2_alpha (plug-in gamma)");
  }
  const int T = data.length();
  int cols = 0;
  for (const auto& b : bases) cols += b.dimension();

  DesignMatrix X(T, cols);
  int c = 0;
  for (int k = 0; k <= p; ++k) {
    const Matrix phi = detail::time_design(data, bases[k]);
    if (k == 0) {
      X.middleCols(c, phi.cols()) = phi;
    } else {
      const Vector g = detail::eval_over_covariate(data, k - 1, gamma[k - 1]);
      X.middleCols(c, phi.cols()) = g.asDiagonal() * phi;
    }
    c += static_cast<int>(phi.cols());
  }
  const Vector coeffs = least_squares(X, data.response());

  Step2Result result;
  c = 0;
  for (int k = 0; k <= p; ++k) {
    const int J = bases[k].dimension();
    result.delta.push_back(varying_coefficient(bases[k], coeffs.segment(c, J)));
    c += J;
  }
  auto normalized = normalize(result.delta);
  result.alpha = std::move(normalized.alpha);
  result.scales = std::move(normalized.scales);
  return result;
}

std::vector<ComponentFunction> step3_beta(const TimeSeriesDataset& data, std::span<const ComponentFunction> alpha,
                                          std::span<const SplineBasis> bases, std::span<const double> anchors) {
  const int p = data.covariate_count();
  if (static_cast<int>(alpha.size()) != p + 1 || static_cast<int>(bases.size()) != p ||
      static_cast<int>(anchors.size()) != p) {
    throw std::invalid_argument("step3_beta: need p + 1 alpha curves, p bases and p anchors");
  }
  std::vector<ComponentFunction> beta;
  if (p == 0) return beta;
  const int T = data.length();
  int cols = 0;
  for (const auto& b : bases) cols += b.dimension() - 1;

  DesignMatrix X(T, cols);
  int c = 0;
  for (int k = 0; k < p; ++k) {
    const Matrix psi = detail::centered_design(detail::column(data, k), bases[k], anchors[k]);
    const Vector a = detail::eval_over_time(data, alpha[k + 1]);
    X.middleCols(c, psi.cols()) = a.asDiagonal() * psi;
    c += static_cast<int>(psi.cols());
  }
  const Vector target = data.response() - detail::eval_over_time(data, alpha[0]);
  const Vector f = least_squares(X, target);

  c = 0;
  for (int k = 0; k < p; ++k) {
    const int J = bases[k].dimension();
    beta.push_back(additive(bases[k], detail::expand_reduced(f.segment(c, J - 1)), anchors[k]));
    c += J - 1;
  }
  return beta;
}

VcamFit fit_three_step(const TimeSeriesDataset& data, const EstimationConfig& config, int segment_length,
                       int interior_count) {
  const int p = data.covariate_count();
  const auto anchors = resolve_anchors(data, config.anchor);
  const auto bases_step1 = covariate_bases(data, config.order_step1, interior_count);
  const auto bases_time = time_bases(p, config.order_step2, interior_count);
  const auto bases_step3 = covariate_bases(data, config.order_step3, interior_count);

  VcamFit fit;
  Step1Result step1;
  if (p > 0) {
    step1 = step1_gamma(data, segment_length, bases_step1, anchors, config.group_rank_tolerance);
  } else if (segment_length < 1 || data.length() % segment_length != 0) {
    throw std::invalid_argument("fit_three_step: segment length must divide T");
  }
  Step2Result step2 = step2_alpha(data, step1.gamma, bases_time);
  fit.beta = step3_beta(data, step2.alpha, bases_step3, anchors);
  Vector scales = step2.scales;
  for (int round = 0; round < config.extra_rounds && p > 0; ++round) {
    step2 = step2_alpha(data, fit.beta, bases_time);
    fit.beta = step3_beta(data, step2.alpha, bases_step3, anchors);
    scales = scales.cwiseProduct(step2.scales);
  }
  fit.alpha = std::move(step2.alpha);
  fit.scales = std::move(scales);

  auto& diag = fit.diagnostics;
  diag.rss = residual_sum_of_squares(data, fit.alpha, fit.beta);
  diag.segment_length = segment_length;
  diag.interior_knots = interior_count;
  diag.group_count = data.length() / segment_length;
  diag.rank_deficient_groups = step1.rank_deficient_groups;
  diag.rounds = 1 + config.extra_rounds;
  diag.bic = estimation_bic(diag.rss, data.length(), p, interior_count + config.order_step3);
  return fit;
}

double estimation_bic(double rss, int length, int covariates, int basis_dimension) {
  const double T = length;
  const double ratio = T / basis_dimension;
  return std::log(rss / T) + covariates * std::log(ratio) / ratio;
}

BicSelection select_by_bic(const TimeSeriesDataset& data, const EstimationConfig& config) {
  std::vector<int> Ks = config.K_grid;
  std::vector<int> Is = config.I_grid;
  std::sort(Ks.begin(), Ks.end());
  std::sort(Is.begin(), Is.end());

  BicSelection best;
  double best_bic = std::numeric_limits<double>::infinity();
  bool found = false;
  for (int K : Ks) {
    for (int I : Is) {
      if (!admissible(data, config, I, K)) continue;
      VcamFit fit = fit_three_step(data, config, I, K);
      const double bic = fit.diagnostics.bic;
      best.table.push_back({I, K, fit.diagnostics.rss, bic});
      if (!found || bic < best_bic) {
        found = true;
        best_bic = bic;
        best.segment_length = I;
        best.interior_count = K;
        best.fit = std::move(fit);
      }
    }
  }
  if (!found) {
    throw std::invalid_argument("select_by_bic: no admissible (I, K) pair for T = " +
                                std::to_string(data.length()));
  }
  return best;
}

}  // namespace vcam
