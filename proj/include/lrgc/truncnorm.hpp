// Univariate truncated normal moments, hardened for extreme tails, plus the
// per-row Jacobi approximation of E[z_O|x_O] and diag Cov[z_O|x_O] used for
// ordinal data. Everything here is a pure function; rows never share state.
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "lrgc/errors.hpp"
#include "lrgc/marginals.hpp"
#include "lrgc/normal.hpp"

namespace lrgc {

struct TruncMoments {
  double mean;
  double var;
};

// E[z_O|x_O] and the diagonal of Cov[z_O|x_O] for one row, indexed over the
// row's observed coordinates. Carried across EM iterations as a warm start.
struct LatentRowMoments {
  Eigen::VectorXd mean;
  Eigen::VectorXd var_diag;
};

// Moments of N(0,1) conditioned on (alpha, beta]. Branch layout:
//   - straddling intervals (alpha <= 0 <= beta) use the direct complementary
//     form, which has no cancellation there;
//   - same-sign intervals are mirrored to 0 < A < B and evaluated through
//     erfcx ratios, since the direct difference of normal CDFs loses all
//     precision well before |bound| reaches 8;
//   - widths below 1e-7 take the uniform-density limit;
//   - defective denominators (possible only past ~1e300 scale separation)
//     degrade to the nearest finite endpoint with zero variance, never NaN.
inline TruncMoments std_truncnorm_moments(double alpha, double beta) {
  const double inf = std::numeric_limits<double>::infinity();
  const bool lo_inf = alpha == -inf;
  const bool hi_inf = beta == inf;
  if (lo_inf && hi_inf) return {0.0, 1.0};
  if (hi_inf) {
    const double h = (alpha <= 0.0)
                         ? norm_pdf(alpha) / (0.5 * std::erfc(alpha / sqrt_2))
                         : sqrt_2_over_pi / erfcx(alpha / sqrt_2);
    return {h, std::max(1.0 + alpha * h - h * h, 0.0)};
  }
  if (lo_inf) {
    const TruncMoments m = std_truncnorm_moments(-beta, inf);
    return {-m.mean, m.var};
  }
  if (alpha <= 0.0 && 0.0 <= beta) {
    const double D = 0.5 * (std::erfc(alpha / sqrt_2) - std::erfc(beta / sqrt_2));
    if (D < 1e-300 || !std::isfinite(D)) return {0.5 * (alpha + beta), 0.0};
    const double pa = norm_pdf(alpha);
    const double pb = norm_pdf(beta);
    const double R = (pa - pb) / D;
    return {R, std::max(1.0 + (alpha * pa - beta * pb) / D - R * R, 0.0)};
  }
  // Same sign: mirror so that 0 < A < B.
  double sgn = 1.0, A = alpha, B = beta;
  if (alpha < 0.0) {
    sgn = -1.0;
    A = -beta;
    B = -alpha;
  }
  if (B - A < 1e-7) {
    return {sgn * 0.5 * (A + B), (B - A) * (B - A) / 12.0};
  }
  const double ex = -0.5 * (B - A) * (B + A);
  const double q = std::exp(ex);
  const double one_m_q = -std::expm1(ex);
  const double den = erfcx(A / sqrt_2) - q * erfcx(B / sqrt_2);
  if (den <= 0.0 || !std::isfinite(den)) return {sgn * A, 0.0};
  const double R = sqrt_2_over_pi * one_m_q / den;
  const double S = sqrt_2_over_pi * (A - q * B) / den;
  return {sgn * R, std::max(1.0 + S - R * R, 0.0)};
}

// Moments of N(mu, sigma2) conditioned on (a, b]; a and b may be +/-inf.
// The mean is clamped into [a, b] and the variance into [0, sigma2], which
// both hold exactly in reals and protect the far-tail fallbacks.
inline TruncMoments truncnorm_moments(double mu, double sigma2, double a,
                                      double b) {
  if (!(a < b)) {
    throw EmptyInterval("truncation interval is empty");
  }
  const double inf = std::numeric_limits<double>::infinity();
  const double s = std::sqrt(sigma2);
  const double alpha = std::isfinite(a) ? (a - mu) / s : -inf;
  const double beta = std::isfinite(b) ? (b - mu) / s : inf;
  const TruncMoments m = std_truncnorm_moments(alpha, beta);
  const double mean = std::min(std::max(mu + s * m.mean, a), b);
  const double var = std::min(std::max(sigma2 * m.var, 0.0), sigma2);
  return {mean, var};
}

// For each observed coordinate j, the mean and variance of z_j conditional
// on every other observed coordinate fixed at latent_mean, under
// z_O ~ N(0, W_O W_O^T + sigma2 I). Cost O(k^2 |O|) through the k-by-k
// system M = sigma2 I + W_O^T W_O:
//   sigma_j^2 = sigma2 / (1 - c_j),        c_j = w_j^T M^{-1} w_j
//   mu_j = m_j - (m_j - w_j^T M^{-1} W_O^T m) / (1 - c_j)
// which are the leave-one-out conditionals by the Woodbury identity.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> conditional_mu_sigma(
    const Eigen::MatrixXd& W_O, double sigma2,
    const Eigen::VectorXd& latent_mean) {
  const Eigen::Index n_obs = W_O.rows();
  const Eigen::Index k = W_O.cols();
  Eigen::MatrixXd M = W_O.transpose() * W_O;
  M.diagonal().array() += sigma2;
  const Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) {
    throw SingularSystem("sigma2 I + W_O^T W_O is not positive definite");
  }
  const Eigen::MatrixXd V = llt.solve(W_O.transpose());   // k x |O|
  const Eigen::VectorXd u = V * latent_mean;              // M^{-1} W_O^T m
  Eigen::VectorXd mu(n_obs), s2(n_obs);
  for (Eigen::Index j = 0; j < n_obs; ++j) {
    const double c = W_O.row(j).dot(V.col(j));
    const double denom = 1.0 - c;
    if (!(denom > 0.0)) {
      throw SingularSystem("conditional variance denominator not positive");
    }
    const double pred = W_O.row(j).dot(u);
    mu[j] = latent_mean[j] - (latent_mean[j] - pred) / denom;
    s2[j] = sigma2 / denom;
  }
  return {std::move(mu), std::move(s2)};
}

// Starting moments for a fresh row: each coordinate takes the truncated
// moments of N(0,1) on its interval; point intervals (exactly observed
// latent values) pass through with zero variance.
inline LatentRowMoments init_row_moments(
    const std::vector<LatentInterval>& intervals) {
  const Eigen::Index n = static_cast<Eigen::Index>(intervals.size());
  LatentRowMoments out{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& iv = intervals[static_cast<std::size_t>(j)];
    if (iv.lower == iv.upper) {
      out.mean[j] = iv.lower;
      out.var_diag[j] = 0.0;
      continue;
    }
    const TruncMoments m = truncnorm_moments(0.0, 1.0, iv.lower, iv.upper);
    out.mean[j] = m.mean;
    out.var_diag[j] = m.var;
  }
  return out;
}

// One (or `sweeps`) Jacobi sweep(s) of the nonlinear fixed-point system for
// E[z_O|x_O]: conditional moments are computed from prev.mean for every
// coordinate simultaneously, then each coordinate is truncated to its
// interval. Mean and variance both come from the same sweep. Point
// intervals stay fixed but still inform the conditionals of the others.
inline LatentRowMoments ordinal_row_estep(
    const std::vector<LatentInterval>& intervals, const Eigen::MatrixXd& W_O,
    double sigma2, const LatentRowMoments& prev, int sweeps = 1) {
  LatentRowMoments cur = prev;
  const Eigen::Index n = W_O.rows();
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    const auto [mu, s2] = conditional_mu_sigma(W_O, sigma2, cur.mean);
    LatentRowMoments next{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& iv = intervals[static_cast<std::size_t>(j)];
      if (iv.lower == iv.upper) {
        next.mean[j] = iv.lower;
        next.var_diag[j] = 0.0;
        continue;
      }
      const TruncMoments m = truncnorm_moments(mu[j], s2[j], iv.lower, iv.upper);
      next.mean[j] = m.mean;
      next.var_diag[j] = m.var;
    }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace lrgc
