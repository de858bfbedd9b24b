// Imputation and uncertainty quantification on a fitted model: conditional
// latent moments for missing coordinates, data-scale point imputations,
// confidence intervals (continuous), correct-prediction probability lower
// bounds (ordinal), and leave-one-out reliability scores.
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lrgc/em.hpp"
#include "lrgc/errors.hpp"
#include "lrgc/marginals.hpp"
#include "lrgc/normal.hpp"
#include "lrgc/observed.hpp"
#include "lrgc/truncnorm.hpp"

namespace lrgc {

struct MissingEntryUQ {
  double latent_mean = 0.0;
  double latent_var = 1.0;
  double imputed = 0.0;
  std::optional<std::pair<double, double>> interval;  // continuous/linear
  std::optional<double> prob_bound;                   // ordinal, may be < 0
};

struct MissingEntry {
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  MissingEntryUQ uq;
  double reliability = 0.0;  // larger = more reliable, both data kinds
};

struct ImputationResult {
  Eigen::MatrixXd X_hat;              // observed cells pass through exactly
  std::vector<MissingEntry> entries;  // missing cells in (row, col) order
  double alpha = 0.05;
};

// E[z_M|x_O] and Var[z_M|x_O] (diagonal) for one row through the k x k
// system M = sigma2 I + W_O^T W_O:
//   mean_j = w_j . h                      with h = M^{-1} W_O^T E[z_O|x_O]
//   var_j  = sigma2 + sigma2 w_j.u_j + u_j^T S u_j
// with u_j = M^{-1} w_j and S = W_O^T diag(var_O) W_O capturing the surviving
// (diagonal) uncertainty of the observed coordinates. An empty O collapses
// to the prior moments: mean 0, var sigma2 + |w_j|^2.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> conditional_moments_row(
    const std::vector<int>& obs, const std::vector<int>& miss,
    const CopulaParams& params, const LatentRowMoments& row_moments) {
  const Eigen::MatrixXd W_O = params.W(obs, Eigen::all);
  const Eigen::MatrixXd W_M = params.W(miss, Eigen::all);
  Eigen::MatrixXd M = W_O.transpose() * W_O;
  M.diagonal().array() += params.sigma2;
  const Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) {
    throw SingularSystem("sigma2 I + W_O^T W_O is not positive definite");
  }
  const Eigen::VectorXd h = llt.solve(W_O.transpose() * row_moments.mean);
  const Eigen::MatrixXd U = llt.solve(W_M.transpose());  // k x |Miss|
  const Eigen::MatrixXd S =
      W_O.transpose() * row_moments.var_diag.asDiagonal() * W_O;

  const Eigen::Index nm = W_M.rows();
  Eigen::VectorXd mean(nm), var(nm);
  for (Eigen::Index j = 0; j < nm; ++j) {
    mean[j] = W_M.row(j).dot(h);
    const Eigen::VectorXd u = U.col(j);
    var[j] = params.sigma2 + params.sigma2 * W_M.row(j).dot(u) +
             u.dot(S * u);
  }
  return {std::move(mean), std::move(var)};
}

// Data-scale point imputations: the forward marginal map at the latent mean.
inline std::vector<double> impute_row(
    const std::vector<int>& miss, const std::vector<MarginalModel>& marginals,
    const Eigen::VectorXd& latent_mean) {
  std::vector<double> out(miss.size());
  for (std::size_t idx = 0; idx < miss.size(); ++idx) {
    out[idx] = marginals[static_cast<std::size_t>(miss[idx])].g_forward(
        latent_mean[static_cast<Eigen::Index>(idx)]);
  }
  return out;
}

// (1-alpha) interval on the data scale: push the Gaussian interval for the
// latent value through the monotone forward map.
inline std::pair<double, double> confidence_interval(
    const MarginalModel& marginal, double latent_mean, double latent_var,
    double alpha) {
  const double z_star = norm_quantile(1.0 - alpha / 2.0);
  const double half = z_star * std::sqrt(latent_var);
  return {marginal.g_forward(latent_mean - half),
          marginal.g_forward(latent_mean + half)};
}

// Lower bound on Pr(|imputed - truth| <= d) for an ordinal entry:
// 1 - latent_var / d_j^2, where d_j is the distance from the latent mean to
// the nearest cut that would change the imputed level by more than d.
// Outermost cuts are infinitely far, and the bound may be negative; it is
// reported raw since clamping would erase ranking information.
inline double ordinal_prob_bound(const OrdinalMarginal& marginal,
                                 double latent_mean, double latent_var,
                                 double imputed_level, int d = 0) {
  const auto it = std::lower_bound(marginal.levels.begin(),
                                   marginal.levels.end(), imputed_level);
  if (it == marginal.levels.end() || *it != imputed_level) {
    throw UnknownLevel("imputed value is not a level of the column");
  }
  const long k_hat = (it - marginal.levels.begin()) + 1;  // 1-based level
  const long K = static_cast<long>(marginal.n_levels());
  const auto cut_distance = [&](long idx) {  // s_idx with s_0/-inf, s_K/+inf
    if (idx <= 0 || idx >= K) return std::numeric_limits<double>::infinity();
    return std::fabs(latent_mean -
                     marginal.cut_points[static_cast<std::size_t>(idx - 1)]);
  };
  const double d_j = std::min(cut_distance(std::max(k_hat - 1 - d, 0L)),
                              cut_distance(std::min(k_hat + d, K)));
  if (std::isinf(d_j)) return 1.0;
  return 1.0 - latent_var / (d_j * d_j);
}

namespace detail {

// Latent row moments for imputation when only (data, marginals, params) are
// available: exact for rows without ordinal intervals, otherwise warm-start
// sweeps run to a fixed point.
inline LatentRowMoments converged_row_moments(const RowView& row,
                                              const CopulaParams& params,
                                              int max_sweeps = 100,
                                              double tol = 1e-10) {
  LatentRowMoments m = init_row_moments(row.intervals);
  if (!row.any_interval || row.obs.empty()) return m;
  const Eigen::MatrixXd W_O = params.W(row.obs, Eigen::all);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    LatentRowMoments next =
        ordinal_row_estep(row.intervals, W_O, params.sigma2, m, 1);
    const double delta = (next.mean - m.mean).cwiseAbs().maxCoeff();
    m = std::move(next);
    if (delta < tol) break;
  }
  return m;
}

}  // namespace detail

// Reliability scores, larger = more reliable for both data kinds:
//   - ordinal entries score the d=0 probability bound;
//   - continuous/linear entries score the leave-one-out ratio
//     |P(D_alpha) without this entry|_F / |P(X_hat) without this entry|_F,
//     derived in O(1) per entry from two global sums of squares; dropping a
//     large interval leaves a small remaining numerator, so wide-interval
//     entries rank less reliable.
inline void compute_reliability(std::vector<MissingEntry>& entries,
                                const std::vector<MarginalModel>& marginals) {
  double sum_d2 = 0.0, sum_x2 = 0.0;
  for (const auto& e : entries) {
    if (e.uq.interval) {
      const double len = e.uq.interval->second - e.uq.interval->first;
      sum_d2 += len * len;
      sum_x2 += e.uq.imputed * e.uq.imputed;
    }
  }
  for (auto& e : entries) {
    const auto& marg = marginals[static_cast<std::size_t>(e.col)];
    if (marg.kind == ColumnKind::ordinal) {
      e.reliability = ordinal_prob_bound(marg.ordinal(), e.uq.latent_mean,
                                         e.uq.latent_var, e.uq.imputed, 0);
      continue;
    }
    const double len = e.uq.interval->second - e.uq.interval->first;
    const double num = std::max(sum_d2 - len * len, 0.0);
    const double den = sum_x2 - e.uq.imputed * e.uq.imputed;
    if (!(den > 0.0)) {
      throw UndefinedReliability(
          "leave-one-out denominator is zero for entry (" +
          std::to_string(e.row) + "," + std::to_string(e.col) + ")");
    }
    e.reliability = std::sqrt(num / den);
  }
}

// Impute all missing entries given per-row latent moments from the fit.
inline ImputationResult impute_with_moments(
    const ObservedMatrix& X, const std::vector<MarginalModel>& marginals,
    const CopulaParams& params,
    const std::vector<LatentRowMoments>& row_moments, double alpha = 0.05) {
  if (static_cast<Eigen::Index>(marginals.size()) != X.cols()) {
    throw SchemaMismatch("marginal list does not match matrix width");
  }
  ImputationResult result;
  result.alpha = alpha;
  result.X_hat = X.values;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    std::vector<int> obs, miss;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      (X.observed(i, j) ? obs : miss).push_back(static_cast<int>(j));
    }
    if (miss.empty()) continue;
    const auto [mean, var] = conditional_moments_row(
        obs, miss, params, row_moments[static_cast<std::size_t>(i)]);
    for (std::size_t idx = 0; idx < miss.size(); ++idx) {
      const Eigen::Index j = miss[idx];
      const auto& marg = marginals[static_cast<std::size_t>(j)];
      MissingEntry e;
      e.row = i;
      e.col = j;
      e.uq.latent_mean = mean[static_cast<Eigen::Index>(idx)];
      e.uq.latent_var = var[static_cast<Eigen::Index>(idx)];
      e.uq.imputed = marg.g_forward(e.uq.latent_mean);
      if (marg.kind == ColumnKind::ordinal) {
        e.uq.prob_bound = ordinal_prob_bound(
            marg.ordinal(), e.uq.latent_mean, e.uq.latent_var, e.uq.imputed);
      } else {
        e.uq.interval = confidence_interval(marg, e.uq.latent_mean,
                                            e.uq.latent_var, alpha);
      }
      result.X_hat(i, j) = e.uq.imputed;
      result.entries.push_back(std::move(e));
    }
  }
  compute_reliability(result.entries, marginals);
  return result;
}

// Impute from (data, marginals, params) alone, reconstructing latent row
// moments on the fly (exact for continuous rows, converged sweeps for
// ordinal ones). This is the path for a model loaded from disk.
inline ImputationResult impute(const ObservedMatrix& X,
                               const std::vector<MarginalModel>& marginals,
                               const CopulaParams& params,
                               double alpha = 0.05) {
  const auto rows = detail::build_row_views(X, marginals);
  std::vector<LatentRowMoments> moments(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    moments[i] = detail::converged_row_moments(rows[i], params);
  }
  return impute_with_moments(X, marginals, params, moments, alpha);
}

// Indices (into result.entries) of the ceil(m% * N) most reliable missing
// entries. Ties resolve to (row, col) order, which the entries already
// carry, so a stable sort suffices.
inline std::vector<std::size_t> rank_by_reliability(
    const ImputationResult& result, double m_percent) {
  if (!(m_percent > 0.0) || m_percent > 100.0) {
    throw Error("m_percent must lie in (0, 100]");
  }
  std::vector<std::size_t> order(result.entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return result.entries[a].reliability >
                            result.entries[b].reliability;
                   });
  const auto keep = static_cast<std::size_t>(std::ceil(
      m_percent / 100.0 * static_cast<double>(result.entries.size())));
  order.resize(std::min(keep, order.size()));
  return order;
}

}  // namespace lrgc
