// Approximate EM fitting of the low rank Gaussian copula: latent factor
// loadings W (p x k) and noise variance sigma2 with WW^T + sigma2 I kept at
// unit diagonal. E-step expectations are exact for continuous columns and
// one warm-started Jacobi sweep per iteration for ordinal ones.
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "lrgc/errors.hpp"
#include "lrgc/marginals.hpp"
#include "lrgc/observed.hpp"
#include "lrgc/parallel.hpp"
#include "lrgc/rng.hpp"
#include "lrgc/truncnorm.hpp"

namespace lrgc {

struct CopulaParams {
  Eigen::MatrixXd W;  // p x k
  double sigma2;      // in (0,1); |w_j|^2 + sigma2 = 1 per row after rescale
};

struct EmConfig {
  int rank = 1;
  int max_iter = 50;
  double rel_tol = 1e-3;  // on |W_t - W_{t-1}|_F^2 / |W_{t-1}|_F^2
  int jacobi_sweeps = 1;
  std::uint64_t seed = 0;
  int threads = 0;  // 0: LRGC_THREADS env, then hardware
};

// Per-column accumulators of the E-step expectations. Merging is associative
// and performed in fixed chunk order, so fits are reproducible for any
// thread count.
struct SufficientStats {
  std::vector<Eigen::VectorXd> A;  // p entries of length k: sum E[z_ij t_i]
  std::vector<Eigen::MatrixXd> B;  // p entries k x k: sum E[t_i t_i^T]
  double zz_total = 0.0;           // sum of E[z_ij^2] over observed cells
  std::size_t n_observed = 0;

  static SufficientStats zero(Eigen::Index p, Eigen::Index k) {
    SufficientStats s;
    s.A.assign(static_cast<std::size_t>(p), Eigen::VectorXd::Zero(k));
    s.B.assign(static_cast<std::size_t>(p), Eigen::MatrixXd::Zero(k, k));
    return s;
  }

  void merge(const SufficientStats& o) {
    for (std::size_t j = 0; j < A.size(); ++j) {
      A[j] += o.A[j];
      B[j] += o.B[j];
    }
    zz_total += o.zz_total;
    n_observed += o.n_observed;
  }
};

struct FitDiagnostics {
  std::vector<double> rel_change;  // one per EM iteration
  std::vector<double> loglik;      // continuous data only; entry 0 = init
  int iterations = 0;
  bool converged = false;
};

struct FitResult {
  CopulaParams params;
  std::vector<LatentRowMoments> row_moments;  // indexed over observed cells
  FitDiagnostics diag;
};

// Spherically symmetric rows scaled onto the unit-diagonal constraint with
// starting noise sigma2 = 0.5.
inline CopulaParams init_params(Eigen::Index p, int k, std::uint64_t seed) {
  if (k < 1 || static_cast<Eigen::Index>(k) >= p) {
    throw BadRank("rank must satisfy 1 <= k < p");
  }
  const double sigma2 = 0.5;
  Eigen::MatrixXd W(p, k);
  Rng rng = make_rng(seed, 0x1717);
  for (Eigen::Index j = 0; j < p; ++j) {
    for (int l = 0; l < k; ++l) W(j, l) = std_normal(rng);
    W.row(j) *= std::sqrt(1.0 - sigma2) / W.row(j).norm();
  }
  return {std::move(W), sigma2};
}

// One row's E-step output: refreshed latent moments plus the expectations
// the M-step consumes.
struct RowEStep {
  LatentRowMoments moments;
  Eigen::VectorXd E_t;   // E[t_i | x_O]
  Eigen::MatrixXd E_tz;  // k x |O|: E[t_i z_{iO}^T | x_O]
  Eigen::MatrixXd E_tt;  // k x k: E[t_i t_i^T | x_O]
  double E_zz;           // E[|z_O|^2 | x_O]
};

// Latent row moments first (exact for point intervals, one Jacobi sweep per
// call otherwise), then factor expectations through M = sigma2 I + W_O^T W_O:
//   E[t|x]    = M^{-1} W_O^T E[z_O|x]
//   E[t z^T]  = E[t] E[z]^T + M^{-1} W_O^T diag(var)
//   E[t t^T]  = sigma2 M^{-1} + E[t]E[t]^T + M^{-1}W_O^T diag(var) W_O M^{-1}
// with Cov[z_O|x] already reduced to its diagonal.
inline RowEStep e_step_row(const std::vector<LatentInterval>& intervals,
                           const Eigen::MatrixXd& W_O, double sigma2,
                           const LatentRowMoments& prev, int jacobi_sweeps = 1) {
  bool any_interval = false;
  for (const auto& iv : intervals) {
    if (iv.lower != iv.upper) {
      any_interval = true;
      break;
    }
  }
  RowEStep out;
  out.moments = any_interval
                    ? ordinal_row_estep(intervals, W_O, sigma2, prev, jacobi_sweeps)
                    : prev;

  const Eigen::Index k = W_O.cols();
  Eigen::MatrixXd M = W_O.transpose() * W_O;
  M.diagonal().array() += sigma2;
  const Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) {
    throw SingularSystem("sigma2 I + W_O^T W_O is not positive definite");
  }
  const Eigen::MatrixXd U = llt.solve(W_O.transpose());  // k x |O|
  const Eigen::VectorXd& m = out.moments.mean;
  const Eigen::VectorXd& v = out.moments.var_diag;

  out.E_t = U * m;
  out.E_tz = out.E_t * m.transpose() + U * v.asDiagonal();
  out.E_tt = sigma2 * llt.solve(Eigen::MatrixXd::Identity(k, k)) +
             out.E_t * out.E_t.transpose() +
             U * v.asDiagonal() * U.transpose();
  out.E_zz = m.squaredNorm() + v.sum();
  return out;
}

// Unconstrained Q-maximizer: per-column ridge-like solve for the loadings,
// then the mean expected squared residual for the noise. The residual trace
// collapses to zz_total - sum_j A_j . w_j because B_j w_j = A_j at the
// optimum. A tiny floor keeps sigma2 positive on noiseless data.
inline CopulaParams m_step(const SufficientStats& stats) {
  const std::size_t p = stats.A.size();
  if (stats.n_observed == 0) {
    throw NoObservations("no observed entries to fit");
  }
  const Eigen::Index k = stats.A[0].size();
  Eigen::MatrixXd W(static_cast<Eigen::Index>(p), k);
  double cross = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    if (stats.B[j].isZero(0.0)) {  // column never contributed a row
      throw EmptyColumn("column #" + std::to_string(j) +
                        " has no observations");
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(stats.B[j]);
    if (llt.info() != Eigen::Success) {
      throw SingularSystem("sufficient statistics B_j not positive definite");
    }
    const Eigen::VectorXd w = llt.solve(stats.A[j]);
    W.row(static_cast<Eigen::Index>(j)) = w.transpose();
    cross += stats.A[j].dot(w);
  }
  double sigma2 =
      (stats.zz_total - cross) / static_cast<double>(stats.n_observed);
  sigma2 = std::max(sigma2, 1e-9);
  return {std::move(W), sigma2};
}

// Project the unconstrained maximizer back onto the unit-diagonal set:
// sigma2 becomes the average per-row noise share, rows are renormalized.
inline CopulaParams rescale(const CopulaParams& unc) {
  const Eigen::Index p = unc.W.rows();
  double sigma2_new = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double n2 = unc.W.row(j).squaredNorm();
    if (n2 == 0.0) {
      throw ZeroRow("loading row " + std::to_string(j) + " is exactly zero");
    }
    sigma2_new += unc.sigma2 / (n2 + unc.sigma2);
  }
  sigma2_new /= static_cast<double>(p);
  CopulaParams out{unc.W, sigma2_new};
  const double target = std::sqrt(1.0 - sigma2_new);
  for (Eigen::Index j = 0; j < p; ++j) {
    out.W.row(j) *= target / out.W.row(j).norm();
  }
  return out;
}

// Exact Gaussian log density of one observed row under N(0, W_O W_O^T +
// sigma2 I), through the k x k system (matrix determinant lemma + Woodbury).
inline double gaussian_row_loglik(const Eigen::MatrixXd& W_O, double sigma2,
                                  const Eigen::VectorXd& z) {
  const Eigen::Index n = W_O.rows();
  const Eigen::Index k = W_O.cols();
  Eigen::MatrixXd M = W_O.transpose() * W_O;
  M.diagonal().array() += sigma2;
  const Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) {
    throw SingularSystem("sigma2 I + W_O^T W_O is not positive definite");
  }
  double logdet_M = 0.0;
  for (Eigen::Index l = 0; l < k; ++l) {
    logdet_M += 2.0 * std::log(llt.matrixL()(l, l));
  }
  const Eigen::VectorXd s = W_O.transpose() * z;
  const double quad = (z.squaredNorm() - s.dot(llt.solve(s))) / sigma2;
  const double logdet =
      static_cast<double>(n - k) * std::log(sigma2) + logdet_M;
  return -0.5 * (static_cast<double>(n) * std::log(2.0 * M_PI) + logdet + quad);
}

namespace detail {

// Immutable per-row view prepared once per fit: observed indices and the
// latent intervals (points for continuous/linear columns).
struct RowView {
  std::vector<int> obs;
  std::vector<LatentInterval> intervals;
  bool any_interval = false;
};

inline std::vector<RowView> build_row_views(
    const ObservedMatrix& X, const std::vector<MarginalModel>& marginals) {
  std::vector<RowView> rows(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    auto& r = rows[static_cast<std::size_t>(i)];
    r.obs = X.observed_row_indices(i);
    r.intervals.reserve(r.obs.size());
    for (int j : r.obs) {
      const LatentInterval iv =
          marginals[static_cast<std::size_t>(j)].g_inverse(X.values(i, j));
      r.any_interval |= iv.lower != iv.upper;
      r.intervals.push_back(iv);
    }
  }
  return rows;
}

}  // namespace detail

// Full approximate-EM fit. Stops when the squared relative Frobenius change
// of W falls below cfg.rel_tol or after cfg.max_iter iterations. Diagnostics
// carry the exact observed log-likelihood only when no column is ordinal
// (for ordinal data that likelihood is an intractable integral; the relative
// change of W is the convergence signal).
inline FitResult fit(const ObservedMatrix& X,
                     const std::vector<MarginalModel>& marginals,
                     const EmConfig& cfg) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (static_cast<Eigen::Index>(marginals.size()) != p) {
    throw SchemaMismatch("marginal list does not match matrix width");
  }
  if (cfg.max_iter < 1) {
    throw Error("max_iter must be at least 1");
  }
  if (!(cfg.rel_tol > 0.0)) {
    throw Error("rel_tol must be positive");
  }

  const auto rows = detail::build_row_views(X, marginals);
  std::vector<std::size_t> col_counts(static_cast<std::size_t>(p), 0);
  std::size_t n_observed = 0;
  for (const auto& r : rows) {
    for (int j : r.obs) col_counts[static_cast<std::size_t>(j)]++;
    n_observed += r.obs.size();
  }
  if (n_observed == 0) {
    throw NoObservations("matrix has no observed entries");
  }
  for (std::size_t j = 0; j < col_counts.size(); ++j) {
    if (col_counts[j] == 0) {
      throw EmptyColumn("column #" + std::to_string(j) +
                        " has no observations");
    }
  }

  bool any_ordinal = false;
  for (const auto& m : marginals) {
    any_ordinal |= m.kind == ColumnKind::ordinal;
  }

  CopulaParams params = init_params(p, cfg.rank, cfg.seed);
  const Eigen::Index k = params.W.cols();

  // Warm-start moments: exact points for continuous coordinates, standard
  // normal truncated to the interval for ordinal ones.
  std::vector<LatentRowMoments> moments(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    moments[i] = init_row_moments(rows[i].intervals);
  }

  const auto loglik_all = [&]() {
    double total = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].obs.empty()) continue;
      const Eigen::MatrixXd W_O = params.W(rows[i].obs, Eigen::all);
      total += gaussian_row_loglik(W_O, params.sigma2, moments[i].mean);
    }
    return total;
  };

  FitDiagnostics diag;
  if (!any_ordinal) diag.loglik.push_back(loglik_all());

  const std::size_t n_chunks = chunk_count(rows.size());
  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    std::vector<SufficientStats> partial(n_chunks);
    parallel_chunks(
        rows.size(), cfg.threads,
        [&](std::size_t ci, std::size_t lo, std::size_t hi) {
          SufficientStats local = SufficientStats::zero(p, k);
          for (std::size_t i = lo; i < hi; ++i) {
            const auto& r = rows[i];
            if (r.obs.empty()) continue;  // no likelihood contribution
            const Eigen::MatrixXd W_O = params.W(r.obs, Eigen::all);
            RowEStep es = e_step_row(r.intervals, W_O, params.sigma2,
                                     moments[i], cfg.jacobi_sweeps);
            moments[i] = std::move(es.moments);
            for (std::size_t idx = 0; idx < r.obs.size(); ++idx) {
              const auto j = static_cast<std::size_t>(r.obs[idx]);
              local.A[j] += es.E_tz.col(static_cast<Eigen::Index>(idx));
              local.B[j] += es.E_tt;
            }
            local.zz_total += es.E_zz;
            local.n_observed += r.obs.size();
          }
          partial[ci] = std::move(local);
        });
    SufficientStats stats = SufficientStats::zero(p, k);
    for (const auto& part : partial) stats.merge(part);

    const CopulaParams next = rescale(m_step(stats));
    const double rel = (next.W - params.W).squaredNorm() / params.W.squaredNorm();
    params = next;
    diag.rel_change.push_back(rel);
    if (!any_ordinal) diag.loglik.push_back(loglik_all());
    diag.iterations = iter + 1;
    if (rel < cfg.rel_tol) {
      diag.converged = true;
      break;
    }
  }

  return FitResult{std::move(params), std::move(moments), std::move(diag)};
}

}  // namespace lrgc
