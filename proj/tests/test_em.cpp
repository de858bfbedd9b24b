#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "lrgc/em.hpp"
#include "lrgc/rng.hpp"

using namespace lrgc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

static const double inf = std::numeric_limits<double>::infinity();

namespace {

// Small LRGC sampler with identity marginals for the fitting tests.
struct Synth {
  ObservedMatrix X;
  MatrixXd W;
  double sigma2;
};

Synth make_continuous(int n, int p, int k, double sigma2, double miss_frac,
                      std::uint64_t seed) {
  Rng rng = make_rng(seed, 0xABC);
  MatrixXd W(p, k);
  for (int j = 0; j < p; ++j) {
    VectorXd row(k);
    for (int l = 0; l < k; ++l) row[l] = std_normal(rng);
    W.row(j) = row.transpose() * (std::sqrt(1.0 - sigma2) / row.norm());
  }
  MatrixXd Z(n, p);
  for (int i = 0; i < n; ++i) {
    VectorXd t(k);
    for (int l = 0; l < k; ++l) t[l] = std_normal(rng);
    for (int j = 0; j < p; ++j) {
      Z(i, j) = W.row(j).dot(t) + std::sqrt(sigma2) * std_normal(rng);
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      if (uniform01(rng) < miss_frac) Z(i, j) = std::nan("");
    }
  }
  return {ObservedMatrix::from_values(std::move(Z)), std::move(W), sigma2};
}

std::vector<MarginalModel> continuous_marginals(const ObservedMatrix& X) {
  return fit_marginals(
      X, std::vector<ColumnKind>(static_cast<std::size_t>(X.cols()),
                                 ColumnKind::continuous));
}

}  // namespace

TEST_CASE("init_params satisfies the unit-diagonal start") {
  const auto params = init_params(4, 2, 7);
  CHECK(params.sigma2 == 0.5);
  for (int j = 0; j < 4; ++j) {
    CHECK(params.W.row(j).squaredNorm() == Catch::Approx(0.5).epsilon(1e-12));
  }
  const auto again = init_params(4, 2, 7);
  CHECK(params.W == again.W);
  const auto other = init_params(4, 2, 8);
  CHECK(params.W != other.W);
}

TEST_CASE("init_params rejects impossible ranks") {
  CHECK_THROWS_AS(init_params(2, 2, 0), BadRank);
  CHECK_THROWS_AS(init_params(5, 0, 0), BadRank);
  CHECK_THROWS_AS(init_params(5, -1, 0), BadRank);
}

TEST_CASE("e_step_row on a continuous row matches the worked example") {
  MatrixXd W(2, 1);
  W << 0.6, 0.6;
  std::vector<LatentInterval> iv{{1.0, 1.0}, {-1.0, -1.0}};
  const auto prev = init_row_moments(iv);
  const auto es = e_step_row(iv, W, 0.64, prev);
  CHECK(es.E_t[0] == Catch::Approx(0.0).margin(1e-15));
  CHECK(es.E_tt(0, 0) == Catch::Approx(0.64 / 1.36).epsilon(1e-12));
  CHECK(es.E_zz == Catch::Approx(2.0).epsilon(1e-14));
  CHECK(es.E_tz.cwiseAbs().maxCoeff() <= 1e-15);
  // Continuous moments pass through untouched.
  CHECK(es.moments.mean[0] == 1.0);
  CHECK(es.moments.var_diag.maxCoeff() == 0.0);
}

TEST_CASE("e_step_row with zero loadings on an ordinal row") {
  MatrixXd W = MatrixXd::Zero(2, 3);
  std::vector<LatentInterval> iv{{0.0, inf}, {-inf, 0.0}};
  const auto es = e_step_row(iv, W, 0.7, init_row_moments(iv));
  CHECK(es.E_t.cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(es.E_tt.isApprox(MatrixXd::Identity(3, 3), 1e-12));
}

TEST_CASE("e_step_row expectations match a Monte Carlo oracle") {
  // k=1, two ordinal coordinates: estimate E[t|x], E[t z|x], E[t^2|x] by
  // rejection sampling and compare with converged sweeps.
  Rng rng = make_rng(31, 0);
  MatrixXd W(2, 1);
  W << 0.7, -0.5;
  const double sigma2 = 0.4;
  std::vector<LatentInterval> iv{{0.2, inf}, {-inf, -0.1}};

  LatentRowMoments warm = init_row_moments(iv);
  RowEStep es = e_step_row(iv, W, sigma2, warm, 60);

  double sum_t = 0, sum_tt = 0, sum_tz0 = 0, sum_tz1 = 0, sum_zz = 0;
  long acc = 0;
  for (long trial = 0; trial < 3000000; ++trial) {
    const double t = std_normal(rng);
    const double z0 = W(0, 0) * t + std::sqrt(sigma2) * std_normal(rng);
    const double z1 = W(1, 0) * t + std::sqrt(sigma2) * std_normal(rng);
    if (z0 > 0.2 && z1 <= -0.1) {
      sum_t += t;
      sum_tt += t * t;
      sum_tz0 += t * z0;
      sum_tz1 += t * z1;
      sum_zz += z0 * z0 + z1 * z1;
      ++acc;
    }
  }
  REQUIRE(acc > 50000);
  // First moments carry the scheme's 0.05 guarantee. Second moments drop
  // the off-diagonal conditional covariance by construction, so they are
  // biased; the loose margins below only guard against formula errors.
  CHECK(es.E_t[0] == Catch::Approx(sum_t / acc).margin(0.05));
  CHECK(es.E_tt(0, 0) == Catch::Approx(sum_tt / acc).margin(0.15));
  CHECK(es.E_tz(0, 0) == Catch::Approx(sum_tz0 / acc).margin(0.15));
  CHECK(es.E_tz(0, 1) == Catch::Approx(sum_tz1 / acc).margin(0.15));
  CHECK(es.E_zz == Catch::Approx(sum_zz / acc).margin(0.15));
}

TEST_CASE("m_step solves the per-column systems") {
  SufficientStats s = SufficientStats::zero(1, 1);
  s.A[0][0] = 2.0;
  s.B[0](0, 0) = 4.0;
  s.zz_total = 1.5;
  s.n_observed = 1;
  const auto params = m_step(s);
  CHECK(params.W(0, 0) == Catch::Approx(0.5).epsilon(1e-14));
  CHECK(params.sigma2 == Catch::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("m_step recovers W from noiseless stats") {
  Rng rng = make_rng(31, 1);
  const int p = 5, k = 2, n = 40;
  MatrixXd W_true(p, k);
  for (int j = 0; j < p; ++j)
    for (int l = 0; l < k; ++l) W_true(j, l) = std_normal(rng);
  SufficientStats s = SufficientStats::zero(p, k);
  for (int i = 0; i < n; ++i) {
    VectorXd t(k);
    for (int l = 0; l < k; ++l) t[l] = std_normal(rng);
    const VectorXd z = W_true * t;
    for (int j = 0; j < p; ++j) {
      s.A[static_cast<std::size_t>(j)] += t * z[j];
      s.B[static_cast<std::size_t>(j)] += t * t.transpose();
      s.zz_total += z[j] * z[j];
    }
    s.n_observed += p;
  }
  const auto params = m_step(s);
  CHECK(params.W.isApprox(W_true, 1e-9));
  CHECK(params.sigma2 <= 1e-6);  // floored just above zero
}

TEST_CASE("m_step with zero cross stats returns the residual variance") {
  SufficientStats s = SufficientStats::zero(1, 2);
  s.B[0] = MatrixXd::Identity(2, 2);
  s.zz_total = 4.0;
  s.n_observed = 2;
  const auto params = m_step(s);
  CHECK(params.W.row(0).norm() == 0.0);
  CHECK(params.sigma2 == Catch::Approx(2.0));
}

TEST_CASE("m_step rejects empty accumulators") {
  SufficientStats s = SufficientStats::zero(2, 1);
  CHECK_THROWS_AS(m_step(s), NoObservations);
  s.n_observed = 3;
  s.B[0](0, 0) = 1.0;  // column 1 still zero
  s.A[0][0] = 0.5;
  s.zz_total = 1.0;
  CHECK_THROWS_AS(m_step(s), EmptyColumn);
}

TEST_CASE("rescale matches the worked example") {
  MatrixXd W(2, 2);
  W << std::sqrt(3.0), 0, 1, 0;
  const auto out = rescale({W, 1.0});
  CHECK(out.sigma2 == Catch::Approx(0.375).epsilon(1e-14));
  CHECK(out.W.row(0).squaredNorm() == Catch::Approx(0.625).epsilon(1e-12));
  CHECK(out.W.row(1).squaredNorm() == Catch::Approx(0.625).epsilon(1e-12));
}

TEST_CASE("rescale keeps feasible params fixed") {
  Rng rng = make_rng(31, 2);
  const double sigma2 = 0.3;
  MatrixXd W(4, 2);
  for (int j = 0; j < 4; ++j) {
    VectorXd row(2);
    for (int l = 0; l < 2; ++l) row[l] = std_normal(rng);
    W.row(j) = row.transpose() * (std::sqrt(1.0 - sigma2) / row.norm());
  }
  const auto out = rescale({W, sigma2});
  CHECK(out.sigma2 == Catch::Approx(sigma2).epsilon(1e-12));
  CHECK(out.W.isApprox(W, 1e-12));
}

TEST_CASE("rescale restores the unit diagonal exactly") {
  Rng rng = make_rng(31, 3);
  MatrixXd W(6, 3);
  for (int j = 0; j < 6; ++j)
    for (int l = 0; l < 3; ++l) W(j, l) = 2.0 * std_normal(rng);
  const auto out = rescale({W, 0.8});
  for (int j = 0; j < 6; ++j) {
    CHECK(std::fabs(out.W.row(j).squaredNorm() + out.sigma2 - 1.0) <= 1e-8);
  }
  CHECK(out.sigma2 > 0.0);
  CHECK(out.sigma2 < 1.0);
}

TEST_CASE("rescale rejects zero rows") {
  MatrixXd W = MatrixXd::Zero(2, 1);
  W(0, 0) = 1.0;
  CHECK_THROWS_AS(rescale({W, 0.5}), ZeroRow);
}

TEST_CASE("gaussian_row_loglik matches the dense evaluation") {
  Rng rng = make_rng(31, 4);
  const int n = 6, k = 2;
  MatrixXd W(n, k);
  for (int j = 0; j < n; ++j)
    for (int l = 0; l < k; ++l) W(j, l) = 0.5 * std_normal(rng);
  const double sigma2 = 0.37;
  VectorXd z(n);
  for (int j = 0; j < n; ++j) z[j] = std_normal(rng);
  MatrixXd Sigma = W * W.transpose();
  Sigma.diagonal().array() += sigma2;
  const Eigen::LLT<MatrixXd> llt(Sigma);
  double logdet = 0;
  for (int j = 0; j < n; ++j) logdet += 2.0 * std::log(llt.matrixL()(j, j));
  const double dense =
      -0.5 * (n * std::log(2 * M_PI) + logdet + z.dot(llt.solve(z)));
  CHECK(gaussian_row_loglik(W, sigma2, z) == Catch::Approx(dense).epsilon(1e-12));
}

TEST_CASE("fit recovers a rank-1 direction from fully observed data") {
  auto synth = make_continuous(5000, 8, 1, 0.2, 0.0, 99);
  EmConfig cfg;
  cfg.rank = 1;
  cfg.max_iter = 50;
  cfg.rel_tol = 1e-6;
  cfg.seed = 1;
  const auto res = fit(synth.X, continuous_marginals(synth.X), cfg);
  const VectorXd w_hat = res.params.W.col(0);
  const VectorXd w_true = synth.W.col(0);
  const double cos =
      std::fabs(w_hat.dot(w_true)) / (w_hat.norm() * w_true.norm());
  CHECK(cos >= 0.99);
  CHECK(res.params.sigma2 == Catch::Approx(0.2).margin(0.05));
}

TEST_CASE("fit diagnostics and iteration contract") {
  auto synth = make_continuous(120, 10, 2, 0.3, 0.2, 5);
  const auto marg = continuous_marginals(synth.X);
  EmConfig cfg;
  cfg.rank = 2;
  cfg.max_iter = 1;
  cfg.seed = 2;
  const auto one = fit(synth.X, marg, cfg);
  CHECK(one.diag.iterations == 1);
  CHECK(one.diag.rel_change.size() == 1);

  cfg.max_iter = 0;
  CHECK_THROWS_AS(fit(synth.X, marg, cfg), Error);
}

TEST_CASE("fit log-likelihood is monotone on Gaussian data") {
  auto synth = make_continuous(300, 12, 2, 0.25, 0.3, 17);
  EmConfig cfg;
  cfg.rank = 2;
  cfg.max_iter = 25;
  cfg.rel_tol = 1e-12;
  cfg.seed = 3;
  const auto res = fit(synth.X, continuous_marginals(synth.X), cfg);
  REQUIRE(res.diag.loglik.size() >= 2);
  const double slack = 1e-6 * 300;
  for (std::size_t t = 1; t < res.diag.loglik.size(); ++t) {
    CHECK(res.diag.loglik[t] >= res.diag.loglik[t - 1] - slack);
  }
}

TEST_CASE("fit keeps the unit diagonal after every run") {
  auto synth = make_continuous(150, 9, 2, 0.4, 0.25, 23);
  EmConfig cfg;
  cfg.rank = 3;
  cfg.max_iter = 7;
  cfg.seed = 4;
  const auto res = fit(synth.X, continuous_marginals(synth.X), cfg);
  for (int j = 0; j < 9; ++j) {
    CHECK(std::fabs(res.params.W.row(j).squaredNorm() + res.params.sigma2 -
                    1.0) <= 1e-8);
  }
}

TEST_CASE("fit is deterministic and thread-count invariant") {
  auto synth = make_continuous(600, 8, 2, 0.3, 0.3, 29);
  const auto marg = continuous_marginals(synth.X);
  EmConfig cfg;
  cfg.rank = 2;
  cfg.max_iter = 5;
  cfg.seed = 11;
  cfg.threads = 1;
  const auto a = fit(synth.X, marg, cfg);
  const auto b = fit(synth.X, marg, cfg);
  CHECK(a.params.W == b.params.W);
  CHECK(a.params.sigma2 == b.params.sigma2);
  cfg.threads = 4;
  const auto c = fit(synth.X, marg, cfg);
  CHECK(a.params.W == c.params.W);
  CHECK(a.params.sigma2 == c.params.sigma2);
}

TEST_CASE("fit is equivariant under row permutation") {
  auto synth = make_continuous(200, 8, 2, 0.3, 0.3, 41);
  const auto marg = continuous_marginals(synth.X);
  EmConfig cfg;
  cfg.rank = 2;
  cfg.max_iter = 10;
  cfg.seed = 12;
  const auto base = fit(synth.X, marg, cfg);

  std::vector<int> perm(200);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = make_rng(31, 5);
  for (int i = 199; i > 0; --i) {
    std::swap(perm[static_cast<std::size_t>(i)],
              perm[uniform_below(rng, static_cast<std::uint64_t>(i + 1))]);
  }
  ObservedMatrix Xp;
  Xp.values.resize(200, 8);
  Xp.mask.resize(200, 8);
  for (int i = 0; i < 200; ++i) {
    Xp.values.row(i) = synth.X.values.row(perm[static_cast<std::size_t>(i)]);
    Xp.mask.row(i) = synth.X.mask.row(perm[static_cast<std::size_t>(i)]);
  }
  const auto permuted = fit(Xp, marg, cfg);
  CHECK((permuted.params.W - base.params.W).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(permuted.params.sigma2 == Catch::Approx(base.params.sigma2).margin(1e-8));
}

TEST_CASE("fit surfaces unusable inputs") {
  // All-missing matrix.
  MatrixXd vals = MatrixXd::Constant(3, 2, std::nan(""));
  auto X = ObservedMatrix::from_values(vals);
  std::vector<MarginalModel> marg;
  marg.push_back(MarginalModel{ColumnKind::linear, LinearMarginal{0, 1}});
  marg.push_back(MarginalModel{ColumnKind::linear, LinearMarginal{0, 1}});
  EmConfig cfg;
  cfg.rank = 1;
  CHECK_THROWS_AS(fit(X, marg, cfg), NoObservations);

  // One column entirely missing.
  vals(0, 0) = 1.0;
  vals(1, 0) = 2.0;
  auto X2 = ObservedMatrix::from_values(vals);
  CHECK_THROWS_AS(fit(X2, marg, cfg), EmptyColumn);
}

TEST_CASE("fit warm-starts ordinal moments across iterations") {
  // A tiny ordinal problem must run end to end and keep moments inside
  // their intervals.
  Rng rng = make_rng(31, 6);
  const int n = 80, p = 6;
  MatrixXd vals(n, p);
  for (int i = 0; i < n; ++i) {
    const double t = std_normal(rng);
    for (int j = 0; j < p; ++j) {
      const double z = 0.8 * t + 0.6 * std_normal(rng);
      vals(i, j) = z > 0.3 ? 3 : (z > -0.4 ? 2 : 1);
      if (uniform01(rng) < 0.2) vals(i, j) = std::nan("");
    }
  }
  auto X = ObservedMatrix::from_values(std::move(vals));
  X.require_column_observations();
  const auto marg = fit_marginals(
      X, std::vector<ColumnKind>(p, ColumnKind::ordinal));
  EmConfig cfg;
  cfg.rank = 2;
  cfg.max_iter = 10;
  cfg.rel_tol = 1e-8;
  cfg.seed = 21;
  const auto res = fit(X, marg, cfg);
  CHECK(res.diag.loglik.empty());  // intractable for ordinal data
  for (int i = 0; i < n; ++i) {
    const auto obs = X.observed_row_indices(i);
    const auto& m = res.row_moments[static_cast<std::size_t>(i)];
    REQUIRE(m.mean.size() == static_cast<Eigen::Index>(obs.size()));
    for (std::size_t idx = 0; idx < obs.size(); ++idx) {
      const auto iv = marg[static_cast<std::size_t>(obs[idx])].g_inverse(
          X.values(i, obs[idx]));
      CHECK(m.mean[static_cast<Eigen::Index>(idx)] >= iv.lower);
      CHECK(m.mean[static_cast<Eigen::Index>(idx)] <= iv.upper);
    }
  }
}
