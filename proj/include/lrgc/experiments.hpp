// Experiment drivers over the synthetic protocols: per-protocol constants,
// replicated error/coverage reports, error-vs-reliability curves, and the
// k-fold refit reliability baseline.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "lrgc/em.hpp"
#include "lrgc/errors.hpp"
#include "lrgc/inference.hpp"
#include "lrgc/marginals.hpp"
#include "lrgc/metrics.hpp"
#include "lrgc/observed.hpp"
#include "lrgc/rng.hpp"
#include "lrgc/synthgen.hpp"

namespace lrgc {

struct ExperimentReport {
  std::string metric_name;
  std::vector<double> values;  // one per replicate
  double mean = 0.0;
  double std_error = 0.0;
  std::string settings;
};

struct Protocol {
  std::string name;
  SynthSpec spec;
  int fit_rank = 1;
  ErrorMetric metric = ErrorMetric::nrmse;
};

// The six synthetic settings: continuous n=500, p=200, k=10, sigma2=0.1 with
// 40% missing (identity or cubic marginals, fit at rank 10); ordinal and
// binary n=500, p=200, k=5 with 60% missing at high (sigma2=0.1) or low
// (sigma2=0.5) signal-to-noise, fit at rank 5.
inline Protocol protocol_by_name(const std::string& name) {
  Protocol proto;
  proto.name = name;
  proto.spec.n = 500;
  proto.spec.p = 200;
  if (name == "lowrank-cont" || name == "highrank-cont") {
    proto.spec.k = 10;
    proto.spec.sigma2 = 0.1;
    proto.spec.missing_ratio = 0.4;
    proto.spec.kind = name == "lowrank-cont" ? SynthKind::continuous_identity
                                             : SynthKind::continuous_cubic;
    proto.fit_rank = 10;
    proto.metric = ErrorMetric::nrmse;
    return proto;
  }
  proto.spec.k = 5;
  proto.spec.missing_ratio = 0.6;
  proto.fit_rank = 5;
  proto.metric = ErrorMetric::mae;
  if (name == "ordinal-high" || name == "ordinal-low") {
    proto.spec.kind = SynthKind::ordinal;
    proto.spec.n_levels = 5;
    proto.spec.sigma2 = name == "ordinal-high" ? 0.1 : 0.5;
    return proto;
  }
  if (name == "binary-high" || name == "binary-low") {
    proto.spec.kind = SynthKind::binary;
    proto.spec.sigma2 = name == "binary-high" ? 0.1 : 0.5;
    return proto;
  }
  throw Error("unknown protocol: " + name);
}

inline const std::vector<std::string>& protocol_names() {
  static const std::vector<std::string> names{
      "lowrank-cont", "highrank-cont", "ordinal-high",
      "ordinal-low",  "binary-high",   "binary-low"};
  return names;
}

enum class FitAlgorithm { lrgc, ppca };

namespace detail {

inline ColumnKind fit_kind(SynthKind data_kind, FitAlgorithm algorithm) {
  if (algorithm == FitAlgorithm::ppca) return ColumnKind::linear;
  switch (data_kind) {
    case SynthKind::ordinal:
    case SynthKind::binary:
      return ColumnKind::ordinal;
    default:
      return ColumnKind::continuous;
  }
}

struct ReplicateRun {
  SynthData data;
  ObservedMatrix X;
  std::vector<MarginalModel> marginals;
  FitResult fit;
  ImputationResult result;
};

// One seeded replicate of a protocol: generate, mask (redrawing with derived
// seeds while any ordinal column realizes fewer than two observed levels),
// fit empirical marginals and the copula, impute with the fit's final
// latent moments.
inline ReplicateRun run_replicate(const Protocol& proto, std::uint64_t seed,
                                  int rep, FitAlgorithm algorithm,
                                  double alpha = 0.05, int threads = 0) {
  ReplicateRun run;
  SynthSpec spec = proto.spec;
  spec.seed = derive_seed(seed, 0x0da7a, static_cast<std::uint64_t>(rep));
  run.data = generate(spec);

  const std::vector<ColumnKind> kinds(
      static_cast<std::size_t>(spec.p),
      fit_kind(spec.kind, algorithm));
  bool have_marginals = false;
  for (int attempt = 0; attempt < 100 && !have_marginals; ++attempt) {
    run.X = mask_mcar(
        run.data.X_complete, spec.missing_ratio,
        derive_seed(seed, 0x3a5c + static_cast<std::uint64_t>(attempt),
                    static_cast<std::uint64_t>(rep)));
    try {
      run.marginals = fit_marginals(run.X, kinds);
      have_marginals = true;
    } catch (const DegenerateColumn&) {
      // A 60% mask occasionally leaves an ordinal column with one observed
      // level; redraw the mask deterministically.
    }
  }
  if (!have_marginals) {
    throw DegenerateColumn(
        "could not draw a mask with two observed levels per column");
  }

  EmConfig cfg;
  cfg.rank = proto.fit_rank;
  cfg.max_iter = 50;
  cfg.rel_tol = 1e-6;
  cfg.seed = derive_seed(seed, 0xf17, static_cast<std::uint64_t>(rep));
  cfg.threads = threads;
  run.fit = fit(run.X, run.marginals, cfg);
  run.result = impute_with_moments(run.X, run.marginals, run.fit.params,
                                   run.fit.row_moments, alpha);
  return run;
}

inline void finalize_report(ExperimentReport& report) {
  const auto reps = static_cast<double>(report.values.size());
  if (report.values.size() < 2) {
    throw Error("reports need at least two replicates");
  }
  double sum = 0.0;
  for (const double v : report.values) sum += v;
  report.mean = sum / reps;
  double ss = 0.0;
  for (const double v : report.values) {
    ss += (v - report.mean) * (v - report.mean);
  }
  report.std_error = std::sqrt(ss / (reps - 1.0) / reps);
}

}  // namespace detail

// Mean imputation error (NRMSE for continuous protocols, MAE for ordinal
// ones) over seeded replicates.
inline ExperimentReport run_table1(const std::string& protocol, int reps,
                                   std::uint64_t seed,
                                   FitAlgorithm algorithm = FitAlgorithm::lrgc,
                                   int threads = 0) {
  const Protocol proto = protocol_by_name(protocol);
  ExperimentReport report;
  report.metric_name =
      proto.metric == ErrorMetric::nrmse ? "nrmse" : "mae";
  report.settings = protocol + " rank=" + std::to_string(proto.fit_rank) +
                    (algorithm == FitAlgorithm::ppca ? " ppca" : " lrgc") +
                    " reps=" + std::to_string(reps) +
                    " seed=" + std::to_string(seed);
  for (int rep = 0; rep < reps; ++rep) {
    const auto run =
        detail::run_replicate(proto, seed, rep, algorithm, 0.05, threads);
    const ScoreMask scored = !run.X.mask;
    report.values.push_back(
        proto.metric == ErrorMetric::nrmse
            ? nrmse(run.data.X_complete, run.result.X_hat, scored)
            : mae(run.data.X_complete, run.result.X_hat, scored));
  }
  detail::finalize_report(report);
  return report;
}

// Empirical coverage and mean interval length of the (1-alpha) intervals on
// the continuous protocols.
inline std::pair<ExperimentReport, ExperimentReport> run_table2(
    const std::string& protocol, int reps, std::uint64_t seed,
    double alpha = 0.05, int threads = 0) {
  const Protocol proto = protocol_by_name(protocol);
  if (proto.metric != ErrorMetric::nrmse) {
    throw Error("interval experiments require a continuous protocol");
  }
  ExperimentReport coverage, length;
  coverage.metric_name = "coverage";
  length.metric_name = "interval_length";
  coverage.settings = length.settings =
      protocol + " alpha=" + std::to_string(alpha) +
      " reps=" + std::to_string(reps) + " seed=" + std::to_string(seed);
  for (int rep = 0; rep < reps; ++rep) {
    const auto run = detail::run_replicate(proto, seed, rep,
                                           FitAlgorithm::lrgc, alpha, threads);
    const auto [cov, len] = coverage_and_length(run.result,
                                                run.data.X_complete);
    coverage.values.push_back(cov);
    length.values.push_back(len);
  }
  detail::finalize_report(coverage);
  detail::finalize_report(length);
  return {std::move(coverage), std::move(length)};
}

struct CurveReport {
  std::vector<double> m_grid;
  std::vector<double> mean_error;  // averaged over replicates, per m
  std::string settings;
};

// Mean error-vs-reliability curve over replicates: error over the top-m%
// most reliable missing entries as m sweeps the grid.
inline CurveReport run_fig1(const std::string& protocol, int reps,
                            std::uint64_t seed,
                            const std::vector<double>& m_grid =
                                {5,  10, 15, 20, 25, 30, 35, 40, 45, 50,
                                 55, 60, 65, 70, 75, 80, 85, 90, 95, 100},
                            int threads = 0) {
  const Protocol proto = protocol_by_name(protocol);
  CurveReport report;
  report.m_grid = m_grid;
  report.mean_error.assign(m_grid.size(), 0.0);
  report.settings = protocol + " reps=" + std::to_string(reps) +
                    " seed=" + std::to_string(seed);
  for (int rep = 0; rep < reps; ++rep) {
    const auto run = detail::run_replicate(proto, seed, rep,
                                           FitAlgorithm::lrgc, 0.05, threads);
    const auto curve = error_vs_reliability_curve(
        run.result, run.data.X_complete, proto.metric, m_grid);
    for (std::size_t t = 0; t < curve.size(); ++t) {
      report.mean_error[t] += curve[t].second / static_cast<double>(reps);
    }
  }
  return report;
}

// Refit-variance reliability baseline: partition the observed cells into
// `folds` parts, rerun the imputer once per fold with that fold additionally
// masked, and score each originally missing cell by the variance of its
// imputations across folds (lower variance = more reliable). The returned
// matrix holds scores at originally missing cells and NaN elsewhere.
inline Eigen::MatrixXd kfold_reliability(
    const ObservedMatrix& X,
    const std::function<Eigen::MatrixXd(const ObservedMatrix&)>& imputer,
    int folds = 10, std::uint64_t seed = 0) {
  if (folds < 2) throw Error("k-fold reliability needs at least two folds");
  std::vector<std::pair<Eigen::Index, Eigen::Index>> observed_cells;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      if (X.observed(i, j)) observed_cells.emplace_back(i, j);
    }
  }
  Rng rng = make_rng(seed, 0xf01d);
  for (std::size_t t = observed_cells.size(); t > 1; --t) {
    std::swap(observed_cells[t - 1],
              observed_cells[uniform_below(rng, t)]);
  }

  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(X.rows(), X.cols());
  Eigen::MatrixXd sum_sq = Eigen::MatrixXd::Zero(X.rows(), X.cols());
  for (int f = 0; f < folds; ++f) {
    Eigen::MatrixXd values = X.values;
    for (std::size_t t = f; t < observed_cells.size();
         t += static_cast<std::size_t>(folds)) {
      values(observed_cells[t].first, observed_cells[t].second) =
          std::numeric_limits<double>::quiet_NaN();
    }
    const Eigen::MatrixXd completed = imputer(ObservedMatrix::from_values(values));
    sum += completed;
    sum_sq += completed.cwiseProduct(completed);
  }

  const double nf = static_cast<double>(folds);
  Eigen::MatrixXd scores = Eigen::MatrixXd::Constant(
      X.rows(), X.cols(), std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      if (X.observed(i, j)) continue;
      const double mean = sum(i, j) / nf;
      scores(i, j) = std::max(sum_sq(i, j) / nf - mean * mean, 0.0);
    }
  }
  return scores;
}

}  // namespace lrgc
