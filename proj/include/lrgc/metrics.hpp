// Imputation error metrics and uncertainty summaries: masked NRMSE / MAE,
// coverage and interval length, and error restricted to the most reliable
// entries.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "lrgc/errors.hpp"
#include "lrgc/inference.hpp"

namespace lrgc {

using ScoreMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// |X_true - X_hat|_F / |X_true|_F over the scored (true) cells only.
inline double nrmse(const Eigen::MatrixXd& X_true,
                    const Eigen::MatrixXd& X_hat, const ScoreMask& scored) {
  if (X_true.rows() != X_hat.rows() || X_true.cols() != X_hat.cols() ||
      X_true.rows() != scored.rows() || X_true.cols() != scored.cols()) {
    throw SchemaMismatch("metric inputs have mismatched shapes");
  }
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < X_true.rows(); ++i) {
    for (Eigen::Index j = 0; j < X_true.cols(); ++j) {
      if (!scored(i, j)) continue;
      const double d = X_true(i, j) - X_hat(i, j);
      num += d * d;
      den += X_true(i, j) * X_true(i, j);
    }
  }
  if (!(den > 0.0)) {
    throw ZeroDenominator("NRMSE denominator is zero over the scored cells");
  }
  return std::sqrt(num / den);
}

// Mean absolute difference over the scored cells.
inline double mae(const Eigen::MatrixXd& X_true, const Eigen::MatrixXd& X_hat,
                  const ScoreMask& scored) {
  if (X_true.rows() != X_hat.rows() || X_true.cols() != X_hat.cols() ||
      X_true.rows() != scored.rows() || X_true.cols() != scored.cols()) {
    throw SchemaMismatch("metric inputs have mismatched shapes");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < X_true.rows(); ++i) {
    for (Eigen::Index j = 0; j < X_true.cols(); ++j) {
      if (!scored(i, j)) continue;
      sum += std::fabs(X_true(i, j) - X_hat(i, j));
      ++count;
    }
  }
  if (count == 0) throw EmptySet("no cells to score");
  return sum / static_cast<double>(count);
}

enum class ErrorMetric { nrmse, mae };

// Error over the top-m% most reliable missing entries for each m in the
// grid. NRMSE's denominator is restricted to the same subset, so the curve
// measures relative error of what was actually selected.
inline std::vector<std::pair<double, double>> error_vs_reliability_curve(
    const ImputationResult& result, const Eigen::MatrixXd& X_true,
    ErrorMetric metric,
    const std::vector<double>& m_grid = {5,  10, 15, 20, 25, 30, 35,
                                         40, 45, 50, 55, 60, 65, 70,
                                         75, 80, 85, 90, 95, 100}) {
  std::vector<std::pair<double, double>> curve;
  curve.reserve(m_grid.size());
  for (const double m : m_grid) {
    const auto top = rank_by_reliability(result, m);
    if (top.empty()) throw EmptySet("no entries selected at m = " +
                                    std::to_string(m));
    double err = 0.0;
    if (metric == ErrorMetric::mae) {
      for (const auto idx : top) {
        const auto& e = result.entries[idx];
        err += std::fabs(e.uq.imputed - X_true(e.row, e.col));
      }
      err /= static_cast<double>(top.size());
    } else {
      double num = 0.0, den = 0.0;
      for (const auto idx : top) {
        const auto& e = result.entries[idx];
        const double d = e.uq.imputed - X_true(e.row, e.col);
        num += d * d;
        den += X_true(e.row, e.col) * X_true(e.row, e.col);
      }
      if (!(den > 0.0)) {
        throw ZeroDenominator("NRMSE denominator is zero over the subset");
      }
      err = std::sqrt(num / den);
    }
    curve.emplace_back(m, err);
  }
  return curve;
}

// Empirical coverage rate and mean interval length over entries that carry
// confidence intervals.
inline std::pair<double, double> coverage_and_length(
    const ImputationResult& result, const Eigen::MatrixXd& X_true) {
  double length = 0.0;
  std::size_t covered = 0, count = 0;
  for (const auto& e : result.entries) {
    if (!e.uq.interval) continue;
    ++count;
    const double x = X_true(e.row, e.col);
    if (e.uq.interval->first <= x && x <= e.uq.interval->second) ++covered;
    length += e.uq.interval->second - e.uq.interval->first;
  }
  if (count == 0) throw EmptySet("no entries carry confidence intervals");
  return {static_cast<double>(covered) / static_cast<double>(count),
          length / static_cast<double>(count)};
}

}  // namespace lrgc
