// Partially observed data matrix: values plus an explicit observed mask.
// Unobserved cells hold NaN so accidental reads poison results loudly.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "lrgc/errors.hpp"
#include "lrgc/marginals.hpp"

namespace lrgc {

struct ObservedMatrix {
  Eigen::MatrixXd values;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }

  bool observed(Eigen::Index i, Eigen::Index j) const { return mask(i, j); }

  std::size_t n_observed() const {
    return static_cast<std::size_t>(mask.count());
  }

  std::vector<double> observed_column(Eigen::Index j) const {
    std::vector<double> out;
    for (Eigen::Index i = 0; i < rows(); ++i) {
      if (mask(i, j)) out.push_back(values(i, j));
    }
    return out;
  }

  std::vector<int> observed_row_indices(Eigen::Index i) const {
    std::vector<int> out;
    for (Eigen::Index j = 0; j < cols(); ++j) {
      if (mask(i, j)) out.push_back(static_cast<int>(j));
    }
    return out;
  }

  // Mask derived from NaN cells.
  static ObservedMatrix from_values(Eigen::MatrixXd vals) {
    ObservedMatrix out;
    out.mask = vals.array().unaryExpr(
        [](double v) { return !std::isnan(v); });
    out.values = std::move(vals);
    return out;
  }

  // Every column must retain at least one observation; columns failing that
  // are unidentifiable and rejected here, before any fitting starts.
  void require_column_observations(
      const std::vector<std::string>& names = {}) const {
    std::string offenders;
    for (Eigen::Index j = 0; j < cols(); ++j) {
      if (!mask.col(j).any()) {
        if (!offenders.empty()) offenders += ", ";
        offenders += (static_cast<std::size_t>(j) < names.size())
                         ? names[static_cast<std::size_t>(j)]
                         : "#" + std::to_string(j);
      }
    }
    if (!offenders.empty()) {
      throw EmptyColumn("columns with no observed values: " + offenders);
    }
  }
};

// Per-column marginal fits over the observed entries, with errors annotated
// by column so CLI users can find the offending data.
inline std::vector<MarginalModel> fit_marginals(
    const ObservedMatrix& X, const std::vector<ColumnKind>& kinds,
    const std::vector<std::string>& names = {}) {
  if (static_cast<Eigen::Index>(kinds.size()) != X.cols()) {
    throw SchemaMismatch("column kind list does not match matrix width");
  }
  std::vector<MarginalModel> out;
  out.reserve(kinds.size());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    try {
      out.push_back(fit_marginal(kinds[static_cast<std::size_t>(j)],
                                 X.observed_column(j)));
    } catch (const DegenerateColumn& e) {
      const std::string label = (static_cast<std::size_t>(j) < names.size())
                                    ? names[static_cast<std::size_t>(j)]
                                    : "#" + std::to_string(j);
      throw DegenerateColumn("column " + label + ": " + e.what());
    }
  }
  return out;
}

}  // namespace lrgc
