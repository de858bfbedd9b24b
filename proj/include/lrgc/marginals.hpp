// Elementwise monotone transformations between the observed scale and the
// latent Gaussian scale. Three kinds: continuous (empirical CDF/quantile),
// ordinal (cut points on the latent axis), linear (affine, the PPCA mode).
// Models are immutable after fitting; queries are pure.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "lrgc/errors.hpp"
#include "lrgc/normal.hpp"

namespace lrgc {

enum class ColumnKind { continuous, ordinal, linear };

// Interval of latent values consistent with one observation. Continuous and
// linear columns collapse it to a point (lower == upper).
struct LatentInterval {
  double lower;
  double upper;
};

struct ContinuousMarginal {
  std::vector<double> sorted_values;  // nondecreasing, size >= 2, not all equal

  std::size_t n_obs() const { return sorted_values.size(); }
};

struct OrdinalMarginal {
  // Distinct observed level values in increasing order; level value
  // levels[i] carries internal code i+1. Forward maps return the original
  // values, never the internal codes.
  std::vector<double> levels;
  std::vector<double> cut_points;  // strictly increasing, size K-1

  std::size_t n_levels() const { return levels.size(); }
};

struct LinearMarginal {
  double mean;
  double scale;  // sample standard deviation (n-1 denominator), > 0
};

inline ContinuousMarginal fit_continuous_marginal(std::vector<double> column) {
  if (column.size() < 2) {
    throw DegenerateColumn("continuous column needs at least 2 observed values");
  }
  std::sort(column.begin(), column.end());
  if (column.front() == column.back()) {
    throw DegenerateColumn("continuous column has zero variance");
  }
  return ContinuousMarginal{std::move(column)};
}

// Phi^{-1}( n/(n+1) * F(x) ) with F the empirical CDF (proportion <= x).
// The n/(n+1) factor keeps the top of the support finite; the bottom cannot
// be rescued the same way, hence the error on F(x) = 0.
inline double g_inverse_continuous(const ContinuousMarginal& m, double x) {
  const auto& v = m.sorted_values;
  const std::size_t count =
      static_cast<std::size_t>(std::upper_bound(v.begin(), v.end(), x) - v.begin());
  if (count == 0) {
    throw NonFiniteLatent("query below all observed values of the column");
  }
  const double n = static_cast<double>(m.n_obs());
  return norm_quantile((n / (n + 1.0)) * (static_cast<double>(count) / n));
}

// Empirical quantile of the observations at probability Phi(z), linear
// interpolation on the (i-1)/(n-1) grid (exact at order statistics).
inline double g_forward_continuous(const ContinuousMarginal& m, double z) {
  const auto& v = m.sorted_values;
  const std::size_t n = v.size();
  const double p = norm_cdf(z);
  const double h = p * static_cast<double>(n - 1);
  const double fl = std::floor(h);
  const std::size_t i = static_cast<std::size_t>(fl);
  if (i + 1 >= n) return v[n - 1];
  return v[i] + (h - fl) * (v[i + 1] - v[i]);
}

inline OrdinalMarginal fit_ordinal_marginal(const std::vector<double>& column) {
  std::vector<double> levels(column);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  if (levels.size() < 2) {
    throw DegenerateColumn("ordinal column has fewer than 2 observed levels");
  }
  // Cut k sits at the normal quantile of the unscaled empirical CDF at
  // level k; positive counts per level make the cuts strictly increasing.
  const double n = static_cast<double>(column.size());
  std::vector<double> cuts(levels.size() - 1);
  for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
    double count = 0;
    for (double x : column) {
      if (x <= levels[k]) count += 1.0;
    }
    cuts[k] = norm_quantile(count / n);
  }
  return OrdinalMarginal{std::move(levels), std::move(cuts)};
}

// Latent interval (s_{k-1}, s_k] for the observed level value x, with the
// outermost cut points at -inf/+inf.
inline LatentInterval g_inverse_ordinal(const OrdinalMarginal& m, double x) {
  const auto it = std::lower_bound(m.levels.begin(), m.levels.end(), x);
  if (it == m.levels.end() || *it != x) {
    throw UnknownLevel("value " + std::to_string(x) +
                       " is not an observed level of the column");
  }
  const std::size_t k = static_cast<std::size_t>(it - m.levels.begin());  // 0-based
  const double inf = std::numeric_limits<double>::infinity();
  const double lo = (k == 0) ? -inf : m.cut_points[k - 1];
  const double hi = (k + 1 == m.levels.size()) ? inf : m.cut_points[k];
  return LatentInterval{lo, hi};
}

// 1 + #{cuts strictly below z}, mapped back to the original level value.
inline double g_forward_ordinal(const OrdinalMarginal& m, double z) {
  std::size_t count = 0;
  for (double s : m.cut_points) {
    if (z > s) ++count;
  }
  return m.levels[count];
}

inline LinearMarginal fit_linear_marginal(const std::vector<double>& column) {
  if (column.size() < 2) {
    throw DegenerateColumn("linear column needs at least 2 observed values");
  }
  const double n = static_cast<double>(column.size());
  double mean = 0;
  for (double x : column) mean += x;
  mean /= n;
  double ss = 0;
  for (double x : column) ss += (x - mean) * (x - mean);
  const double scale = std::sqrt(ss / (n - 1.0));
  if (!(scale > 0.0)) {
    throw DegenerateColumn("linear column has zero variance");
  }
  return LinearMarginal{mean, scale};
}

inline double g_inverse_linear(const LinearMarginal& m, double x) {
  return (x - m.mean) / m.scale;
}

inline double g_forward_linear(const LinearMarginal& m, double z) {
  return m.mean + m.scale * z;
}

// Column-polymorphic wrapper used by the model and the CLI.
struct MarginalModel {
  ColumnKind kind;
  std::variant<ContinuousMarginal, OrdinalMarginal, LinearMarginal> model;

  const ContinuousMarginal& continuous() const {
    return std::get<ContinuousMarginal>(model);
  }
  const OrdinalMarginal& ordinal() const {
    return std::get<OrdinalMarginal>(model);
  }
  const LinearMarginal& linear() const {
    return std::get<LinearMarginal>(model);
  }

  LatentInterval g_inverse(double x) const {
    switch (kind) {
      case ColumnKind::continuous: {
        const double z = g_inverse_continuous(continuous(), x);
        return LatentInterval{z, z};
      }
      case ColumnKind::ordinal:
        return g_inverse_ordinal(ordinal(), x);
      case ColumnKind::linear: {
        const double z = g_inverse_linear(linear(), x);
        return LatentInterval{z, z};
      }
    }
    throw Error("unreachable column kind");
  }

  double g_forward(double z) const {
    switch (kind) {
      case ColumnKind::continuous:
        return g_forward_continuous(continuous(), z);
      case ColumnKind::ordinal:
        return g_forward_ordinal(ordinal(), z);
      case ColumnKind::linear:
        return g_forward_linear(linear(), z);
    }
    throw Error("unreachable column kind");
  }
};

inline MarginalModel fit_marginal(ColumnKind kind,
                                  const std::vector<double>& column) {
  switch (kind) {
    case ColumnKind::continuous:
      return MarginalModel{kind, fit_continuous_marginal(column)};
    case ColumnKind::ordinal:
      return MarginalModel{kind, fit_ordinal_marginal(column)};
    case ColumnKind::linear:
      return MarginalModel{kind, fit_linear_marginal(column)};
  }
  throw Error("unreachable column kind");
}

}  // namespace lrgc
