// Seeded synthetic-data generation: low-rank Gaussian latent matrices pushed
// through identity, cubic, or step-function marginals, plus uniform MCAR
// masking with a per-column coverage guarantee.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "lrgc/em.hpp"
#include "lrgc/errors.hpp"
#include "lrgc/marginals.hpp"
#include "lrgc/observed.hpp"
#include "lrgc/rng.hpp"

namespace lrgc {

enum class SynthKind { continuous_identity, continuous_cubic, ordinal, binary };

struct SynthSpec {
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  int k = 1;
  double sigma2 = 0.1;
  SynthKind kind = SynthKind::continuous_identity;
  int n_levels = 5;  // ordinal only; binary forces 2
  double missing_ratio = 0.4;
  std::uint64_t seed = 0;
};

struct SynthData {
  Eigen::MatrixXd X_complete;
  Eigen::MatrixXd Z_latent;
  CopulaParams params;
  std::vector<MarginalModel> marginals;  // generating marginals (see notes)
};

namespace detail {

// Distinct sorted cut values drawn uniformly without replacement from the
// realized entries of one latent column. Draws are redone (bounded) until
// the discretized column realizes at least two levels, since a cut equal to
// the column maximum would otherwise collapse it.
inline std::vector<double> draw_cuts(const Eigen::VectorXd& z, int n_cuts,
                                     Rng& rng, Eigen::Index column) {
  const Eigen::Index n = z.size();
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<Eigen::Index> idx;
    idx.reserve(static_cast<std::size_t>(n_cuts));
    while (idx.size() < static_cast<std::size_t>(n_cuts)) {
      const auto cand = static_cast<Eigen::Index>(
          uniform_below(rng, static_cast<std::uint64_t>(n)));
      if (std::find(idx.begin(), idx.end(), cand) == idx.end()) {
        idx.push_back(cand);
      }
    }
    std::vector<double> cuts;
    cuts.reserve(idx.size());
    for (const auto i : idx) cuts.push_back(z[i]);
    std::sort(cuts.begin(), cuts.end());
    if (std::adjacent_find(cuts.begin(), cuts.end()) != cuts.end()) continue;

    std::vector<int> seen(static_cast<std::size_t>(n_cuts) + 1, 0);
    int distinct = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int level = 0;
      for (const double c : cuts) level += z[i] > c ? 1 : 0;
      if (!seen[static_cast<std::size_t>(level)]) {
        seen[static_cast<std::size_t>(level)] = 1;
        if (++distinct >= 2) break;
      }
    }
    if (distinct >= 2) return cuts;
  }
  throw DegenerateColumn("column #" + std::to_string(column) +
                         ": could not draw cut points realizing two levels");
}

}  // namespace detail

// Synthetic dataset from the low-rank latent model: rows of W are scaled so
// |w_j|^2 = 1 - sigma2, Z = T W^T + sigma E with independent standard normal
// T and E, and X applies the marginal transform cell-wise. The returned
// marginals are the generating ones where expressible (identity and step
// functions); the cubic transform is returned as the complete-data empirical
// marginal since X_complete pins it exactly on the realized sample.
inline SynthData generate(const SynthSpec& spec) {
  if (spec.n < 1 || spec.p < 1) throw Error("n and p must be positive");
  if (spec.k < 1 || static_cast<Eigen::Index>(spec.k) >= spec.p) {
    throw BadRank("rank must satisfy 1 <= k < p");
  }
  if (!(spec.sigma2 > 0.0 && spec.sigma2 < 1.0)) {
    throw Error("sigma2 must lie in (0, 1)");
  }
  const int levels =
      spec.kind == SynthKind::binary ? 2 : spec.n_levels;
  if ((spec.kind == SynthKind::ordinal || spec.kind == SynthKind::binary) &&
      levels < 2) {
    throw Error("ordinal generation needs at least two levels");
  }

  SynthData out;
  out.params.sigma2 = spec.sigma2;
  out.params.W = Eigen::MatrixXd(spec.p, spec.k);
  {
    Rng rng = make_rng(spec.seed, 1);
    for (Eigen::Index j = 0; j < spec.p; ++j) {
      for (int l = 0; l < spec.k; ++l) out.params.W(j, l) = std_normal(rng);
      out.params.W.row(j) *=
          std::sqrt((1.0 - spec.sigma2) / out.params.W.row(j).squaredNorm());
    }
  }

  Eigen::MatrixXd T(spec.n, spec.k);
  {
    Rng rng = make_rng(spec.seed, 2);
    for (Eigen::Index i = 0; i < spec.n; ++i) {
      for (int l = 0; l < spec.k; ++l) T(i, l) = std_normal(rng);
    }
  }
  out.Z_latent = T * out.params.W.transpose();
  {
    Rng rng = make_rng(spec.seed, 3);
    const double sigma = std::sqrt(spec.sigma2);
    for (Eigen::Index i = 0; i < spec.n; ++i) {
      for (Eigen::Index j = 0; j < spec.p; ++j) {
        out.Z_latent(i, j) += sigma * std_normal(rng);
      }
    }
  }

  switch (spec.kind) {
    case SynthKind::continuous_identity: {
      out.X_complete = out.Z_latent;
      out.marginals.assign(
          static_cast<std::size_t>(spec.p),
          MarginalModel{ColumnKind::linear, LinearMarginal{0.0, 1.0}});
      break;
    }
    case SynthKind::continuous_cubic: {
      out.X_complete = out.Z_latent.array().cube();
      out.marginals.reserve(static_cast<std::size_t>(spec.p));
      for (Eigen::Index j = 0; j < spec.p; ++j) {
        std::vector<double> col(out.X_complete.col(j).data(),
                                out.X_complete.col(j).data() + spec.n);
        out.marginals.push_back(
            {ColumnKind::continuous, fit_continuous_marginal(col)});
      }
      break;
    }
    case SynthKind::ordinal:
    case SynthKind::binary: {
      out.X_complete = Eigen::MatrixXd(spec.n, spec.p);
      std::vector<double> level_values(static_cast<std::size_t>(levels));
      for (int l = 0; l < levels; ++l) {
        level_values[static_cast<std::size_t>(l)] = l + 1.0;
      }
      out.marginals.reserve(static_cast<std::size_t>(spec.p));
      for (Eigen::Index j = 0; j < spec.p; ++j) {
        Rng rng = make_rng(spec.seed, 4, static_cast<std::uint64_t>(j));
        const std::vector<double> cuts =
            detail::draw_cuts(out.Z_latent.col(j), levels - 1, rng, j);
        const OrdinalMarginal marg{level_values, cuts};
        for (Eigen::Index i = 0; i < spec.n; ++i) {
          out.X_complete(i, j) = g_forward_ordinal(marg, out.Z_latent(i, j));
        }
        out.marginals.push_back({ColumnKind::ordinal, marg});
      }
      break;
    }
  }
  return out;
}

// Uniform MCAR mask hiding exactly round(ratio * n * p) cells, redrawn
// (bounded) if any column would lose all its observations.
inline ObservedMatrix mask_mcar(const Eigen::MatrixXd& X_complete,
                                double missing_ratio, std::uint64_t seed) {
  if (!(missing_ratio > 0.0 && missing_ratio < 1.0)) {
    throw Error("missing_ratio must lie in (0, 1)");
  }
  const Eigen::Index n = X_complete.rows(), p = X_complete.cols();
  const auto total = static_cast<std::uint64_t>(n) *
                     static_cast<std::uint64_t>(p);
  const auto n_mask = static_cast<std::uint64_t>(
      std::llround(missing_ratio * static_cast<double>(total)));

  Rng rng = make_rng(seed, 5);
  std::vector<std::uint64_t> cells(total);
  for (std::uint64_t c = 0; c < total; ++c) cells[c] = c;
  for (int attempt = 0; attempt < 100; ++attempt) {
    // Partial Fisher-Yates: the first n_mask entries are a uniform sample
    // of cells without replacement.
    for (std::uint64_t t = 0; t < n_mask; ++t) {
      const std::uint64_t pick = t + uniform_below(rng, total - t);
      std::swap(cells[t], cells[pick]);
    }
    Eigen::MatrixXd values = X_complete;
    for (std::uint64_t t = 0; t < n_mask; ++t) {
      const auto cell = static_cast<Eigen::Index>(cells[t]);
      values(cell / p, cell % p) = std::numeric_limits<double>::quiet_NaN();
    }
    ObservedMatrix X = ObservedMatrix::from_values(values);
    bool covered = true;
    for (Eigen::Index j = 0; j < p && covered; ++j) {
      covered = X.mask.col(j).any();
    }
    if (covered) return X;
  }
  throw DegenerateColumn(
      "mask left a column without observations in 100 attempts");
}

}  // namespace lrgc
