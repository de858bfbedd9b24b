// File formats: CSV datasets with empty/NA missing cells, JSON model files
// with bit-exact parameter round-tripping, and the per-entry uncertainty
// table.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lrgc/em.hpp"
#include "lrgc/errors.hpp"
#include "lrgc/inference.hpp"
#include "lrgc/marginals.hpp"
#include "lrgc/observed.hpp"

namespace lrgc {

struct Dataset {
  std::vector<std::string> column_names;
  Eigen::MatrixXd values;  // NaN at missing cells
  std::vector<std::vector<std::string>> raw_cells;  // verbatim input tokens
};

struct SavedModel {
  std::vector<std::string> column_names;
  std::vector<MarginalModel> marginals;
  CopulaParams params;
  FitDiagnostics diag;
  std::uint64_t seed = 0;
};

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline bool is_missing_token(const std::string& token) {
  return token.empty() || token == "NA";
}

inline double parse_cell(const std::string& token, std::size_t line_no) {
  std::size_t consumed = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &consumed);
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) +
                     ": cannot parse numeric cell '" + token + "'");
  }
  if (consumed != token.size()) {
    throw ParseError("line " + std::to_string(line_no) +
                     ": trailing characters in cell '" + token + "'");
  }
  return v;
}

}  // namespace detail

// CSV with a header row; missing cells are empty or the literal NA. Raw cell
// tokens are preserved so observed values can be passed through verbatim.
inline Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "' for reading");
  Dataset ds;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("'" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  ds.column_names = detail::split_csv_line(line);
  if (ds.column_names.empty()) {
    throw ParseError("'" + path + "' has an empty header");
  }
  const std::size_t p = ds.column_names.size();

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != p) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(p) + " cells, found " +
                       std::to_string(cells.size()));
    }
    std::vector<double> row(p);
    for (std::size_t j = 0; j < p; ++j) {
      row[j] = detail::is_missing_token(cells[j])
                   ? std::numeric_limits<double>::quiet_NaN()
                   : detail::parse_cell(cells[j], line_no);
    }
    rows.push_back(std::move(row));
    ds.raw_cells.push_back(std::move(cells));
  }
  if (rows.empty()) throw ParseError("'" + path + "' has no data rows");

  ds.values = Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()),
                              static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      ds.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i][j];
    }
  }
  return ds;
}

// Matrix to CSV with 17-significant-digit floats; NaN cells are left empty.
inline void write_matrix_csv(const std::string& path,
                             const Eigen::MatrixXd& values,
                             const std::vector<std::string>& column_names) {
  if (static_cast<Eigen::Index>(column_names.size()) != values.cols()) {
    throw SchemaMismatch("column name count does not match matrix width");
  }
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  for (std::size_t j = 0; j < column_names.size(); ++j) {
    out << (j ? "," : "") << column_names[j];
  }
  out << "\n";
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      if (j) out << ",";
      if (!std::isnan(values(i, j))) out << format_double(values(i, j));
    }
    out << "\n";
  }
}

// Default column names x0..x{p-1}.
inline std::vector<std::string> default_column_names(Eigen::Index p) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    names.push_back("x" + std::to_string(j));
  }
  return names;
}

// A column is inferred ordinal when its observed values comprise at most 20
// distinct integers; otherwise continuous. Explicit type lists override.
inline std::vector<ColumnKind> infer_column_kinds(
    const Eigen::MatrixXd& values) {
  std::vector<ColumnKind> kinds;
  kinds.reserve(static_cast<std::size_t>(values.cols()));
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    std::set<double> distinct;
    bool integral = true;
    for (Eigen::Index i = 0; i < values.rows() && integral; ++i) {
      const double v = values(i, j);
      if (std::isnan(v)) continue;
      integral = v == std::floor(v) && std::fabs(v) <= 9.007199254740992e15;
      distinct.insert(v);
      if (distinct.size() > 20) break;
    }
    kinds.push_back(integral && distinct.size() <= 20 && !distinct.empty()
                        ? ColumnKind::ordinal
                        : ColumnKind::continuous);
  }
  return kinds;
}

inline std::string kind_name(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::continuous:
      return "continuous";
    case ColumnKind::ordinal:
      return "ordinal";
    case ColumnKind::linear:
      return "linear";
  }
  throw Error("unreachable column kind");
}

inline ColumnKind kind_from_name(const std::string& name) {
  if (name == "continuous") return ColumnKind::continuous;
  if (name == "ordinal") return ColumnKind::ordinal;
  if (name == "linear") return ColumnKind::linear;
  throw ParseError("unknown column kind '" + name +
                   "' (expected continuous, ordinal, or linear)");
}

// Comma-separated kind list, e.g. "continuous,ordinal,linear".
inline std::vector<ColumnKind> parse_type_list(const std::string& types,
                                               Eigen::Index p) {
  std::vector<ColumnKind> kinds;
  std::stringstream ss(types);
  std::string token;
  while (std::getline(ss, token, ',')) kinds.push_back(kind_from_name(token));
  if (static_cast<Eigen::Index>(kinds.size()) != p) {
    throw SchemaMismatch("--types lists " + std::to_string(kinds.size()) +
                         " kinds for " + std::to_string(p) + " columns");
  }
  return kinds;
}

namespace detail {

inline nlohmann::json marginal_to_json(const MarginalModel& m) {
  nlohmann::json j;
  j["kind"] = kind_name(m.kind);
  switch (m.kind) {
    case ColumnKind::continuous:
      j["sorted_values"] = m.continuous().sorted_values;
      break;
    case ColumnKind::ordinal:
      j["levels"] = m.ordinal().levels;
      j["cut_points"] = m.ordinal().cut_points;
      break;
    case ColumnKind::linear:
      j["mean"] = m.linear().mean;
      j["scale"] = m.linear().scale;
      break;
  }
  return j;
}

inline MarginalModel marginal_from_json(const nlohmann::json& j) {
  const ColumnKind kind = kind_from_name(j.at("kind").get<std::string>());
  switch (kind) {
    case ColumnKind::continuous: {
      ContinuousMarginal m;
      m.sorted_values = j.at("sorted_values").get<std::vector<double>>();
      if (m.sorted_values.size() < 2 ||
          !std::is_sorted(m.sorted_values.begin(), m.sorted_values.end())) {
        throw SchemaMismatch("continuous marginal values must be sorted");
      }
      return {kind, std::move(m)};
    }
    case ColumnKind::ordinal: {
      OrdinalMarginal m;
      m.levels = j.at("levels").get<std::vector<double>>();
      m.cut_points = j.at("cut_points").get<std::vector<double>>();
      if (m.levels.size() < 2 || m.cut_points.size() + 1 != m.levels.size()) {
        throw SchemaMismatch("ordinal marginal needs K levels and K-1 cuts");
      }
      if (!std::is_sorted(m.levels.begin(), m.levels.end()) ||
          !std::is_sorted(m.cut_points.begin(), m.cut_points.end())) {
        throw SchemaMismatch("ordinal levels and cut points must be sorted");
      }
      return {kind, std::move(m)};
    }
    case ColumnKind::linear: {
      LinearMarginal m{j.at("mean").get<double>(),
                       j.at("scale").get<double>()};
      if (!(m.scale > 0.0)) {
        throw SchemaMismatch("linear marginal scale must be positive");
      }
      return {kind, m};
    }
  }
  throw Error("unreachable column kind");
}

}  // namespace detail

inline void save_model(const std::string& path, const SavedModel& model) {
  const Eigen::Index p = model.params.W.rows();
  const Eigen::Index k = model.params.W.cols();
  if (static_cast<Eigen::Index>(model.column_names.size()) != p ||
      static_cast<Eigen::Index>(model.marginals.size()) != p) {
    throw SchemaMismatch("model columns and parameters disagree in size");
  }
  nlohmann::json j;
  j["format_version"] = 1;
  j["p"] = p;
  j["k"] = k;
  j["sigma2"] = model.params.sigma2;
  j["seed"] = model.seed;
  std::vector<double> w_flat;
  w_flat.reserve(static_cast<std::size_t>(p * k));
  for (Eigen::Index r = 0; r < p; ++r) {
    for (Eigen::Index c = 0; c < k; ++c) w_flat.push_back(model.params.W(r, c));
  }
  j["W_row_major"] = w_flat;
  j["columns"] = nlohmann::json::array();
  for (Eigen::Index c = 0; c < p; ++c) {
    nlohmann::json col = detail::marginal_to_json(
        model.marginals[static_cast<std::size_t>(c)]);
    col["name"] = model.column_names[static_cast<std::size_t>(c)];
    j["columns"].push_back(std::move(col));
  }
  j["diagnostics"] = {{"iterations", model.diag.iterations},
                      {"converged", model.diag.converged},
                      {"rel_change", model.diag.rel_change},
                      {"loglik", model.diag.loglik}};
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
}

inline SavedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "' for reading");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("invalid model file '" + path + "': " + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != 1) {
      throw SchemaMismatch("unsupported model format version");
    }
    SavedModel model;
    const auto p = j.at("p").get<Eigen::Index>();
    const auto k = j.at("k").get<Eigen::Index>();
    model.params.sigma2 = j.at("sigma2").get<double>();
    model.seed = j.at("seed").get<std::uint64_t>();
    const auto w_flat = j.at("W_row_major").get<std::vector<double>>();
    if (p < 1 || k < 1 || k >= p ||
        w_flat.size() != static_cast<std::size_t>(p * k)) {
      throw SchemaMismatch("model dimensions are inconsistent");
    }
    model.params.W = Eigen::MatrixXd(p, k);
    for (Eigen::Index r = 0; r < p; ++r) {
      for (Eigen::Index c = 0; c < k; ++c) {
        model.params.W(r, c) = w_flat[static_cast<std::size_t>(r * k + c)];
      }
    }
    if (!(model.params.sigma2 > 0.0 && model.params.sigma2 < 1.0)) {
      throw SchemaMismatch("sigma2 must lie in (0, 1)");
    }
    for (Eigen::Index r = 0; r < p; ++r) {
      const double diag = model.params.W.row(r).squaredNorm() +
                          model.params.sigma2;
      if (std::fabs(diag - 1.0) > 1e-6) {
        throw SchemaMismatch("row " + std::to_string(r) +
                             " violates the unit-diagonal constraint");
      }
    }
    const auto& cols = j.at("columns");
    if (static_cast<Eigen::Index>(cols.size()) != p) {
      throw SchemaMismatch("column list does not match declared p");
    }
    for (const auto& col : cols) {
      model.column_names.push_back(col.at("name").get<std::string>());
      model.marginals.push_back(detail::marginal_from_json(col));
    }
    const auto& diag = j.at("diagnostics");
    model.diag.iterations = diag.at("iterations").get<int>();
    model.diag.converged = diag.at("converged").get<bool>();
    model.diag.rel_change = diag.at("rel_change").get<std::vector<double>>();
    model.diag.loglik = diag.at("loglik").get<std::vector<double>>();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaMismatch("model file '" + path +
                         "' is missing fields: " + e.what());
  }
}

// Per-missing-entry uncertainty table. Continuous/linear entries fill lo/hi
// and leave prob_bound empty; ordinal entries do the opposite.
inline void write_uq_csv(const std::string& path,
                         const ImputationResult& result) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out << "row,col,imputed,latent_mean,latent_var,lo,hi,prob_bound,"
         "reliability\n";
  for (const auto& e : result.entries) {
    out << e.row << "," << e.col << "," << format_double(e.uq.imputed) << ","
        << format_double(e.uq.latent_mean) << ","
        << format_double(e.uq.latent_var) << ",";
    if (e.uq.interval) {
      out << format_double(e.uq.interval->first) << ","
          << format_double(e.uq.interval->second);
    } else {
      out << ",";
    }
    out << ",";
    if (e.uq.prob_bound) out << format_double(*e.uq.prob_bound);
    out << "," << format_double(e.reliability) << "\n";
  }
}

struct UqEntry {
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  double imputed = 0.0;
  double latent_mean = 0.0;
  double latent_var = 0.0;
  std::optional<std::pair<double, double>> interval;
  std::optional<double> prob_bound;
  double reliability = 0.0;
};

inline std::vector<UqEntry> read_uq_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("'" + path + "' is empty");
  std::vector<UqEntry> entries;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 9) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected 9 cells in uncertainty table");
    }
    UqEntry e;
    e.row = static_cast<Eigen::Index>(detail::parse_cell(cells[0], line_no));
    e.col = static_cast<Eigen::Index>(detail::parse_cell(cells[1], line_no));
    e.imputed = detail::parse_cell(cells[2], line_no);
    e.latent_mean = detail::parse_cell(cells[3], line_no);
    e.latent_var = detail::parse_cell(cells[4], line_no);
    const bool has_lo = !detail::is_missing_token(cells[5]);
    const bool has_hi = !detail::is_missing_token(cells[6]);
    if (has_lo != has_hi) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": lo and hi must be present together");
    }
    if (has_lo) {
      e.interval = {detail::parse_cell(cells[5], line_no),
                    detail::parse_cell(cells[6], line_no)};
    }
    if (!detail::is_missing_token(cells[7])) {
      e.prob_bound = detail::parse_cell(cells[7], line_no);
    }
    e.reliability = detail::parse_cell(cells[8], line_no);
    entries.push_back(e);
  }
  return entries;
}

}  // namespace lrgc
