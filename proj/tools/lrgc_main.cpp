// Command-line interface: simulate synthetic datasets, fit the copula model,
// impute with uncertainty, and evaluate imputations against ground truth.
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical error,
// 1 unexpected failure.
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lrgc/em.hpp"
#include "lrgc/errors.hpp"
#include "lrgc/experiments.hpp"
#include "lrgc/inference.hpp"
#include "lrgc/io.hpp"
#include "lrgc/metrics.hpp"
#include "lrgc/observed.hpp"
#include "lrgc/synthgen.hpp"

namespace {

using namespace lrgc;

struct SimulateArgs {
  std::string protocol;
  std::string out_dir;
  std::string kind = "identity";
  std::int64_t n = 500;
  std::int64_t p = 200;
  int k = 10;
  double sigma2 = 0.1;
  int levels = 5;
  double missing = -1.0;  // <0: keep the protocol/default value
  std::uint64_t seed = 0;
};

SynthKind kind_by_flag(const std::string& flag) {
  if (flag == "identity") return SynthKind::continuous_identity;
  if (flag == "cubic") return SynthKind::continuous_cubic;
  if (flag == "ordinal") return SynthKind::ordinal;
  if (flag == "binary") return SynthKind::binary;
  throw Error("unknown data kind '" + flag +
              "' (expected identity, cubic, ordinal, or binary)");
}

void run_simulate(const SimulateArgs& args) {
  SynthSpec spec;
  if (!args.protocol.empty()) {
    spec = protocol_by_name(args.protocol).spec;
  } else {
    spec.n = args.n;
    spec.p = args.p;
    spec.k = args.k;
    spec.sigma2 = args.sigma2;
    spec.kind = kind_by_flag(args.kind);
    spec.n_levels = args.levels;
    spec.missing_ratio = 0.4;
  }
  if (args.missing >= 0.0) spec.missing_ratio = args.missing;
  spec.seed = args.seed;

  const SynthData data = generate(spec);
  const ObservedMatrix X =
      mask_mcar(data.X_complete, spec.missing_ratio, spec.seed);

  std::filesystem::create_directories(args.out_dir);
  const auto names = default_column_names(spec.p);
  write_matrix_csv(args.out_dir + "/X_complete.csv", data.X_complete, names);
  write_matrix_csv(args.out_dir + "/X_observed.csv", X.values, names);
  SavedModel truth;
  truth.column_names = names;
  truth.marginals = data.marginals;
  truth.params = data.params;
  truth.diag.converged = true;
  truth.seed = spec.seed;
  save_model(args.out_dir + "/truth_model.json", truth);
  std::cout << "wrote " << spec.n << "x" << spec.p << " dataset to "
            << args.out_dir << "\n";
}

struct FitArgs {
  std::string data_path;
  std::string types;
  std::string out_path;
  int rank = 1;
  int max_iter = 50;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

void run_fit(const FitArgs& args, int threads) {
  const Dataset ds = read_dataset_csv(args.data_path);
  const ObservedMatrix X = ObservedMatrix::from_values(ds.values);
  X.require_column_observations(ds.column_names);
  const std::vector<ColumnKind> kinds =
      args.types.empty() ? infer_column_kinds(ds.values)
                         : parse_type_list(args.types, ds.values.cols());
  const auto marginals = fit_marginals(X, kinds, ds.column_names);

  EmConfig cfg;
  cfg.rank = args.rank;
  cfg.max_iter = args.max_iter;
  cfg.rel_tol = args.tol;
  cfg.seed = args.seed;
  cfg.threads = threads;
  const FitResult result = fit(X, marginals, cfg);
  for (std::size_t t = 0; t < result.diag.rel_change.size(); ++t) {
    std::cout << "iter " << t + 1 << " rel_change "
              << format_double(result.diag.rel_change[t]) << "\n";
  }
  std::cout << (result.diag.converged ? "converged" : "max iterations reached")
            << " after " << result.diag.iterations << " iterations\n";

  SavedModel model;
  model.column_names = ds.column_names;
  model.marginals = marginals;
  model.params = result.params;
  model.diag = result.diag;
  model.seed = args.seed;
  save_model(args.out_path, model);
  std::cout << "wrote model (p=" << result.params.W.rows()
            << ", k=" << result.params.W.cols() << ") to " << args.out_path
            << "\n";
}

struct ImputeArgs {
  std::string data_path;
  std::string model_path;
  std::string out_dir;
  double alpha = 0.05;
};

// X_hat.csv writer that replays the input tokens verbatim for observed
// cells so they are byte-identical to the source file.
void write_xhat_csv(const std::string& path, const Dataset& ds,
                    const ObservedMatrix& X, const Eigen::MatrixXd& X_hat) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  for (std::size_t j = 0; j < ds.column_names.size(); ++j) {
    out << (j ? "," : "") << ds.column_names[j];
  }
  out << "\n";
  for (Eigen::Index i = 0; i < X_hat.rows(); ++i) {
    for (Eigen::Index j = 0; j < X_hat.cols(); ++j) {
      if (j) out << ",";
      if (X.observed(i, j)) {
        out << ds.raw_cells[static_cast<std::size_t>(i)]
                           [static_cast<std::size_t>(j)];
      } else {
        out << format_double(X_hat(i, j));
      }
    }
    out << "\n";
  }
}

void run_impute(const ImputeArgs& args) {
  if (!(args.alpha > 0.0 && args.alpha < 1.0)) {
    throw Error("--alpha must lie in (0, 1)");
  }
  const Dataset ds = read_dataset_csv(args.data_path);
  const SavedModel model = load_model(args.model_path);
  if (model.column_names != ds.column_names) {
    std::string offending;
    if (model.column_names.size() != ds.column_names.size()) {
      offending = "column count " + std::to_string(ds.column_names.size()) +
                  " vs model's " + std::to_string(model.column_names.size());
    } else {
      for (std::size_t j = 0; j < ds.column_names.size(); ++j) {
        if (ds.column_names[j] != model.column_names[j]) {
          offending += (offending.empty() ? "" : ", ") + ds.column_names[j];
        }
      }
    }
    throw SchemaMismatch("data does not match model schema: " + offending);
  }
  const ObservedMatrix X = ObservedMatrix::from_values(ds.values);
  const ImputationResult result =
      impute(X, model.marginals, model.params, args.alpha);

  std::filesystem::create_directories(args.out_dir);
  write_xhat_csv(args.out_dir + "/X_hat.csv", ds, X, result.X_hat);
  write_uq_csv(args.out_dir + "/uq.csv", result);
  std::cout << "imputed " << result.entries.size() << " missing entries to "
            << args.out_dir << "\n";
}

struct EvaluateArgs {
  std::string truth_path;
  std::string imputed_path;
  std::string uq_path;
  std::string out_dir;
  std::vector<double> curve_grid;
};

void run_evaluate(const EvaluateArgs& args) {
  const Dataset truth = read_dataset_csv(args.truth_path);
  const Dataset imputed = read_dataset_csv(args.imputed_path);
  if (truth.values.rows() != imputed.values.rows() ||
      truth.values.cols() != imputed.values.cols()) {
    throw SchemaMismatch("truth and imputed matrices have different shapes");
  }
  const auto uq = read_uq_csv(args.uq_path);
  if (uq.empty()) throw EmptySet("uncertainty table lists no entries");

  ImputationResult result;
  result.X_hat = imputed.values;
  ScoreMask scored =
      ScoreMask::Constant(truth.values.rows(), truth.values.cols(), false);
  bool any_bound = false;
  for (const auto& u : uq) {
    if (u.row < 0 || u.row >= truth.values.rows() || u.col < 0 ||
        u.col >= truth.values.cols()) {
      throw SchemaMismatch("uncertainty table references out-of-range cells");
    }
    scored(u.row, u.col) = true;
    MissingEntry e;
    e.row = u.row;
    e.col = u.col;
    e.uq.imputed = u.imputed;
    e.uq.latent_mean = u.latent_mean;
    e.uq.latent_var = u.latent_var;
    e.uq.interval = u.interval;
    e.uq.prob_bound = u.prob_bound;
    e.reliability = u.reliability;
    any_bound |= u.prob_bound.has_value();
    result.entries.push_back(std::move(e));
  }

  std::filesystem::create_directories(args.out_dir);
  std::ofstream report(args.out_dir + "/report.csv");
  if (!report) throw ParseError("cannot write evaluation report");
  report << "metric,value\n";
  report << "nrmse," << format_double(nrmse(truth.values, imputed.values,
                                            scored))
         << "\n";
  report << "mae,"
         << format_double(mae(truth.values, imputed.values, scored)) << "\n";
  bool any_interval = false;
  for (const auto& e : result.entries) any_interval |= e.uq.interval.has_value();
  if (any_interval) {
    const auto [cov, len] = coverage_and_length(result, truth.values);
    report << "coverage," << format_double(cov) << "\n";
    report << "mean_interval_length," << format_double(len) << "\n";
  }

  const std::vector<double> grid =
      args.curve_grid.empty()
          ? std::vector<double>{5,  10, 15, 20, 25, 30, 35, 40, 45, 50,
                                55, 60, 65, 70, 75, 80, 85, 90, 95, 100}
          : args.curve_grid;
  const auto curve = error_vs_reliability_curve(
      result, truth.values, any_bound ? ErrorMetric::mae : ErrorMetric::nrmse,
      grid);
  std::ofstream curve_out(args.out_dir + "/curve.csv");
  if (!curve_out) throw ParseError("cannot write curve file");
  curve_out << "m,error\n";
  for (const auto& [m, err] : curve) {
    curve_out << format_double(m) << "," << format_double(err) << "\n";
  }
  std::cout << "wrote report.csv and curve.csv to " << args.out_dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank Gaussian copula imputation with uncertainty"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads,
                 "Worker thread cap (0 = environment/automatic)");

  SimulateArgs sim;
  CLI::App* sim_cmd =
      app.add_subcommand("simulate", "Generate a synthetic dataset");
  sim_cmd->add_option("--protocol", sim.protocol,
                      "Named protocol (lowrank-cont, highrank-cont, "
                      "ordinal-high, ordinal-low, binary-high, binary-low)");
  sim_cmd->add_option("--n", sim.n, "Rows");
  sim_cmd->add_option("--p", sim.p, "Columns");
  sim_cmd->add_option("--k", sim.k, "Latent rank");
  sim_cmd->add_option("--sigma2", sim.sigma2, "Noise variance in (0,1)");
  sim_cmd->add_option("--data-kind", sim.kind,
                      "identity, cubic, ordinal, or binary");
  sim_cmd->add_option("--levels", sim.levels, "Ordinal level count");
  sim_cmd->add_option("--missing", sim.missing, "Missing-cell fraction");
  sim_cmd->add_option("--seed", sim.seed, "RNG seed");
  sim_cmd->add_option("--out", sim.out_dir, "Output directory")->required();

  FitArgs fit_args;
  CLI::App* fit_cmd = app.add_subcommand("fit", "Fit the copula model");
  fit_cmd->add_option("--data", fit_args.data_path, "Observed-data CSV")
      ->required();
  fit_cmd->add_option("--types", fit_args.types,
                      "Comma-separated column kinds "
                      "(continuous|ordinal|linear); inferred if omitted");
  fit_cmd->add_option("--rank", fit_args.rank, "Latent rank")->required();
  fit_cmd->add_option("--max-iter", fit_args.max_iter, "Iteration cap");
  fit_cmd->add_option("--tol", fit_args.tol,
                      "Relative parameter-change stopping tolerance");
  fit_cmd->add_option("--seed", fit_args.seed, "RNG seed");
  fit_cmd->add_option("--out", fit_args.out_path, "Model file path")
      ->required();

  ImputeArgs imp;
  CLI::App* imp_cmd =
      app.add_subcommand("impute", "Impute missing entries with uncertainty");
  imp_cmd->add_option("--data", imp.data_path, "Observed-data CSV")
      ->required();
  imp_cmd->add_option("--model", imp.model_path, "Fitted model file")
      ->required();
  imp_cmd->add_option("--alpha", imp.alpha, "Interval miss probability");
  imp_cmd->add_option("--out", imp.out_dir, "Output directory")->required();

  EvaluateArgs eval;
  CLI::App* eval_cmd =
      app.add_subcommand("evaluate", "Score imputations against truth");
  eval_cmd->add_option("--truth", eval.truth_path, "Complete-data CSV")
      ->required();
  eval_cmd->add_option("--imputed", eval.imputed_path, "Imputed CSV")
      ->required();
  eval_cmd->add_option("--uq", eval.uq_path, "Uncertainty CSV")->required();
  eval_cmd->add_option("--curve-grid", eval.curve_grid,
                       "Reliability-curve m values (percent)");
  eval_cmd->add_option("--out", eval.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
    if (sim_cmd->parsed()) {
      run_simulate(sim);
    } else if (fit_cmd->parsed()) {
      run_fit(fit_args, threads);
    } else if (imp_cmd->parsed()) {
      run_impute(imp);
    } else if (eval_cmd->parsed()) {
      run_evaluate(eval);
    }
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const lrgc::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const lrgc::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const lrgc::Error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
