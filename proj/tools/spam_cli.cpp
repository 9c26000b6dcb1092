// Command-line front end: fit / predict / path / gensynth / benchmark.
// stdout carries only machine-readable payload (JSON or CSV); all
// diagnostics go to stderr. Exit codes: 0 success, 1 input error,
// 2 numeric failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "spam/spam.hpp"

namespace {

using nlohmann::json;

std::uint64_t resolve_seed(std::uint64_t flag_seed, bool seed_given) {
  if (seed_given) return flag_seed;
  if (const char* env = std::getenv("SPAM_SEED")) {
    return static_cast<std::uint64_t>(std::strtoull(env, nullptr, 10));
  }
  return 12345;
}

spam::SmootherSpec make_smoother_spec(const std::string& kind, int d, double bandwidth,
                                      const std::string& basis) {
  spam::SmootherSpec spec;
  if (kind == "series") {
    spec.kind = spam::SmootherKind::OrthogonalSeries;
  } else if (kind == "loclin") {
    spec.kind = spam::SmootherKind::LocalLinear;
  } else {
    throw std::invalid_argument("unknown smoother '" + kind + "' (series|loclin)");
  }
  spec.truncation = d;
  spec.bandwidth = bandwidth;
  if (basis == "cosine") {
    spec.basis = spam::BasisKind::Cosine;
  } else if (basis == "identity") {
    spec.basis = spam::BasisKind::Identity;
  } else {
    throw std::invalid_argument("unknown basis '" + basis + "' (cosine|identity)");
  }
  return spec;
}

void emit(const std::string& payload, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << payload;
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw std::invalid_argument("cannot open for writing: " + out_path);
  out << payload;
}

std::string active_set_string(const spam::SpamModel& model) {
  std::string s = "{";
  bool first = true;
  for (int j : model.active_set()) {
    if (!first) s += ",";
    s += std::to_string(j);
    first = false;
  }
  return s + "}";
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (double v : parse_double_list(text)) out.push_back(static_cast<int>(v));
  return out;
}

struct FitFlags {
  std::string data_path;
  std::string response = "y";
  std::string mode = "gaussian";
  std::string smoother = "series";
  std::string basis = "cosine";
  std::string select;
  std::string group_sizes;
  std::string out;
  double lambda = -1.0;
  int d = 0;
  double bandwidth = 0.0;
  double tol = 1e-4;
  int max_iters = 100;
  int grid_size = 50;
  double lambda_min_ratio = 1e-3;
  bool no_scale = false;
};

int run_fit(const FitFlags& fl) {
  const bool have_lambda = fl.lambda >= 0;
  const bool have_select = !fl.select.empty();

  if (fl.mode == "lasso" || fl.mode == "group-lasso") {
    if (!have_lambda) {
      throw std::invalid_argument("--mode " + fl.mode + " requires --lambda");
    }
    // Parametric modes use the CSV matrix as-is; no [0,1] scaling.
    spam::Dataset data = spam::load_csv(fl.data_path, fl.response, /*scale=*/false);
    json out;
    out["mode"] = fl.mode;
    out["lambda"] = fl.lambda;
    if (fl.mode == "lasso") {
      Eigen::VectorXd beta = spam::lasso_cd(data.X, data.Y, fl.lambda);
      out["coefficients"] = std::vector<double>(beta.data(), beta.data() + beta.size());
      int nz = 0;
      for (Eigen::Index j = 0; j < beta.size(); ++j) nz += beta(j) != 0.0;
      std::cerr << "lasso: p = " << beta.size() << " nonzero = " << nz
                << " lambda = " << fl.lambda << "\n";
    } else {
      std::vector<int> sizes;
      if (fl.group_sizes.empty()) {
        sizes.assign(static_cast<std::size_t>(data.p()), 1);
      } else {
        sizes = parse_int_list(fl.group_sizes);
      }
      spam::GroupedDesign design;
      design.Y = data.Y;
      Eigen::Index col = 0;
      for (std::size_t g = 0; g < sizes.size(); ++g) {
        if (col + sizes[g] > data.p()) {
          throw std::invalid_argument("--group-sizes exceed the number of columns");
        }
        design.groups.emplace_back("g" + std::to_string(g + 1),
                                   data.X.middleCols(col, sizes[g]));
        col += sizes[g];
      }
      if (col != data.p()) {
        throw std::invalid_argument("--group-sizes must cover all columns");
      }
      spam::GroupedSolution sol = spam::grouped_lasso(design, fl.lambda);
      out["kkt_residual"] = sol.kkt_residual;
      out["converged"] = sol.converged;
      out["groups"] = json::array();
      for (std::size_t g = 0; g < sol.beta.size(); ++g) {
        out["groups"].push_back(
            {{"label", design.groups[g].first},
             {"beta", std::vector<double>(sol.beta[g].data(),
                                          sol.beta[g].data() + sol.beta[g].size())}});
      }
      std::cerr << "group-lasso: groups = " << sol.beta.size()
                << " kkt = " << sol.kkt_residual << "\n";
    }
    emit(out.dump(2) + "\n", fl.out);
    return 0;
  }

  if (have_lambda == have_select) {
    throw std::invalid_argument("specify exactly one of --lambda or --select");
  }

  spam::Dataset data = spam::load_csv(fl.data_path, fl.response, !fl.no_scale);
  spam::FitConfig cfg;
  cfg.smoother = make_smoother_spec(fl.smoother, fl.d, fl.bandwidth, fl.basis);
  cfg.tol = fl.tol;
  cfg.max_outer_iters = fl.max_iters;

  spam::SpamModel model;
  double df = -1.0, cp = std::numeric_limits<double>::quiet_NaN();
  if (fl.mode == "gaussian") {
    if (have_select) {
      if (fl.select != "cp" && fl.select != "gcv") {
        throw std::invalid_argument("--select must be cp or gcv");
      }
      spam::PathOptions opts;
      opts.grid_size = fl.grid_size;
      opts.lambda_min_ratio = fl.lambda_min_ratio;
      spam::LambdaPath path = spam::compute_path(data, cfg, opts);
      const std::size_t k =
          fl.select == "cp" ? path.selected_by_cp() : path.selected_by_gcv();
      model = path.models[k];
      df = path.risk[k].df;
      cp = path.risk[k].cp;
    } else {
      cfg.lambda = fl.lambda;
      spam::ColumnSmoothers smoothers(data, cfg.smoother, /*center_basis=*/true);
      model = spam::fit_with_smoothers(data, cfg, smoothers);
      df = spam::effective_df(model, smoothers);
    }
  } else if (fl.mode == "logistic") {
    if (!have_lambda) {
      throw std::invalid_argument("--mode logistic requires --lambda "
                                  "(risk-estimate selection applies to gaussian fits)");
    }
    cfg.lambda = fl.lambda;
    model = spam::fit_logistic(data, cfg);
  } else {
    throw std::invalid_argument("unknown --mode '" + fl.mode + "'");
  }

  std::cerr << "active = " << active_set_string(model) << " |active| = "
            << model.active_set().size() << " lambda = " << model.lambda;
  if (df >= 0) std::cerr << " df = " << df;
  if (!std::isnan(cp)) std::cerr << " cp = " << cp;
  std::cerr << (model.converged ? "" : " (not converged)") << "\n";

  emit(spam::model_to_json(model).dump(2) + "\n", fl.out);
  return 0;
}

int run_path(const FitFlags& fl) {
  spam::Dataset data = spam::load_csv(fl.data_path, fl.response, !fl.no_scale);
  spam::FitConfig cfg;
  cfg.smoother = make_smoother_spec(fl.smoother, fl.d, fl.bandwidth, fl.basis);
  cfg.tol = fl.tol;
  cfg.max_outer_iters = fl.max_iters;
  spam::PathOptions opts;
  opts.grid_size = fl.grid_size;
  opts.lambda_min_ratio = fl.lambda_min_ratio;
  spam::LambdaPath path = spam::compute_path(data, cfg, opts);

  std::ostringstream csv;
  spam::write_path_csv(csv, path);
  const std::size_t k = path.selected_by_cp();
  std::cerr << "path: " << path.lambdas.size() << " lambdas, lambda_max = "
            << path.lambda_max << ", cp-selected lambda = " << path.lambdas[k]
            << " active = " << active_set_string(path.models[k]) << "\n";
  emit(csv.str(), fl.out);
  return 0;
}

struct GensynthFlags {
  Eigen::Index n = 150;
  Eigen::Index p = 200;
  double noise_sd = 1.0;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out;
  std::string truth_out;
};

int run_gensynth(const GensynthFlags& fl) {
  spam::SyntheticSpec spec;
  spec.n = fl.n;
  spec.p = fl.p;
  spec.noise_sd = fl.noise_sd;
  spec.seed = resolve_seed(fl.seed, fl.seed_given);
  spam::SyntheticData synth = spam::generate_synthetic(spec);

  std::ostringstream csv;
  spam::save_csv(synth.data, csv);
  emit(csv.str(), fl.out);

  if (!fl.truth_out.empty()) {
    json truth;
    truth["support"] = synth.truth.support;
    truth["noise_sd"] = synth.truth.noise_sd;
    truth["seed"] = synth.truth.seed;
    std::ofstream tout(fl.truth_out);
    if (!tout) throw std::invalid_argument("cannot open for writing: " + fl.truth_out);
    tout << truth.dump(2) << "\n";
  }
  std::cerr << "gensynth: n = " << spec.n << " p = " << spec.p
            << " seed = " << spec.seed << "\n";
  return 0;
}

struct PredictFlags {
  std::string model_path;
  std::string data_path;
  std::string response;
  std::string out;
};

int run_predict(const PredictFlags& fl) {
  std::ifstream min(fl.model_path);
  if (!min) throw std::invalid_argument("cannot open model file: " + fl.model_path);
  json mj;
  min >> mj;
  spam::SpamModel model = spam::model_from_json(mj);

  // The model applies its own training scales; read the CSV unscaled.
  const bool have_response = !fl.response.empty();
  spam::Dataset data;
  if (have_response) {
    data = spam::load_csv(fl.data_path, fl.response, /*scale=*/false);
  } else {
    // No response column to strip: parse with a synthetic response of the
    // first column, then reassemble. Simpler: require the response flag
    // when the file has one; otherwise treat every column as a feature.
    std::ifstream in(fl.data_path);
    if (!in) throw std::invalid_argument("cannot open csv file: " + fl.data_path);
    std::string line;
    std::getline(in, line);
    std::stringstream header(line);
    std::string first;
    std::getline(header, first, ',');
    data = spam::load_csv(fl.data_path, first, /*scale=*/false);
    // Re-insert the parsed response as a leading column.
    Eigen::MatrixXd X(data.n(), data.p() + 1);
    X.col(0) = data.Y;
    X.rightCols(data.p()) = data.X;
    data.X = X;
  }
  Eigen::VectorXd pred = spam::predict(model, data.X);

  std::string payload = "prediction\n";
  char buf[40];
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", pred(i));
    payload += buf;
  }
  emit(payload, fl.out);

  if (have_response) {
    if (model.link == spam::LinkKind::Logistic) {
      double err = 0.0;
      for (Eigen::Index i = 0; i < pred.size(); ++i) {
        err += (pred(i) >= 0.5 ? 1.0 : 0.0) != data.Y(i);
      }
      std::cerr << "classification error = " << err / static_cast<double>(pred.size())
                << " n = " << pred.size() << "\n";
    } else {
      const double mse = (pred - data.Y).squaredNorm() / static_cast<double>(pred.size());
      std::cerr << "mse = " << mse << " n = " << pred.size() << "\n";
    }
  }
  return 0;
}

struct BenchmarkFlags {
  std::string p_list = "128,256";
  std::string n_grid = "50,100,150";
  int trials = 20;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;
  int grid_size = 50;
  int d = 3;
  double noise_sd = 1.0;
  std::string out;
};

//! One benchmark cell: fraction of trials whose Cp-selected active set is
//! exactly the true support.
struct BenchmarkCell {
  int p = 0;
  Eigen::Index n = 0;
  int trials = 0;
  double proportion = 0.0;
  int failures = 0;
};

int run_benchmark(const BenchmarkFlags& fl) {
  const std::vector<int> ps = parse_int_list(fl.p_list);
  const std::vector<int> ns = parse_int_list(fl.n_grid);
  if (ps.empty() || ns.empty() || fl.trials < 1) {
    throw std::invalid_argument("benchmark needs --p, --n-grid and --trials >= 1");
  }
  const std::uint64_t base_seed = resolve_seed(fl.seed, fl.seed_given);

  struct Trial {
    int p;
    Eigen::Index n;
    std::uint64_t seed;
    int cell;
  };
  std::vector<Trial> work;
  std::vector<BenchmarkCell> cells;
  for (int p : ps) {
    for (int n : ns) {
      BenchmarkCell cell;
      cell.p = p;
      cell.n = n;
      cell.trials = fl.trials;
      const int cell_idx = static_cast<int>(cells.size());
      for (int t = 0; t < fl.trials; ++t) {
        work.push_back({p, n,
                        spam::derive_seed(base_seed, static_cast<std::uint64_t>(p),
                                          static_cast<std::uint64_t>(n),
                                          static_cast<std::uint64_t>(t)),
                        cell_idx});
      }
      cells.push_back(cell);
    }
  }

  std::vector<int> outcome(work.size(), 0);  // 1 recovered, 0 missed, -1 failed
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= work.size()) return;
      const Trial& tr = work[k];
      try {
        spam::SyntheticSpec sspec;
        sspec.n = tr.n;
        sspec.p = tr.p;
        sspec.noise_sd = fl.noise_sd;
        sspec.seed = tr.seed;
        spam::SyntheticData synth = spam::generate_synthetic(sspec);
        spam::FitConfig cfg;
        cfg.smoother.kind = spam::SmootherKind::OrthogonalSeries;
        cfg.smoother.truncation = fl.d;
        spam::PathOptions opts;
        opts.grid_size = fl.grid_size;
        spam::LambdaPath path = spam::compute_path(synth.data, cfg, opts);
        const auto& best = path.models[path.selected_by_cp()];
        outcome[k] = best.active_set() == synth.truth.support ? 1 : 0;
      } catch (const std::exception& e) {
        outcome[k] = -1;
        static std::mutex log_mutex;
        std::lock_guard<std::mutex> lock(log_mutex);
        std::cerr << "trial failed (p = " << tr.p << ", n = " << tr.n << "): "
                  << e.what() << "\n";
      }
    }
  };

  int n_threads = fl.threads > 0 ? fl.threads
                                 : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(1, std::min<int>(n_threads, static_cast<int>(work.size())));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  for (std::size_t k = 0; k < work.size(); ++k) {
    auto& cell = cells[static_cast<std::size_t>(work[k].cell)];
    if (outcome[k] == 1) cell.proportion += 1.0;
    if (outcome[k] == -1) ++cell.failures;
  }
  std::string payload = "p,n,trials,proportion\n";
  char buf[128];
  for (auto& cell : cells) {
    cell.proportion /= static_cast<double>(cell.trials);
    std::snprintf(buf, sizeof(buf), "%d,%lld,%d,%.17g\n", cell.p,
                  static_cast<long long>(cell.n), cell.trials, cell.proportion);
    payload += buf;
    if (cell.failures > 0) {
      std::cerr << "p = " << cell.p << " n = " << cell.n << ": " << cell.failures
                << " trials failed\n";
    }
  }
  emit(payload, fl.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse additive models: fitting, paths, tuning and benchmarks"};
  app.require_subcommand(1);

  FitFlags fit_flags;
  auto add_common = [&](CLI::App* cmd, bool with_lambda) {
    cmd->add_option("--data", fit_flags.data_path, "input CSV")->required();
    cmd->add_option("--response", fit_flags.response, "response column name (default y)");
    cmd->add_option("--smoother", fit_flags.smoother, "series|loclin");
    cmd->add_option("--basis", fit_flags.basis, "cosine|identity (series only)");
    cmd->add_option("--d", fit_flags.d, "series truncation (0 = auto)");
    cmd->add_option("--bandwidth", fit_flags.bandwidth, "kernel bandwidth (0 = plug-in)");
    cmd->add_option("--tol", fit_flags.tol, "convergence tolerance");
    cmd->add_option("--max-iters", fit_flags.max_iters, "max backfitting sweeps");
    cmd->add_option("--grid-size", fit_flags.grid_size, "lambda grid size");
    cmd->add_option("--lambda-min-ratio", fit_flags.lambda_min_ratio,
                    "smallest lambda as a fraction of lambda_max");
    cmd->add_flag("--no-scale", fit_flags.no_scale, "skip min-max scaling to [0,1]");
    cmd->add_option("--out", fit_flags.out, "write payload to file instead of stdout");
    if (with_lambda) {
      cmd->add_option("--lambda", fit_flags.lambda, "penalty level");
      cmd->add_option("--select", fit_flags.select, "cp|gcv: pick lambda on a path");
      cmd->add_option("--mode", fit_flags.mode, "gaussian|logistic|lasso|group-lasso");
      cmd->add_option("--group-sizes", fit_flags.group_sizes,
                      "comma list of group sizes (group-lasso)");
    }
  };

  CLI::App* fit_cmd = app.add_subcommand("fit", "fit one model");
  add_common(fit_cmd, true);

  CLI::App* path_cmd = app.add_subcommand("path", "compute a regularization path CSV");
  add_common(path_cmd, false);

  GensynthFlags gen_flags;
  CLI::App* gen_cmd = app.add_subcommand("gensynth", "generate a synthetic dataset CSV");
  gen_cmd->add_option("--n", gen_flags.n, "sample count");
  gen_cmd->add_option("--p", gen_flags.p, "dimension count (>= 4)");
  gen_cmd->add_option("--noise-sd", gen_flags.noise_sd, "noise standard deviation");
  auto* gen_seed = gen_cmd->add_option("--seed", gen_flags.seed, "RNG seed");
  gen_cmd->add_option("--out", gen_flags.out, "write CSV to file instead of stdout");
  gen_cmd->add_option("--truth-out", gen_flags.truth_out, "write ground-truth JSON sidecar");

  PredictFlags pred_flags;
  CLI::App* pred_cmd = app.add_subcommand("predict", "evaluate a saved model on a CSV");
  pred_cmd->add_option("--model", pred_flags.model_path, "model JSON file")->required();
  pred_cmd->add_option("--data", pred_flags.data_path, "input CSV")->required();
  pred_cmd->add_option("--response", pred_flags.response,
                       "response column to strip (reports error when present)");
  pred_cmd->add_option("--out", pred_flags.out, "write predictions to file");

  BenchmarkFlags bench_flags;
  CLI::App* bench_cmd = app.add_subcommand("benchmark", "support-recovery sweep CSV");
  bench_cmd->add_option("--p", bench_flags.p_list, "comma list of dimensions");
  bench_cmd->add_option("--n-grid", bench_flags.n_grid, "comma list of sample sizes");
  bench_cmd->add_option("--trials", bench_flags.trials, "trials per (p, n) cell");
  auto* bench_seed = bench_cmd->add_option("--seed", bench_flags.seed, "base RNG seed");
  bench_cmd->add_option("--threads", bench_flags.threads, "worker threads (0 = hardware)");
  bench_cmd->add_option("--grid-size", bench_flags.grid_size, "lambda grid size");
  bench_cmd->add_option("--d", bench_flags.d, "series truncation");
  bench_cmd->add_option("--noise-sd", bench_flags.noise_sd, "noise standard deviation");
  bench_cmd->add_option("--out", bench_flags.out, "write CSV to file instead of stdout");

  try {
    app.parse(argc, argv);
    gen_flags.seed_given = gen_seed->count() > 0;
    bench_flags.seed_given = bench_seed->count() > 0;
    if (fit_cmd->parsed()) return run_fit(fit_flags);
    if (path_cmd->parsed()) return run_path(fit_flags);
    if (gen_cmd->parsed()) return run_gensynth(gen_flags);
    if (pred_cmd->parsed()) return run_predict(pred_flags);
    if (bench_cmd->parsed()) return run_benchmark(bench_flags);
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const std::domain_error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const spam::numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
