// lpvssid command line front end: dataset simulation, identification, and
// the Monte-Carlo benchmark study.
//
// Exit codes: 0 success, 1 usage, 2 data/file error, then one code per
// pipeline stage: 3 pre-estimation, 4 data-equations, 5 realization,
// 6 ss-estimation, 7 other numerical failure.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <lpvssid/csv.hpp>
#include <lpvssid/errors.hpp>
#include <lpvssid/model_io.hpp>
#include <lpvssid/monte_carlo.hpp>
#include <lpvssid/simulation.hpp>
#include <lpvssid/ss_estimation.hpp>

namespace fs = std::filesystem;
using namespace lpvssid;

namespace {

int exit_code_for(const PipelineError& e) {
  switch (e.stage()) {
    case Stage::io: return 2;
    case Stage::pre_estimation: return 3;
    case Stage::data_equations: return 4;
    case Stage::realization: return 5;
    case Stage::ss_estimation: return 6;
    case Stage::simulation: return 7;
  }
  return 7;
}

double parse_snr(const std::string& s) {
  if (s == "inf" || s == "Inf" || s == "INF")
    return std::numeric_limits<double>::infinity();
  return std::stod(s);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

struct SimulateArgs {
  bool benchmark = false;
  std::string model_file;
  std::uint64_t seed = 7;
  long long n = 1000;
  std::string snr = "inf";
  std::string out_dir;
};

int cmd_simulate(const SimulateArgs& a) {
  Benchmark bench = [&] {
    if (a.benchmark) return make_benchmark(a.seed);
    const LoadedModel lm = load_model(a.model_file);
    return Benchmark{lm.model, lm.basis};
  }();
  const double snr = parse_snr(a.snr);
  std::printf("simulate: n=%lld seed=%llu snr=%s model=%s\n", a.n,
              static_cast<unsigned long long>(a.seed), a.snr.c_str(),
              a.benchmark ? "benchmark surrogate" : a.model_file.c_str());

  NoiseSpec noise;
  noise.target_snr_db = snr;
  Vec realized;
  Mat xi2_used = Mat::Zero(bench.model.n_y, bench.model.n_y);
  const DataSet data =
      make_dataset(bench.model, bench.basis, a.n, noise, a.seed, &realized);
  if (!noise.noiseless() && data.xi)
    xi2_used = (*data.xi * data.xi->transpose()) / static_cast<double>(a.n);

  fs::create_directories(a.out_dir);
  const bool with_xi = !noise.noiseless();
  save_dataset_csv((fs::path(a.out_dir) / "dataset.csv").string(), data, with_xi);
  LpvSsModel truth = bench.model;
  if (!noise.noiseless())
    truth.Xi2 = xi2_used + 1e-12 * Mat::Identity(truth.n_y, truth.n_y);
  save_model((fs::path(a.out_dir) / "model.txt").string(), truth, bench.basis);

  if (realized.size()) {
    std::printf("realized SNR [dB]:");
    for (Index i = 0; i < realized.size(); ++i)
      std::printf(" %.3f", realized(i));
    std::printf("\n");
  } else {
    std::printf("noiseless record (xi = 0)\n");
  }
  std::printf("wrote %s/dataset.csv and %s/model.txt\n", a.out_dir.c_str(),
              a.out_dir.c_str());
  return 0;
}

struct IdentifyArgs {
  std::string data_file;
  std::string method = "cca-ol";
  int f = 3, p = 4; // future/past windows
  int nx = 2;
  int nb = -1, nc = -1, na = -1;
  bool allow_truncation = false;
  bool efficient_pbsid = false;
  std::string out_dir = ".";
  std::string validate_file;
};

int cmd_identify(const IdentifyArgs& a) {
  if (a.nx < 1) throw CLI::ValidationError("--nx must be >= 1");
  IdentifyConfig cfg;
  cfg.method = method_from_name(a.method);
  cfg.win.f = a.f;
  cfg.win.p_win = a.p;
  cfg.n_x = a.nx;
  cfg.nb = a.nb;
  cfg.nc = a.nc;
  cfg.na = a.na;
  cfg.allow_truncation = a.allow_truncation;
  cfg.efficient_pbsid = a.efficient_pbsid;

  const int horizon = a.f + a.p - 1;
  std::printf("identify: method=%s f=%d p=%d nx=%d nb=%d nc=%d na=%d "
              "(gn: beta1=1e-4 gamma=1e-8 lambda_min=1e-5 nu=0.01 "
              "alpha_min=0.001 eps=1e-6 max_iter=20)\n",
              a.method.c_str(), a.f, a.p, a.nx, a.nb < 0 ? horizon : a.nb,
              a.nc < 0 ? horizon : a.nc, a.na < 0 ? horizon : a.na);

  const DatasetHeader hdr = peek_dataset_header(a.data_file);
  const DataSet data = load_dataset_csv(a.data_file, hdr.n_u, hdr.n_p, hdr.n_y);
  // Affine basis on the observed scheduling range, padded so validation
  // points near the box edge stay inside the declared domain.
  Vec lo = data.p.rowwise().minCoeff(), hi = data.p.rowwise().maxCoeff();
  const Vec pad = 0.05 * (hi - lo).cwiseMax(1e-6);
  SchedulingBasis basis = SchedulingBasis::affine(hdr.n_p, lo - pad, hi + pad);

  const IdentifiedModel fit = identify(data, basis, cfg);

  fs::create_directories(a.out_dir);
  ModelDiagnostics diag;
  diag.method = a.method;
  diag.singular_values = fit.singular_values;
  diag.log_likelihood = fit.log_likelihood;
  diag.pre_estimation_converged = fit.pre_estimation_converged;
  diag.ridge_lambda = fit.ridge_lambda;
  save_model((fs::path(a.out_dir) / "model.txt").string(), fit.model, basis,
             &diag);
  save_spectrum_csv((fs::path(a.out_dir) / "singular_values.csv").string(),
                    fit.singular_values);
  std::printf("wrote %s/model.txt and %s/singular_values.csv\n",
              a.out_dir.c_str(), a.out_dir.c_str());

  if (!a.validate_file.empty()) {
    const DatasetHeader vh = peek_dataset_header(a.validate_file);
    const DataSet val =
        load_dataset_csv(a.validate_file, vh.n_u, vh.n_p, vh.n_y);
    const Mat yhat = simulate(fit.model, basis, val.u, val.p, Mat()).y;
    bool degenerate = false;
    const double score = bfr(val.y, yhat, &degenerate);
    if (degenerate)
      std::fprintf(stderr,
                   "warning: constant validation output, BFR pinned at 0\n");
    const Mat ypred = one_step_predictor(fit.model, basis, val);
    std::printf(
        "validation BFR: simulation %.4f%%, one-step prediction %.4f%%\n",
        score, bfr(val.y, ypred));
  }
  return 0;
}

struct BenchmarkArgs {
  int runs = 20;
  long long n = 1000;
  std::string snr = "inf";
  std::string methods = "cca-ol,ssarx,pbsid";
  std::uint64_t seed = 1;
  std::uint64_t model_seed = 7;
  long long val_n = 2000;
  int jobs = 1;
  int f_ol = 2, p_ol = 3; // open-loop windows
  int f_cl = 1, p_cl = 3; // closed-loop windows
  int nx = 2;
  std::string out_dir = ".";
};

int cmd_benchmark(const BenchmarkArgs& a) {
  if (a.runs < 1) throw CLI::ValidationError("--runs must be >= 1");
  MonteCarloConfig cfg;
  cfg.n_runs = a.runs;
  cfg.N = a.n;
  cfg.n_val = a.val_n;
  cfg.master_seed = a.seed;
  cfg.model_seed = a.model_seed;
  cfg.jobs = a.jobs;
  cfg.snr_db.clear();
  for (const std::string& s : split_list(a.snr))
    cfg.snr_db.push_back(parse_snr(s));
  for (const std::string& name : split_list(a.methods)) {
    IdentifyConfig ic;
    ic.method = method_from_name(name);
    ic.n_x = a.nx;
    if (method_is_open_loop(ic.method)) {
      ic.win.f = a.f_ol;
      ic.win.p_win = a.p_ol;
    } else {
      ic.win.f = a.f_cl;
      ic.win.p_win = a.p_cl;
      ic.efficient_pbsid = true;
    }
    cfg.methods.push_back(ic);
  }
  cfg.validate();

  std::printf("benchmark: runs=%d n=%lld val_n=%lld snr={%s} methods={%s} "
              "seed=%llu model_seed=%llu jobs=%d windows ol=(f=%d,p=%d) "
              "cl=(f=%d,p=%d) nx=%d\n",
              a.runs, a.n, a.val_n, a.snr.c_str(), a.methods.c_str(),
              static_cast<unsigned long long>(a.seed),
              static_cast<unsigned long long>(a.model_seed), a.jobs, a.f_ol,
              a.p_ol, a.f_cl, a.p_cl, a.nx);

  const Benchmark bench = make_benchmark(cfg.model_seed);
  const MonteCarloResults results = monte_carlo(cfg, bench);

  fs::create_directories(a.out_dir);
  save_results_csv((fs::path(a.out_dir) / "results.csv").string(), results.rows);
  save_eigenvalues_csv((fs::path(a.out_dir) / "eigenvalues.csv").string(),
                       results.eigenvalues);
  std::printf("%s", format_results_table(results).c_str());
  std::printf("wrote %s/results.csv and %s/eigenvalues.csv\n",
              a.out_dir.c_str(), a.out_dir.c_str());

  for (std::size_t i = 0; i < results.rows.size(); ++i)
    if (results.rows[i].failures > 0)
      std::fprintf(stderr, "note: %s at snr=%s had %d failures (%s)\n",
                   results.rows[i].method.c_str(),
                   format_double(results.rows[i].snr_db).c_str(),
                   results.rows[i].failures,
                   results.failure_messages[i].c_str());

  const double success_rate =
      results.total_runs == 0
          ? 1.0
          : 1.0 - static_cast<double>(results.total_failures) /
                      static_cast<double>(results.total_runs);
  return success_rate >= 0.9 ? 0 : 7;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"LPV state-space subspace identification"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key=value config file; flags override");

  SimulateArgs sa;
  CLI::App* sim = app.add_subcommand("simulate", "generate a dataset");
  sim->add_flag("--benchmark", sa.benchmark, "use the seeded benchmark surrogate");
  sim->add_option("--model", sa.model_file, "model file to simulate instead");
  sim->add_option("--seed", sa.seed, "RNG seed");
  sim->add_option("--n", sa.n, "number of samples")->check(CLI::PositiveNumber);
  sim->add_option("--snr", sa.snr, "per-channel SNR in dB, or 'inf'");
  sim->add_option("--out", sa.out_dir, "output directory")->required();

  IdentifyArgs ia;
  CLI::App* ident = app.add_subcommand("identify", "fit a model to a dataset CSV");
  ident->add_option("data", ia.data_file, "dataset CSV")->required();
  ident->add_option("--method", ia.method,
                    "cca-ol|hk-ol|n4sid|p-cca|ssarx|hk-cl|pbsid|p-ssarx");
  ident->add_option("--f", ia.f, "future window")->check(CLI::PositiveNumber);
  ident->add_option("--p", ia.p, "past window")->check(CLI::PositiveNumber);
  ident->add_option("--nx", ia.nx, "state order")->check(CLI::PositiveNumber);
  ident->add_option("--nb", ia.nb, "u-lag order (default f+p-1)");
  ident->add_option("--nc", ia.nc, "xi-lag order for MAX (default f+p-1)");
  ident->add_option("--na", ia.na, "y-lag order for ARX (default f+p-1)");
  ident->add_flag("--allow-truncation", ia.allow_truncation,
                  "zero-fill sub-Markov lags beyond the estimated horizon");
  ident->add_flag("--efficient-pbsid", ia.efficient_pbsid,
                  "square-root-free PBSID variant");
  ident->add_option("--out", ia.out_dir, "output directory");
  ident->add_option("--validate", ia.validate_file, "validation dataset CSV");

  BenchmarkArgs ba;
  CLI::App* bench = app.add_subcommand("benchmark", "Monte-Carlo study");
  bench->add_option("--runs", ba.runs, "Monte-Carlo runs per SNR");
  bench->add_option("--n", ba.n, "samples per identification record");
  bench->add_option("--val-n", ba.val_n, "validation record length");
  bench->add_option("--snr", ba.snr, "comma list of SNRs in dB ('inf' allowed)");
  bench->add_option("--methods", ba.methods, "comma list of methods");
  bench->add_option("--seed", ba.seed, "master seed");
  bench->add_option("--model-seed", ba.model_seed, "surrogate model seed");
  bench->add_option("--jobs", ba.jobs, "parallel runs")->check(CLI::PositiveNumber);
  bench->add_option("--f-ol", ba.f_ol, "open-loop future window");
  bench->add_option("--p-ol", ba.p_ol, "open-loop past window");
  bench->add_option("--f-cl", ba.f_cl, "closed-loop future window");
  bench->add_option("--p-cl", ba.p_cl, "closed-loop past window");
  bench->add_option("--nx", ba.nx, "state order");
  bench->add_option("--out", ba.out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sa);
    if (ident->parsed()) return cmd_identify(ia);
    if (bench->parsed()) return cmd_benchmark(ba);
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const PipelineError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 7;
  }
  return 0;
}
