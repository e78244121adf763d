#include "lpvssid/monte_carlo.hpp"

#include <Eigen/Eigenvalues>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "lpvssid/rng.hpp"

namespace lpvssid {

void MonteCarloConfig::validate() const {
  if (n_runs < 1) throw std::invalid_argument("n_runs must be >= 1");
  if (N < 8) throw std::invalid_argument("N too small");
  if (snr_db.empty()) throw std::invalid_argument("no SNR levels configured");
  if (methods.empty()) throw std::invalid_argument("no methods configured");
  if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
}

namespace {

struct RunOutcome {
  // Indexed like cfg.methods; NaN marks a failed fit.
  std::vector<double> bfr_sim, bfr_pred;
  std::vector<std::string> errors;
  std::vector<MatList> a_coeffs; // A0, A1 of each successful fit
};

// Key grouping methods that can share one pre-estimation.
struct GroupKey {
  bool open;
  int f, p_win, nb, nc, na;
  bool trunc;
  bool operator==(const GroupKey&) const = default;
};

GroupKey key_of(const IdentifyConfig& c) {
  return GroupKey{method_is_open_loop(c.method), c.win.f,       c.win.p_win,
                  c.nb,                          c.nc,          c.na,
                  c.allow_truncation};
}

RunOutcome run_one(const MonteCarloConfig& cfg, const Benchmark& bench,
                   std::size_t snr_idx, int run) {
  const double snr = cfg.snr_db[snr_idx];
  const std::uint64_t tag = (static_cast<std::uint64_t>(snr_idx) << 32) +
                            static_cast<std::uint64_t>(run) * 2;
  NoiseSpec noise;
  noise.target_snr_db = snr;
  const DataSet data =
      make_dataset(bench.model, bench.basis, cfg.N, noise,
                   mix_seed(cfg.master_seed, tag));
  const DataSet val =
      make_dataset(bench.model, bench.basis, cfg.n_val, noise,
                   mix_seed(cfg.master_seed, tag + 1));
  const Mat y_val_clean =
      simulate(bench.model, bench.basis, val.u, val.p, Mat()).y;
  const Mat y_val_oracle_pred = one_step_predictor(bench.model, bench.basis, val);

  RunOutcome out;
  out.bfr_sim.assign(cfg.methods.size(), std::nan(""));
  out.bfr_pred.assign(cfg.methods.size(), std::nan(""));
  out.errors.resize(cfg.methods.size());
  out.a_coeffs.resize(cfg.methods.size());

  // Methods with equal pre-estimation settings share one preparation.
  std::vector<int> group_of(cfg.methods.size(), -1);
  std::vector<GroupKey> keys;
  std::vector<PipelinePrep> preps;
  std::vector<bool> prep_ok;
  std::vector<std::string> prep_err;
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    const GroupKey k = key_of(cfg.methods[mi]);
    int gi = -1;
    for (std::size_t j = 0; j < keys.size(); ++j)
      if (keys[j] == k) gi = static_cast<int>(j);
    if (gi < 0) {
      keys.push_back(k);
      gi = static_cast<int>(keys.size()) - 1;
      try {
        preps.push_back(prepare_pipeline(data, bench.basis, k.open,
                                         cfg.methods[mi]));
        prep_ok.push_back(true);
        prep_err.emplace_back();
      } catch (const std::exception& e) {
        preps.emplace_back();
        prep_ok.push_back(false);
        prep_err.emplace_back(e.what());
      }
    }
    group_of[mi] = gi;
  }

  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    const int gi = group_of[mi];
    if (!prep_ok[gi]) {
      out.errors[mi] = prep_err[gi];
      continue;
    }
    try {
      const IdentifiedModel fit =
          finish_identify(data, bench.basis, preps[gi], cfg.methods[mi]);
      const Mat y_sim =
          simulate(fit.model, bench.basis, val.u, val.p, Mat()).y;
      out.bfr_sim[mi] = bfr(y_val_clean, y_sim);
      const Mat y_pred = one_step_predictor(fit.model, bench.basis, val);
      out.bfr_pred[mi] = bfr(y_val_oracle_pred, y_pred);
      out.a_coeffs[mi] = {fit.model.A[0],
                          fit.model.n_psi() >= 1 ? fit.model.A[1] : Mat()};
    } catch (const std::exception& e) {
      out.errors[mi] = e.what();
    }
  }
  return out;
}

void mean_std(const std::vector<double>& v, double& mean, double& std_dev) {
  mean = 0.0;
  std_dev = 0.0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return;
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  std_dev = std::sqrt(acc / static_cast<double>(v.size() - 1));
}

} // namespace

MonteCarloResults monte_carlo(const MonteCarloConfig& cfg,
                              const Benchmark& bench) {
  cfg.validate();
  MonteCarloResults results;

  for (std::size_t si = 0; si < cfg.snr_db.size(); ++si) {
    std::vector<RunOutcome> outcomes(cfg.n_runs);
    std::atomic<int> next{0};
    auto worker = [&]() {
      for (;;) {
        const int r = next.fetch_add(1);
        if (r >= cfg.n_runs) break;
        outcomes[r] = run_one(cfg, bench, si, r);
      }
    };
    if (cfg.jobs <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int j = 0; j < cfg.jobs; ++j) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }

    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
      std::vector<double> sims, preds;
      int failures = 0;
      std::string first_error;
      for (int r = 0; r < cfg.n_runs; ++r) {
        const RunOutcome& o = outcomes[r];
        if (std::isnan(o.bfr_sim[mi])) {
          failures++;
          if (first_error.empty()) first_error = o.errors[mi];
          continue;
        }
        sims.push_back(o.bfr_sim[mi]);
        preds.push_back(o.bfr_pred[mi]);
        for (int which = 0; which < 2; ++which) {
          const Mat& A = o.a_coeffs[mi][which];
          if (A.size() == 0) continue;
          Eigen::EigenSolver<Mat> es(A);
          for (Index i = 0; i < A.rows(); ++i)
            results.eigenvalues.push_back(
                EigenScatterRow{method_name(cfg.methods[mi].method), r,
                                which == 0 ? "A0" : "A1",
                                es.eigenvalues()(i).real(),
                                es.eigenvalues()(i).imag()});
        }
      }
      BenchmarkResultRow row;
      row.method = method_name(cfg.methods[mi].method);
      row.snr_db = cfg.snr_db[si];
      row.n = cfg.N;
      mean_std(sims, row.bfr_sim_mean, row.bfr_sim_std);
      mean_std(preds, row.bfr_pred_mean, row.bfr_pred_std);
      row.failures = failures;
      results.rows.push_back(row);
      results.total_failures += failures;
      results.failure_messages.push_back(first_error);
      results.total_runs += cfg.n_runs;
    }
  }
  return results;
}

std::string format_results_table(const MonteCarloResults& results) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s %8s %8s %22s %22s %9s\n", "method",
                "snr[dB]", "N", "BFR sim mean(std)", "BFR pred mean(std)",
                "failures");
  os << buf;
  for (const auto& r : results.rows) {
    char snr[16];
    if (std::isinf(r.snr_db))
      std::snprintf(snr, sizeof snr, "inf");
    else
      std::snprintf(snr, sizeof snr, "%g", r.snr_db);
    std::snprintf(buf, sizeof buf, "%-10s %8s %8lld %10.4f (%8.4f) %10.4f (%8.4f) %9d\n",
                  r.method.c_str(), snr, static_cast<long long>(r.n),
                  r.bfr_sim_mean, r.bfr_sim_std, r.bfr_pred_mean,
                  r.bfr_pred_std, r.failures);
    os << buf;
  }
  return os.str();
}

} // namespace lpvssid
