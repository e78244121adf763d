#ifndef LPVSSID_MONTE_CARLO_HPP
#define LPVSSID_MONTE_CARLO_HPP

#include <functional>
#include <string>
#include <vector>

#include "lpvssid/csv.hpp"
#include "lpvssid/simulation.hpp"
#include "lpvssid/ss_estimation.hpp"

namespace lpvssid {

struct MonteCarloConfig {
  int n_runs = 20;
  Index N = 1000;
  std::vector<double> snr_db{std::numeric_limits<double>::infinity()};
  std::vector<IdentifyConfig> methods;
  Index n_val = 2000;          // fresh validation realization per run
  std::uint64_t master_seed = 1;
  std::uint64_t model_seed = 7; // surrogate benchmark seed
  int jobs = 1;

  void validate() const;
};

struct MonteCarloResults {
  std::vector<BenchmarkResultRow> rows;      // one per (method, snr)
  std::vector<EigenScatterRow> eigenvalues;  // A0/A1 spectra of every fit
  int total_runs = 0;
  int total_failures = 0;
  std::vector<std::string> failure_messages; // first message per (method, snr)
};

// Runs n_runs independent (u, p, xi) realizations per SNR, identifies with
// every configured method (methods sharing mode/windows/orders share one
// pre-estimate per run), scores simulation BFR against the noiseless truth
// output and prediction BFR against the true model's one-step predictions on
// a fresh validation set, and tabulates mean/std. Per-run failures are
// recorded, not fatal. Deterministic for a fixed master seed, independent of
// the job count.
MonteCarloResults monte_carlo(const MonteCarloConfig& cfg,
                              const Benchmark& bench);

// Aligned "mean (std)" table like the study report.
std::string format_results_table(const MonteCarloResults& results);

} // namespace lpvssid

#endif
