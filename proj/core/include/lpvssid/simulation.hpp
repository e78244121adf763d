#ifndef LPVSSID_SIMULATION_HPP
#define LPVSSID_SIMULATION_HPP

#include <cstdint>
#include <limits>

#include "lpvssid/basis.hpp"
#include "lpvssid/model.hpp"
#include "lpvssid/types.hpp"

namespace lpvssid {

struct SimResult {
  Mat y;  // n_y x N
  Mat x;  // n_x x N (state before the update at each instant)
  Mat xi; // n_y x N (realized innovations)
};

// Exact recursion of the innovation form for a given innovation sample path
// (pass an empty xi for the noiseless case). Throws PipelineError(simulation)
// naming the first bad index if the recursion leaves the finite range.
SimResult simulate(const LpvSsModel& model, const SchedulingBasis& basis,
                   const Mat& u, const Mat& p, const Mat& xi,
                   const Vec& x0 = Vec());

// One-step-ahead predictor: xhat_{t+1} = Atil(p_t) xhat_t + Btil(p_t)[u;y],
// yhat_t = C(p_t) xhat_t + D(p_t) u_t, started from xhat_0 = 0.
Mat one_step_predictor(const LpvSsModel& model, const SchedulingBasis& basis,
                       const DataSet& data);

// Colored noise channel w driven by xi through the model's (A, K, C) loop:
// xw_{t+1} = A(p_t) xw_t + K(p_t) xi_t, w_t = C(p_t) xw_t + xi_t.
Mat colored_noise(const LpvSsModel& model, const SchedulingBasis& basis,
                  const Mat& p, const Mat& xi);

struct NoiseSpec {
  double target_snr_db = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  Vec xi2_base_diag; // diagonal shape of Xi2; defaults to ones(n_y)

  bool noiseless() const { return std::isinf(target_snr_db); }
};

// Scales the diagonal Xi2 so that each output channel's
// 10 log10(sum y^2 / sum w^2) hits the target within 0.1 dB on the given
// (u, p) realization. Returns the zero matrix for an infinite target.
Mat calibrate_snr(const LpvSsModel& model, const SchedulingBasis& basis,
                  const Mat& u, const Mat& p, const NoiseSpec& spec,
                  int max_iters = 50);

// Best fit rate in percent,
//   max{ 1 - (sum_t ||y_t - yhat_t||_2) / (sum_t ||y_t - ybar||_2), 0 } * 100
// with vector norms across channels. A constant reference (zero denominator)
// yields 0; `degenerate` reports that case when non-null.
double bfr(const Mat& y_ref, const Mat& y_hat, bool* degenerate = nullptr);

struct Benchmark {
  LpvSsModel model;
  SchedulingBasis basis;
};

// Seeded surrogate of the MIMO benchmark: n_u = n_p = n_x = n_y = 2, affine
// basis on P = [-1,1]^2, the fixed innovation gain
//   K0 = [0.32 0.16; 0.64 0.24], K1 = K2 = 0,
// and randomly drawn A, B, C, D rescaled until both the open- and closed-loop
// empirical stability checks pass. Throws after 100 rejected draws.
Benchmark make_benchmark(std::uint64_t seed);

// White excitation laws of the benchmark: zero-mean unit-variance Gaussian
// input, i.i.d. uniform scheduling on the basis box.
void draw_benchmark_inputs(const SchedulingBasis& basis, Index N,
                           std::uint64_t seed, int n_u, Mat& u, Mat& p);

// Draws xi ~ N(0, Xi2) and simulates a full record; realized_snr_db reports
// the per-channel SNR of the generated data (empty when noiseless).
DataSet make_dataset(const LpvSsModel& model, const SchedulingBasis& basis,
                     Index N, const NoiseSpec& noise, std::uint64_t seed,
                     Vec* realized_snr_db = nullptr);

} // namespace lpvssid

#endif
