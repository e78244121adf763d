#ifndef LPVSSID_DATA_EQUATIONS_HPP
#define LPVSSID_DATA_EQUATIONS_HPP

#include "lpvssid/basis.hpp"
#include "lpvssid/model.hpp"
#include "lpvssid/types.hpp"

namespace lpvssid {

// ---------------------------------------------------------------------------
// Kronecker layout conventions (used consistently by every builder below, by
// the pre-estimation regressors, and by the Hankel assembly):
//
//  * Past regressor column at time t, lag l = 1..p, open loop:
//      [ (psi_{t-1} (x) ... (x) psi_{t-l}) (x) u_{t-l} ]   then
//      [ (psi_{t-1} (x) ... (x) psi_{t-l}) (x) xi_{t-l} ]
//    i.e. the two channels of every lag are contiguous (the diag(Pu, Pxi)
//    structure) and the outermost scheduling factor is the most recent lag.
//    Closed loop replaces psi by mu and xi by y; the y channel carries
//    mu_{t-1} (x) ... (x) mu_{t-l+1} (x) psi_{t-l} since the gain K stays
//    affine in psi.
//  * Reachability recursion (columns must contract against the above):
//      Ru_1 = [B_0 ... B_npsi],  Ru_k = [A_0 Ru_{k-1} ... A_npsi Ru_{k-1}]
//    per channel, concatenated [Ru_1 Rxi_1 ... Ru_p Rxi_p]; the new (outer)
//    coefficient of every recursion step acts at the most recent lag.
//  * Observability recursion (rows contract against future scheduling):
//      O_1 = [C_0; ...; C_npsi],  O_k = [O_{k-1} A_0; ...; O_{k-1} A_npsi]
//    so the outer row-block index is the A acting at the earliest future
//    time; row block k of N_{t,f} O_f is C(p_{t+k}) A(p_{t+k-1})...A(p_t).
//  * Sub-Markov coefficient tensor of lag m (the coefficient of u_{s-m} in
//    y_s): stored n_y x (...) with column factors ordered
//      [psi_s, psi_{s-1}, ..., psi_{s-m}, I_channel]
//    outermost first. Entry (j, i_1, ..., i_{m-1}, l) = C_j A_{i_1} ...
//    A_{i_{m-1}} B_l. Closed loop: [psi_s, mu_{s-1}, ..., mu_{s-m}, I_u] for
//    the u channel and [psi_s, mu_{s-1}, ..., mu_{s-m+1}, psi_{s-m}, I_y]
//    for the y channel.
// ---------------------------------------------------------------------------

struct WindowConfig {
  int f = 3;     // future window
  int p_win = 4; // past window

  // Fail-fast guard against the exponential growth of the Kronecker
  // regressors: builders refuse to materialize more than this many doubles
  // in one matrix.
  std::size_t max_doubles = std::size_t(1) << 28; // 2 GiB

  void validate() const;
};

// Contract the outermost Kronecker factor of a column-factored matrix:
// M is r x (B*w); returns sum_i weights(i) * M[:, i*w .. (i+1)*w).
Mat contract_cols_outer(const Mat& M, const Vec& weights);

// Row-side analogue: M is (B*h) x c; returns sum_i weights(i) * M[i*h.., :].
Mat contract_rows_outer(const Mat& M, const Vec& weights);

// --- dimension bookkeeping ---

// Rows contributed by past lag l to the stacked regressor.
Index past_lag_rows(int l, int n_u, int n_ych, int n_psi, int n_mu, Mode mode);
// Total rows of the stacked past regressor (the appendix's n_Z).
Index past_rows(int p_win, int n_u, int n_ych, int n_psi, int n_mu, Mode mode);
// Rows of the extended observability matrix O_f (resp. closed-loop variant).
Index obs_rows(int f, int n_y, int n_psi, int n_mu, Mode mode);

// --- structural matrices from a model (used by oracles and tests) ---

enum class ObsVariant { full, zero_only, star };

// Extended observability matrix per the stacking recursions. `zero_only`
// returns [C0; C0 A0; ...; C0 A0^{f-1}] (closed loop: A0 - K0 C0); `star`
// follows the starred recursion seeded with [C_1; ...; C_npsi].
Mat build_extended_observability(const LpvSsModel& model,
                                 const SchedulingBasis& basis, int f,
                                 ObsVariant variant, Mode mode);

// Extended reachability matrix [Ru_1 Rz_1 ... Ru_p Rz_p] (z = xi or y).
Mat build_extended_reachability(const LpvSsModel& model,
                                const SchedulingBasis& basis, int p_win,
                                Mode mode);

// Time-varying counterparts built by direct products, the oracle side of the
// Kronecker factorization identities. Row block k of the observability is
// C(p_{t+k}) A(p_{t+k-1}) ... A(p_t); column block l of the reachability is
// [A(p_{t-1}) ... A(p_{t-l+1}) B(p_{t-l}) | same with K] (closed loop with
// Atil, [B-KD], K).
Mat tv_observability(const LpvSsModel& model, const SchedulingSamples& s,
                     Index t, int f, Mode mode); // (n_y f) x n_x
Mat tv_reachability(const LpvSsModel& model, const SchedulingSamples& s,
                    Index t, int p_win, Mode mode); // n_x x (n_u+n_y) p_win

// Scheduling selector matrices: N_{t,f} (maps stacked O_f rows to the f
// future output blocks) and M_{t,p} (maps stacked past data to the expanded
// regressor). Materialized densely; intended for tests/diagnostics.
Mat future_selector_matrix(const SchedulingSamples& s, Index t, int f, int n_y,
                           Mode mode);
Mat past_selector_matrix(const SchedulingSamples& s, Index t, int p_win,
                         int n_u, int n_ych, Mode mode);

// Single expanded past-regressor column M_{t,p} z (z = [u;xi] resp. [u;y]).
Vec build_past_regressor(const Mat& u, const Mat& zchan,
                         const SchedulingSamples& s, Index t, int p_win,
                         Mode mode, std::size_t max_doubles = WindowConfig{}.max_doubles);

// --- sub-Markov coefficient tensors ---

/// Coefficients of the one-step predictor / MAX form, one matrix per lag.
/// Gu[m-1] holds the lag-m coefficient of the u channel (m = 1..horizon_u),
/// Gz[m-1] of the xi (open) resp. y (closed) channel; D0 is the lag-0
/// feedthrough [D_0 ... D_npsi]. A single tensor feeds every placement that
/// shares the coefficient (Toeplitz blocks, Hankel blocks, star correction).
struct MarkovCoeffs {
  Mode mode = Mode::open_loop;
  int n_y = 0, n_u = 0, n_psi = 0, n_mu = 0;
  Mat D0;              // n_y x (1+n_psi) n_u
  std::vector<Mat> Gu; // lag m = 1..horizon_u
  std::vector<Mat> Gz; // lag m = 1..horizon_z

  int horizon_u() const { return static_cast<int>(Gu.size()); }
  int horizon_z() const { return static_cast<int>(Gz.size()); }

  Index gu_cols(int m) const; // expected width of Gu[m-1]
  Index gz_cols(int m) const;
};

// Exact coefficient tensors of a model, for oracle tests and exactness
// checks of the estimation pipeline.
MarkovCoeffs true_markov_coeffs(const LpvSsModel& model,
                                const SchedulingBasis& basis, int horizon,
                                Mode mode);

// --- Hankel arrangement and the corrected data-equation ---

/// Pre-estimated sub-Markov blocks arranged for the realization step.
/// H0 realizes the scheduling-independent part O^0_f R_p. The time-varying
/// part O*_f R_p and the Toeplitz blocks L_f are not materialized; they are
/// contractions of `coeffs` evaluated per time instant, so every placement
/// of a shared coefficient reads the same estimate.
struct HankelEstimate {
  Mode mode = Mode::open_loop;
  WindowConfig win;
  MarkovCoeffs coeffs;
  Mat H0; // (n_y f) x n_Z
  // Open-loop stacking of the innovation channel. Identically vanishing
  // innovation estimates (noiseless records) make the xi-expanded regressor
  // rows degenerate, so the channel is dropped from Z and H0 there; the
  // theory reduces to the deterministic data-equation.
  bool z_channel = true;

  Index n_z() const { return H0.cols(); }
};

// Arranges coefficient tensors into a HankelEstimate. Requires coefficient
// horizon >= f + p_win - 1 on both channels unless allow_truncation is set,
// in which case missing high-order blocks are treated as zero (the usual
// finite-order truncation of the predictor tail).
HankelEstimate markov_to_hankel(const MarkovCoeffs& coeffs,
                                const WindowConfig& win,
                                bool allow_truncation = false,
                                bool z_channel = true);

// (L_f <> p)_t z^f_t: response of the future output stack to future inputs,
// strictly causal (row block k sees inputs at offsets <= k; feedthrough
// [D 0] on the diagonal). zfut has f columns [z_t ... z_{t+f-1}],
// z = [u; xi] (open) or [u; y] (closed).
Vec build_toeplitz_correction(const HankelEstimate& hankel,
                              const SchedulingSamples& s, Index t,
                              const Mat& zfut);

/// Stacked regression data of the corrected data-equation: column j holds
/// the expanded past regressor and the corrected future at usable instant
/// t = t_begin + j, with t_begin = p_win (0-based; the spec's
/// t in [p_win+1, N-f+1] in 1-based indexing).
struct StackedDataMatrices {
  Mode mode = Mode::open_loop;
  WindowConfig win;
  Mat Z;     // n_Z x N_eff
  Mat Ycorr; // (n_y f) x N_eff
  Index t_begin = 0;

  Index n_eff() const { return Z.cols(); }
};

// Builds Z and the corrected future
//   Ycorr(t) = y^f_t - (L_f<>p)_t z^f_t - [N_{t,f} (O_f R_p) - H0] M_{t,p} z
// computed from the coefficient tensors so that, with exact coefficients and
// xi == 0, Ycorr == H0 Z holds up to the initial-condition tail. Open loop
// requires data.xi (estimated innovations in identification mode, true ones
// in oracle mode).
StackedDataMatrices corrected_future(const DataSet& data,
                                     const SchedulingSamples& s,
                                     const HankelEstimate& hankel);

// Brute-force evaluator of the stacked future outputs y^f_t by direct
// recursion of the state equations; the independent oracle for every
// factorized construction above. zero_init restarts the state at
// x_{t - p_win} = 0 for every usable t (the data-equation with the
// initial-condition term dropped); otherwise the recursion runs once from
// x0 over the whole record. Requires data.xi.
Mat oracle_evaluate(const LpvSsModel& model, const DataSet& data,
                    const SchedulingSamples& s, const WindowConfig& cfg,
                    Mode mode, bool zero_init, const Vec& x0 = Vec());

} // namespace lpvssid

#endif
