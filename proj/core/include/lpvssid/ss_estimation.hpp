#ifndef LPVSSID_SS_ESTIMATION_HPP
#define LPVSSID_SS_ESTIMATION_HPP

#include <complex>
#include <string>

#include "lpvssid/model.hpp"
#include "lpvssid/pre_estimation.hpp"
#include "lpvssid/realization.hpp"
#include "lpvssid/types.hpp"

namespace lpvssid {

struct OutputLsResult {
  MatList C, D;
  Mat xi; // fresh residuals y_t - C(p_t) x_t - D(p_t) u_t, one column per state column
};

// First regression step: [C0..C D0..D] from Y = theta' * [psi (x) x; psi (x) u].
// X columns are aligned with dataset instants t_begin..t_begin+N_eff-1.
OutputLsResult estimate_output_matrices(const Mat& X, const DataSet& data,
                                        const SchedulingSamples& s,
                                        Index t_begin);

struct StateLsResult {
  MatList A, B, K;
};

// Second step: shifted states against [psi (x) x; psi (x) u; psi (x) xi].
StateLsResult estimate_state_matrices(const Mat& X, const Mat& xi,
                                      const DataSet& data,
                                      const SchedulingSamples& s,
                                      Index t_begin);

enum class Method { cca_ol, hk_ol, n4sid, p_cca, ssarx, hk_cl, pbsid, p_ssarx };

Method method_from_name(const std::string& name); // throws on unknown name
const char* method_name(Method m);
bool method_is_open_loop(Method m);

struct IdentifyConfig {
  Method method = Method::cca_ol;
  WindowConfig win;
  int n_x = 2;
  // Pre-estimation orders; -1 picks f + p_win - 1 (the exact horizon).
  int nb = -1; // u lags (MAX and ARX)
  int nc = -1; // xi lags (MAX)
  int na = -1; // y lags (ARX)
  RidgeConfig ridge;
  GaussNewtonConfig gn;
  bool allow_truncation = false; // zero-fill missing high-order sub-Markov lags
  bool efficient_pbsid = false;  // square-root-free unified variant
};

struct IdentifiedModel {
  LpvSsModel model;
  StateSequence state;
  Vec singular_values;
  std::optional<double> log_likelihood;
  bool pre_estimation_converged = true;
  double ridge_lambda = 0.0;
  Mat innovation_covariance; // sample covariance of the output-step residuals
  Index n_effective = 0;
};

// End-to-end pipeline: pre-estimation (MAX for open-loop methods, ARX for
// closed-loop ones) -> Hankel arrangement -> corrected future -> state
// realization -> two least-squares steps. Errors carry their stage.
IdentifiedModel identify(const DataSet& data, const SchedulingBasis& basis,
                         const IdentifyConfig& cfg);

// The pipeline split at its natural seam: everything up to the corrected
// data matrices is method-independent within one mode/order setting, so
// several realization methods can share one preparation (the weighting
// comparisons of the benchmark are run on a shared pre-estimate).
struct PipelinePrep {
  SchedulingSamples s;
  HankelEstimate hankel;
  StackedDataMatrices sdm;
  bool pre_estimation_converged = true;
  double ridge_lambda = 0.0;
};

PipelinePrep prepare_pipeline(const DataSet& data, const SchedulingBasis& basis,
                              bool open_loop, const IdentifyConfig& cfg);

IdentifiedModel finish_identify(const DataSet& data,
                                const SchedulingBasis& basis,
                                const PipelinePrep& prep,
                                const IdentifyConfig& cfg);

struct ModelDistance {
  double bfr_sim = 0.0;  // simulated outputs of m2 against m1 on validation (u,p)
  double bfr_pred = 0.0; // one-step predictions of m2 against m1 on validation data
  std::vector<std::complex<double>> eig_A0_m1, eig_A1_m1, eig_A0_m2, eig_A1_m2;
};

// Similarity-invariant comparison: IO behavior on shared validation data and
// the spectra of A0/A1 (never raw parameter distances).
ModelDistance model_distance(const LpvSsModel& m1, const LpvSsModel& m2,
                             const SchedulingBasis& basis,
                             const DataSet& validation);

} // namespace lpvssid

#endif
