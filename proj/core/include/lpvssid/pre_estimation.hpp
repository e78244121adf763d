#ifndef LPVSSID_PRE_ESTIMATION_HPP
#define LPVSSID_PRE_ESTIMATION_HPP

#include "lpvssid/basis.hpp"
#include "lpvssid/data_equations.hpp"
#include "lpvssid/model.hpp"
#include "lpvssid/types.hpp"

namespace lpvssid {

struct RidgeConfig {
  // Log-spaced candidate weights; selection by generalized cross validation.
  Vec lambda_grid;
  RidgeConfig();
  void validate() const;
};

// Enhanced Gauss-Newton constants for the pseudo-linear MAX regression.
struct GaussNewtonConfig {
  double beta1 = 1e-4;      // Armijo-Goldstein minimal relative descent
  double gamma = 1e-8;      // singular-value truncation for the direction
  double lambda_min = 1e-5; // Levenberg-Marquardt floor
  double nu = 0.01;         // minimal direction/gradient cosine
  double alpha_min = 0.001; // backtracking floor
  double epsilon = 1e-6;    // first-order termination
  int max_iter = 20;

  void validate() const;
};

// GCV objective N ||residual||^2 / (N - trace(hat))^2 for the ridge problem
// min ||y - Phi theta||^2 + lambda ||theta||^2, pooled over target columns.
// Interpolation (trace == N) returns +inf.
double gcv_score(const Mat& Phi, const Mat& targets, double lambda);

struct RidgeFit {
  Mat coeffs;        // n_cols x n_targets
  double lambda;     // GCV-selected weight
  Vec gcv_curve;     // score per grid point
};

// Ridge regression over the lambda grid with GCV selection; Phi has one row
// per sample. Rank-deficient Phi with an effectively zero selected lambda
// raises an error instructing a nonzero weight.
RidgeFit ridge_regression(const Mat& Phi, const Mat& targets,
                          const RidgeConfig& cfg);

// --- regressor layouts -----------------------------------------------------
//
// One row per usable instant t = maxlag..N-1, columns grouped per lag with
// the Kronecker ordering of data_equations.hpp:
//   open loop:   [psi_t (x) u_t | psi_t (x) psi_{t-1} (x) u_{t-1} | ... |
//                 psi_t (x) ... (x) psi_{t-m} (x) z_{t-m} | ...]
//   closed loop: u lags carry psi_t (x) mu_{t-1} (x) ... (x) mu_{t-m},
//                y lags end on psi_{t-m}.
// The coefficient block of lag m is exactly the sub-Markov tensor of
// MarkovCoeffs, so estimates drop into markov_to_hankel unchanged.

struct RegressorLayout {
  Mode mode;
  int n_u, n_ych, n_psi, n_mu;
  int nb; // u lags 0..nb
  int nz; // z lags 1..nz (xi open, y closed); 0 disables the channel
  std::vector<Index> u_offset; // column offset of u lag m = 0..nb
  std::vector<Index> z_offset; // column offset of z lag m = 1..nz
  Index cols = 0;
  Index t_first = 0; // first usable instant

  static RegressorLayout make(Mode mode, int n_u, int n_ych, int n_psi,
                              int n_mu, int nb, int nz);
};

// Fills one regressor row for instant t (t >= layout.t_first); `row` is
// resized to layout.cols.
void fill_regressor_row(const RegressorLayout& layout, const Mat& u,
                        const Mat& zchan, const SchedulingSamples& s, Index t,
                        Vec& row);

// Dense regressor and aligned targets for t = t_first..N-1.
void build_regressor(const RegressorLayout& layout, const Mat& u,
                     const Mat& zchan, const Mat& y, const SchedulingSamples& s,
                     std::size_t max_doubles, Mat& Phi, Mat& Y);

// Unpacks a stacked coefficient estimate (n_cols x n_y) into per-lag tensors.
MarkovCoeffs unpack_coeffs(const RegressorLayout& layout, const Mat& theta);

// --- estimation front ends -------------------------------------------------

struct FirFit {
  MarkovCoeffs coeffs; // Gz empty
  double lambda;
  Mat residuals; // n_y x N (zero before the first usable instant)
};

// Ridge regression of y on Kronecker-expanded past u only (MAX initializer).
FirFit fit_lpv_fir(const DataSet& data, const SchedulingBasis& basis, int order,
                   const RidgeConfig& cfg);

struct ArxFit {
  MarkovCoeffs coeffs;
  double lambda;
  Mat residuals; // innovation estimates, n_y x N
};

// Ridge regression of the LPV-ARX predictor over the mu-expanded regressors;
// the residuals estimate the innovations.
ArxFit fit_lpv_arx(const DataSet& data, const SchedulingBasis& basis, int na,
                   int nb, const RidgeConfig& cfg);

struct MaxFit {
  MarkovCoeffs coeffs;
  Mat xi_hat; // n_y x N (zero before the first usable instant)
  bool converged = false;
  int iterations = 0;
  double objective = 0.0;
  std::vector<double> objective_trace; // accepted iterates, non-increasing
};

// Pseudo-linear regression of the LPV-MAX form: alternates innovation
// refresh with enhanced Gauss-Newton steps (Armijo-Goldstein line search,
// SVD-truncated direction, Levenberg-Marquardt damping, orthogonality
// safeguard, first-order stop). Returns the best iterate with a
// non-convergence flag when no epsilon-stop occurs.
MaxFit fit_lpv_max(const DataSet& data, const SchedulingBasis& basis, int nb,
                   int nc, const FirFit& init, const GaussNewtonConfig& cfg);

} // namespace lpvssid

#endif
